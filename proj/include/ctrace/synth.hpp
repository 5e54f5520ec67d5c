#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ctrace/ingest.hpp"
#include "ctrace/model.hpp"

namespace ctrace {

// Log-uniform execution-time component, in seconds.
struct ExecComponent {
  double weight = 1;
  double min_s = 1;
  double max_s = 1;
};

// A group of tasks that die and are resubmitted inside
// [center - width, center + width].
struct ResubmitBurst {
  double center_s = 0;
  double width_s = 0;
  std::size_t count = 0;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t task_count = 1000;
  double duration_s = 86'400;
  std::size_t tasks_per_job = 1;

  std::size_t machine_count = 50;
  double machine_cpu = 0.5;
  double machine_mem = 0.5;

  double production_fraction = 0.06;
  double gratis_fraction = 0.25;

  double sched_delay_mean_s = 30;
  double p_pending_exit = 0.02;  // attempt ends before scheduling
  double p_finish = 0.85;        // running attempt finishes
  double p_resubmit = 0.5;       // dead, unfinished attempt comes back
  double resubmit_delay_mean_s = 600;
  int max_attempts = 3;
  double p_update = 0.1;  // per phase, one update event

  std::vector<ExecComponent> exec_mixture = {{0.8, 8, 1800},
                                             {0.2, 1800, 86'400}};
  std::vector<ResubmitBurst> bursts;

  bool emit_usage = true;
  double usage_period_s = 300;
  double cpu_request_min = 0.01;
  double cpu_request_max = 0.05;
  double mem_request_min = 0.01;
  double mem_request_max = 0.05;
  double production_request_scale = 4;
  double usage_level = 0.5;  // mean usage as a fraction of request
  // Bound on the per-step multiplicative usage change.
  double volatility = 0.05;
  std::optional<double> volatility_short;
  std::optional<double> volatility_long;
  double class_threshold_s = 300;
  double mean_reversion = 0.02;
  std::size_t max_usage_samples = 50'000'000;
};

// Throws ConfigError on inconsistent settings.
void validate(const SynthConfig& config);

// YAML key-value file; keys mirror the SynthConfig field names.
SynthConfig load_synth_config(const std::filesystem::path& path);

struct TruthSpan {
  TaskKey key;
  Micros submit_time = 0;
  std::optional<Micros> schedule_time;
  std::optional<Micros> end_time;
  std::optional<TerminalClass> terminal;
};

// Generator bookkeeping, kept independent of lifecycle reconstruction.
struct SynthTruth {
  std::vector<TruthSpan> spans;                  // emitted part only
  std::vector<double> sampled_exec_s;            // every drawn execution time
  std::size_t finish_count = 0;                  // Finish events emitted
  std::size_t first_submit_count = 0;
  std::vector<std::vector<TaskKey>> burst_tasks;  // per configured burst
  std::vector<TaskKey> short_tasks;  // execution time below class threshold
};

struct SyntheticTrace {
  TraceBundle bundle;
  SynthTruth truth;
};

SyntheticTrace generate_synthetic(const SynthConfig& config);

// Writes task_events.csv, task_usage.csv and machine_events.csv.
void write_bundle(const TraceBundle& bundle,
                  const std::filesystem::path& dir);

}  // namespace ctrace
