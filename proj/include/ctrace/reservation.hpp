#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrace/ingest.hpp"
#include "ctrace/model.hpp"
#include "ctrace/utilization.hpp"

namespace ctrace {

enum class PolicyVariant : std::uint8_t {
  RequestStatic,
  BorgDecay,
  ChangeQuantileMargin,
};

// Where ChangeQuantileMargin takes its margin from.
enum class MarginSource : std::uint8_t {
  Measured,  // task-scope change distribution of the simulated bundle
  Fixed,     // fixed_margin
};

std::string_view to_string(PolicyVariant v);
std::string_view to_string(MarginSource s);

struct ReservationPolicy {
  std::string name;
  PolicyVariant variant = PolicyVariant::RequestStatic;
  double sampling_period_s = 300;

  // BorgDecay
  double decay_rate = 0.1;
  double margin_fraction = 0.15;

  // ChangeQuantileMargin
  double quantile = 0.9;
  MarginSource source = MarginSource::Measured;
  double fixed_margin = 0.2;
  double floor_fraction = 0.0;
  bool per_class = false;
  double class_threshold_s = 300;

  nlohmann::json to_json() const;
};

// Throws ConfigError on out-of-range parameters.
void validate(const ReservationPolicy& policy);

// Key-value policy file. Unknown keys are errors.
ReservationPolicy load_policy(const std::filesystem::path& path);

// Inputs of one reservation decision.
struct ReserveInput {
  std::optional<double> request;
  std::optional<double> usage;     // last observed usage; absent = cold start
  std::optional<double> previous;  // previous reservation (BorgDecay)
  double margin = 0;               // change quantile (ChangeQuantileMargin)
};

// Reservation for the next period. Every variant is capped at the request,
// which wins over the usage floor when usage already exceeds it. Throws
// PolicyError when the request is absent.
double reserve(const ReservationPolicy& policy, const ReserveInput& in);

// Change distributions split by task class. A class with too little data
// holds nullopt.
struct ClassDistributions {
  double threshold_s = 300;
  std::optional<ChangeDistribution> short_lived;
  std::optional<ChangeDistribution> long_running;
  std::size_t short_tasks = 0;
  std::size_t long_tasks = 0;
};

// Tasks whose longest execution (or live time when never finished) is
// below threshold_s are short-lived. Tasks without events fall back to the
// extent of their usage samples.
std::vector<TaskKey> short_lived_tasks(const TraceBundle& bundle,
                                       double threshold_s);

ClassDistributions per_class_distributions(const TraceBundle& bundle,
                                           double threshold_s,
                                           Resource resource, double period_s,
                                           const ChangeOptions& options = {});

struct SimOptions {
  unsigned workers = 1;
  TierBands bands;
  ChangeOptions change;
  // Overrides the measured distribution per resource (cpu, memory).
  std::optional<ChangeDistribution> cpu_distribution;
  std::optional<ChangeDistribution> mem_distribution;
};

// One task in one period of the replay.
struct TaskPeriod {
  TaskKey key;
  std::int64_t period = 0;
  std::uint64_t machine = 0;
  PriorityTier tier = PriorityTier::Middle;
  int priority = 0;
  double covered_s = 0;
  std::array<double, 2> usage{};        // indexed by Resource
  std::array<double, 2> request{};
  std::array<double, 2> reservation{};
  bool evicted = false;
};

struct ResourceTotals {
  double reclaimed = 0;  // request-unit seconds
  double reserved = 0;
  double used = 0;
  double requested = 0;
  std::uint64_t violations = 0;
};

struct TierTotals {
  std::array<ResourceTotals, 2> resources;
  std::uint64_t task_periods = 0;
  std::uint64_t violations = 0;  // either resource
  std::uint64_t evictions = 0;
};

struct SeriesRow {
  Micros time = 0;
  std::array<double, 2> reserved{};
  std::array<double, 2> used{};
  std::array<double, 2> requested{};
};

struct SimReport {
  ReservationPolicy policy;
  std::array<ResourceTotals, 2> resources;
  std::array<TierTotals, 3> tiers;
  std::array<std::optional<double>, 2> margin;  // ChangeQuantileMargin
  std::array<std::optional<double>, 2> short_margin;
  std::uint64_t task_periods = 0;
  std::uint64_t violation_count = 0;  // either resource
  double violation_rate = 0;
  std::uint64_t evictions_triggered = 0;
  std::uint64_t unresolved_overflow = 0;  // machine-periods still over
  std::uint64_t skipped_tasks = 0;        // no request for some resource
  std::vector<SeriesRow> series;

  nlohmann::json to_json() const;
};

// Per-task reservations for every period, sorted by key then period.
// Throws ResolutionError when the policy period is finer than the usage.
std::vector<TaskPeriod> replay(const TraceBundle& bundle,
                               const ReservationPolicy& policy,
                               const SimOptions& options = {},
                               SimReport* report = nullptr);

SimReport simulate(const TraceBundle& bundle, const ReservationPolicy& policy,
                   const SimOptions& options = {});

// One report per policy, sorted by reclaimed CPU then memory (descending),
// ties kept in input order.
std::vector<SimReport> compare_policies(
    const TraceBundle& bundle, std::span<const ReservationPolicy> policies,
    const SimOptions& options = {});

void write_series_csv(std::ostream& out, const SimReport& report);
void write_comparison_csv(std::ostream& out,
                          std::span<const SimReport> reports);

}  // namespace ctrace
