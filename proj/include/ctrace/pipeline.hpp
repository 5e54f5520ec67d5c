#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "ctrace/aggregate.hpp"
#include "ctrace/ingest.hpp"
#include "ctrace/lifecycle.hpp"

namespace ctrace {

struct AnalysisOptions {
  LifecycleOptions lifecycle;
  unsigned workers = 1;
  // Events held in memory before grouping switches to on-disk partitions.
  std::size_t memory_budget_events = 20'000'000;
  // Partition files go here (a fresh temporary directory when empty).
  std::filesystem::path spill_dir;
  std::size_t spill_partitions = 64;
  Micros trace_end = std::numeric_limits<Micros>::max();
  // Keep per-task spans and violations for export.
  bool keep_task_outputs = false;
};

struct TaskOutputs {
  TaskKey key;
  std::vector<ScheduleSpan> spans;
  std::vector<Violation> violations;
};

struct TraceAnalysis {
  TraceAggregator aggregator;
  std::vector<TaskOutputs> tasks;  // sorted by key
  std::vector<Diagnostic> diagnostics;
  std::uint64_t events = 0;
  Micros max_time = 0;
  bool spilled = false;
};

// Groups by task key, builds lifecycles and aggregates them. Work is
// sharded by key hash over options.workers threads; results do not depend
// on the worker count.
TraceAnalysis analyze_events(std::vector<TaskEvent> events,
                             const AnalysisOptions& options);

// Streams task_events files. When more than memory_budget_events rows are
// read, every event is appended to one of spill_partitions CSV files
// (task_events layout, partition = key hash modulo count) and the
// partitions are analyzed one at a time.
TraceAnalysis analyze_files(std::span<const std::filesystem::path> files,
                            const TaskEventColumns& columns,
                            const AnalysisOptions& options);

}  // namespace ctrace
