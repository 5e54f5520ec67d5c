#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctrace/model.hpp"
#include "ctrace/text.hpp"

namespace ctrace {

// Zero-based column positions. Defaults follow the clusterdata v2 layout.
struct TaskEventColumns {
  std::size_t column_count = 13;
  std::size_t time = 0;
  std::size_t missing_info = 1;
  std::size_t job_id = 2;
  std::size_t task_index = 3;
  std::size_t machine_id = 4;
  std::size_t event_type = 5;
  std::size_t user = 6;
  std::size_t scheduling_class = 7;
  std::size_t priority = 8;
  std::size_t cpu_request = 9;
  std::size_t mem_request = 10;
  std::size_t disk_request = 11;
  std::size_t different_machine = 12;
};

struct UsageColumns {
  std::size_t min_columns = 19;
  std::size_t max_columns = 20;
  std::size_t window_start = 0;
  std::size_t window_end = 1;
  std::size_t job_id = 2;
  std::size_t task_index = 3;
  std::size_t machine_id = 4;
  std::size_t cpu_usage = 5;
  std::size_t mem_usage = 6;
};

struct MachineColumns {
  std::size_t column_count = 6;
  std::size_t time = 0;
  std::size_t machine_id = 1;
  std::size_t event_type = 2;
  std::size_t cpu = 4;
  std::size_t mem = 5;
};

// Column-map file: YAML mapping of field name to zero-based index, plus an
// optional `columns` entry. Unknown keys are a ConfigError.
TaskEventColumns load_task_event_columns(const std::filesystem::path& path);
UsageColumns load_usage_columns(const std::filesystem::path& path);

struct UsageSample {
  Micros window_start = 0;
  Micros window_end = 0;
  TaskKey key;
  std::uint64_t machine_id = 0;
  double cpu_usage = 0;
  double mem_usage = 0;

  friend bool operator==(const UsageSample&, const UsageSample&) = default;
};

inline constexpr Micros kMaxUsageWindow = 300 * kMicrosPerSecond;

struct Machine {
  std::uint64_t id = 0;
  double cpu = 0;
  double mem = 0;

  friend bool operator==(const Machine&, const Machine&) = default;
};

struct Capacity {
  double cpu = 0;
  double mem = 0;
};

struct TraceBundle {
  std::vector<TaskEvent> task_events;
  std::vector<UsageSample> usage;
  std::vector<Machine> machines;  // sorted by id
  Capacity machine_capacity;      // sum over machines
  Micros trace_end = 0;
};

struct Diagnostic {
  std::string source;
  std::uint64_t line = 0;
  std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

// Throws ParseError.
TaskEvent parse_task_event_row(std::string_view row, std::uint64_t line,
                               const TaskEventColumns& columns = {});
UsageSample parse_usage_row(std::string_view row, std::uint64_t line,
                            const UsageColumns& columns = {});

// Row writers emit the default clusterdata layouts.
std::string format_task_event_row(const TaskEvent& e);
std::string format_usage_row(const UsageSample& s);
std::string format_machine_row(const Machine& m);

// Streaming reader over a task_events file or stream. Malformed rows are
// skipped and recorded as diagnostics.
class TaskEventReader {
 public:
  TaskEventReader(std::unique_ptr<LineReader> lines, std::string source,
                  TaskEventColumns columns = {});

  static TaskEventReader open(const std::filesystem::path& path,
                              TaskEventColumns columns = {});

  std::optional<TaskEvent> next();

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::unique_ptr<LineReader> lines_;
  std::string source_;
  TaskEventColumns columns_;
  std::vector<Diagnostic> diagnostics_;
  std::uint64_t line_no_ = 0;
  std::string buffer_;
};

std::vector<TaskEvent> read_task_events(std::istream& in,
                                        std::vector<Diagnostic>& diagnostics,
                                        const TaskEventColumns& columns = {});
std::vector<TaskEvent> read_task_events(const std::filesystem::path& path,
                                        std::vector<Diagnostic>& diagnostics,
                                        const TaskEventColumns& columns = {});

std::vector<UsageSample> read_usage(std::istream& in,
                                    std::vector<Diagnostic>& diagnostics,
                                    const UsageColumns& columns = {});
std::vector<UsageSample> read_usage(const std::filesystem::path& path,
                                    std::vector<Diagnostic>& diagnostics,
                                    const UsageColumns& columns = {});

// Last reported capacity per machine from a machine_events file.
std::vector<Machine> read_machines(const std::filesystem::path& path,
                                   std::vector<Diagnostic>& diagnostics,
                                   const MachineColumns& columns = {});

void write_task_events(std::ostream& out, std::span<const TaskEvent> events);
void write_usage(std::ostream& out, std::span<const UsageSample> usage);
void write_machines(std::ostream& out, std::span<const Machine> machines);

// Orders by time; equal timestamps by task key, then by kind rank
// (Submit, Schedule, UpdatePending, UpdateRunning, Evict, Fail, Finish,
// Kill, Lost). Stable for fully tied events.
void sort_events(std::vector<TaskEvent>& events);
bool event_order_less(const TaskEvent& a, const TaskEvent& b);

void sort_usage(std::vector<UsageSample>& usage);

Capacity total_capacity(std::span<const Machine> machines);

}  // namespace ctrace
