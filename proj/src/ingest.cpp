#include "ctrace/ingest.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include "ctrace/error.hpp"

namespace ctrace {

namespace {

std::uint64_t require_u64(std::string_view field, std::uint64_t line,
                          const char* name) {
  auto v = parse_u64(field);
  if (!v) {
    throw ParseError(line, std::string("non-numeric ") + name + " '" +
                               std::string(field) + "'");
  }
  return *v;
}

long require_long(std::string_view field, std::uint64_t line,
                  const char* name) {
  auto v = parse_long(field);
  if (!v) {
    throw ParseError(line, std::string("non-numeric ") + name + " '" +
                               std::string(field) + "'");
  }
  return *v;
}

std::optional<double> optional_fraction(std::string_view field,
                                        std::uint64_t line, const char* name) {
  if (field.empty()) return std::nullopt;
  auto v = parse_double(field);
  if (!v) {
    throw ParseError(line, std::string("non-numeric ") + name + " '" +
                               std::string(field) + "'");
  }
  if (!(*v >= 0.0)) {
    throw ParseError(line, std::string("negative ") + name);
  }
  return v;
}

void append_optional(std::string& out, const std::optional<double>& v) {
  if (v) out += format_double(*v);
}

template <typename Columns>
void load_column_map(const std::filesystem::path& path,
                     const std::map<std::string, std::size_t*>& fields) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("column map " + path.string() + ": " + e.what());
  }
  if (!root.IsMap()) {
    throw ConfigError("column map " + path.string() + " is not a mapping");
  }
  for (const auto& item : root) {
    auto name = item.first.as<std::string>();
    auto it = fields.find(name);
    if (it == fields.end()) {
      throw ConfigError("column map: unknown field '" + name + "'");
    }
    try {
      *it->second = item.second.as<std::size_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError("column map: field '" + name +
                        "' needs a non-negative integer");
    }
  }
}

}  // namespace

TaskEventColumns load_task_event_columns(const std::filesystem::path& path) {
  TaskEventColumns c;
  load_column_map<TaskEventColumns>(
      path, {{"columns", &c.column_count},
             {"time", &c.time},
             {"missing_info", &c.missing_info},
             {"job_id", &c.job_id},
             {"task_index", &c.task_index},
             {"machine_id", &c.machine_id},
             {"event_type", &c.event_type},
             {"user", &c.user},
             {"scheduling_class", &c.scheduling_class},
             {"priority", &c.priority},
             {"cpu_request", &c.cpu_request},
             {"mem_request", &c.mem_request},
             {"disk_request", &c.disk_request},
             {"different_machine", &c.different_machine}});
  return c;
}

UsageColumns load_usage_columns(const std::filesystem::path& path) {
  UsageColumns c;
  std::size_t columns = 0;
  load_column_map<UsageColumns>(path, {{"columns", &columns},
                                       {"window_start", &c.window_start},
                                       {"window_end", &c.window_end},
                                       {"job_id", &c.job_id},
                                       {"task_index", &c.task_index},
                                       {"machine_id", &c.machine_id},
                                       {"cpu_usage", &c.cpu_usage},
                                       {"mem_usage", &c.mem_usage}});
  if (columns != 0) c.min_columns = c.max_columns = columns;
  return c;
}

std::string format_diagnostic(const Diagnostic& d) {
  return d.source + ":" + std::to_string(d.line) + ": " + d.message;
}

TaskEvent parse_task_event_row(std::string_view row, std::uint64_t line,
                               const TaskEventColumns& c) {
  auto f = split_fields(row);
  if (f.size() != c.column_count) {
    throw ParseError(line, "expected " + std::to_string(c.column_count) +
                               " columns, found " + std::to_string(f.size()));
  }
  TaskEvent e;
  e.time = require_u64(f[c.time], line, "timestamp");
  if (!f[c.missing_info].empty()) {
    long m = require_long(f[c.missing_info], line, "missing info");
    if (m < 0 || m > 2) throw ParseError(line, "unknown missing-info code");
    e.missing_info = static_cast<MissingInfo>(m);
  }
  e.key.job_id = require_u64(f[c.job_id], line, "job id");
  std::uint64_t index = require_u64(f[c.task_index], line, "task index");
  if (index > UINT32_MAX) throw ParseError(line, "task index out of range");
  e.key.task_index = static_cast<std::uint32_t>(index);
  if (!f[c.machine_id].empty()) {
    e.machine_id = require_u64(f[c.machine_id], line, "machine id");
  }
  auto kind = event_kind_from_code(require_long(f[c.event_type], line,
                                                "event type"));
  if (!kind) throw ParseError(line, "unknown event kind");
  e.kind = *kind;
  e.user = std::string(f[c.user]);
  long sched = require_long(f[c.scheduling_class], line, "scheduling class");
  if (sched < 0 || sched > 3) {
    throw ParseError(line, "scheduling class outside 0..3");
  }
  e.scheduling_class = static_cast<int>(sched);
  long prio = require_long(f[c.priority], line, "priority");
  if (prio < 0 || prio > kMaxPriority) {
    throw ParseError(line, "priority outside 0..11");
  }
  e.priority = static_cast<int>(prio);
  e.cpu_request = optional_fraction(f[c.cpu_request], line, "cpu request");
  e.mem_request = optional_fraction(f[c.mem_request], line, "memory request");
  e.disk_request = optional_fraction(f[c.disk_request], line, "disk request");
  if (!f[c.different_machine].empty()) {
    long dm = require_long(f[c.different_machine], line,
                           "different-machine constraint");
    if (dm != 0 && dm != 1) {
      throw ParseError(line, "different-machine constraint must be 0 or 1");
    }
    e.different_machine = dm == 1;
  }
  return e;
}

UsageSample parse_usage_row(std::string_view row, std::uint64_t line,
                            const UsageColumns& c) {
  auto f = split_fields(row);
  if (f.size() < c.min_columns || f.size() > c.max_columns) {
    throw ParseError(line, "expected " + std::to_string(c.min_columns) +
                               (c.min_columns == c.max_columns
                                    ? std::string()
                                    : "-" + std::to_string(c.max_columns)) +
                               " columns, found " + std::to_string(f.size()));
  }
  UsageSample s;
  s.window_start = require_u64(f[c.window_start], line, "window start");
  s.window_end = require_u64(f[c.window_end], line, "window end");
  if (s.window_end < s.window_start) {
    throw ParseError(line, "window ends before it starts");
  }
  if (s.window_end - s.window_start > kMaxUsageWindow) {
    throw ParseError(line, "window longer than 300 s");
  }
  s.key.job_id = require_u64(f[c.job_id], line, "job id");
  std::uint64_t index = require_u64(f[c.task_index], line, "task index");
  if (index > UINT32_MAX) throw ParseError(line, "task index out of range");
  s.key.task_index = static_cast<std::uint32_t>(index);
  s.machine_id = require_u64(f[c.machine_id], line, "machine id");
  auto cpu = optional_fraction(f[c.cpu_usage], line, "cpu usage");
  auto mem = optional_fraction(f[c.mem_usage], line, "memory usage");
  s.cpu_usage = cpu.value_or(0.0);
  s.mem_usage = mem.value_or(0.0);
  return s;
}

std::string format_task_event_row(const TaskEvent& e) {
  std::string out;
  out.reserve(96);
  out += std::to_string(e.time);
  out += ',';
  if (e.missing_info) out += std::to_string(static_cast<int>(*e.missing_info));
  out += ',';
  out += std::to_string(e.key.job_id);
  out += ',';
  out += std::to_string(e.key.task_index);
  out += ',';
  if (e.machine_id) out += std::to_string(*e.machine_id);
  out += ',';
  out += std::to_string(static_cast<int>(e.kind));
  out += ',';
  out += e.user;
  out += ',';
  out += std::to_string(e.scheduling_class);
  out += ',';
  out += std::to_string(e.priority);
  out += ',';
  append_optional(out, e.cpu_request);
  out += ',';
  append_optional(out, e.mem_request);
  out += ',';
  append_optional(out, e.disk_request);
  out += ',';
  if (e.different_machine) out += *e.different_machine ? '1' : '0';
  return out;
}

std::string format_usage_row(const UsageSample& s) {
  std::string out;
  out += std::to_string(s.window_start);
  out += ',';
  out += std::to_string(s.window_end);
  out += ',';
  out += std::to_string(s.key.job_id);
  out += ',';
  out += std::to_string(s.key.task_index);
  out += ',';
  out += std::to_string(s.machine_id);
  out += ',';
  out += format_double(s.cpu_usage);
  out += ',';
  out += format_double(s.mem_usage);
  out.append(13, ',');  // remaining v2 columns are not modeled
  return out;
}

std::string format_machine_row(const Machine& m) {
  return "0," + std::to_string(m.id) + ",0,," + format_double(m.cpu) + "," +
         format_double(m.mem);
}

TaskEventReader::TaskEventReader(std::unique_ptr<LineReader> lines,
                                 std::string source, TaskEventColumns columns)
    : lines_(std::move(lines)), source_(std::move(source)), columns_(columns) {}

TaskEventReader TaskEventReader::open(const std::filesystem::path& path,
                                      TaskEventColumns columns) {
  return TaskEventReader(LineReader::open(path), path.string(), columns);
}

std::optional<TaskEvent> TaskEventReader::next() {
  while (lines_->next(buffer_)) {
    ++line_no_;
    if (buffer_.empty()) continue;
    try {
      return parse_task_event_row(buffer_, line_no_, columns_);
    } catch (const ParseError& e) {
      diagnostics_.push_back({source_, e.line(), e.reason()});
    }
  }
  return std::nullopt;
}

namespace {

std::vector<TaskEvent> drain(TaskEventReader reader,
                             std::vector<Diagnostic>& diagnostics) {
  std::vector<TaskEvent> events;
  while (auto e = reader.next()) events.push_back(std::move(*e));
  diagnostics.insert(diagnostics.end(), reader.diagnostics().begin(),
                     reader.diagnostics().end());
  return events;
}

std::vector<UsageSample> read_usage_lines(LineReader& lines,
                                          const std::string& source,
                                          std::vector<Diagnostic>& diagnostics,
                                          const UsageColumns& columns) {
  std::vector<UsageSample> out;
  std::string line;
  std::uint64_t n = 0;
  while (lines.next(line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse_usage_row(line, n, columns));
    } catch (const ParseError& e) {
      diagnostics.push_back({source, e.line(), e.reason()});
    }
  }
  return out;
}

}  // namespace

std::vector<TaskEvent> read_task_events(std::istream& in,
                                        std::vector<Diagnostic>& diagnostics,
                                        const TaskEventColumns& columns) {
  return drain(TaskEventReader(LineReader::from_stream(in), "<stream>",
                               columns),
               diagnostics);
}

std::vector<TaskEvent> read_task_events(const std::filesystem::path& path,
                                        std::vector<Diagnostic>& diagnostics,
                                        const TaskEventColumns& columns) {
  return drain(TaskEventReader::open(path, columns), diagnostics);
}

std::vector<UsageSample> read_usage(std::istream& in,
                                    std::vector<Diagnostic>& diagnostics,
                                    const UsageColumns& columns) {
  auto lines = LineReader::from_stream(in);
  return read_usage_lines(*lines, "<stream>", diagnostics, columns);
}

std::vector<UsageSample> read_usage(const std::filesystem::path& path,
                                    std::vector<Diagnostic>& diagnostics,
                                    const UsageColumns& columns) {
  auto lines = LineReader::open(path);
  return read_usage_lines(*lines, path.string(), diagnostics, columns);
}

std::vector<Machine> read_machines(const std::filesystem::path& path,
                                   std::vector<Diagnostic>& diagnostics,
                                   const MachineColumns& c) {
  auto lines = LineReader::open(path);
  std::map<std::uint64_t, Machine> machines;
  std::string line;
  std::uint64_t n = 0;
  while (lines->next(line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto f = split_fields(line);
      if (f.size() != c.column_count) {
        throw ParseError(n, "expected " + std::to_string(c.column_count) +
                                " columns, found " + std::to_string(f.size()));
      }
      std::uint64_t id = require_u64(f[c.machine_id], n, "machine id");
      long type = require_long(f[c.event_type], n, "event type");
      if (type < 0 || type > 2) throw ParseError(n, "unknown machine event");
      if (type == 1) continue;  // removal keeps the last known capacity
      auto cpu = optional_fraction(f[c.cpu], n, "cpu capacity");
      auto mem = optional_fraction(f[c.mem], n, "memory capacity");
      Machine& m = machines[id];
      m.id = id;
      if (cpu) m.cpu = *cpu;
      if (mem) m.mem = *mem;
    } catch (const ParseError& e) {
      diagnostics.push_back({path.string(), e.line(), e.reason()});
    }
  }
  std::vector<Machine> out;
  out.reserve(machines.size());
  for (auto& [id, m] : machines) out.push_back(m);
  return out;
}

void write_task_events(std::ostream& out, std::span<const TaskEvent> events) {
  for (const auto& e : events) out << format_task_event_row(e) << '\n';
}

void write_usage(std::ostream& out, std::span<const UsageSample> usage) {
  for (const auto& s : usage) out << format_usage_row(s) << '\n';
}

void write_machines(std::ostream& out, std::span<const Machine> machines) {
  for (const auto& m : machines) out << format_machine_row(m) << '\n';
}

bool event_order_less(const TaskEvent& a, const TaskEvent& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.key != b.key) return a.key < b.key;
  return kind_rank(a.kind) < kind_rank(b.kind);
}

void sort_events(std::vector<TaskEvent>& events) {
  std::stable_sort(events.begin(), events.end(), event_order_less);
}

void sort_usage(std::vector<UsageSample>& usage) {
  std::stable_sort(usage.begin(), usage.end(),
                   [](const UsageSample& a, const UsageSample& b) {
                     if (a.window_start != b.window_start) {
                       return a.window_start < b.window_start;
                     }
                     return a.key < b.key;
                   });
}

Capacity total_capacity(std::span<const Machine> machines) {
  Capacity c;
  for (const auto& m : machines) {
    c.cpu += m.cpu;
    c.mem += m.mem;
  }
  return c;
}

}  // namespace ctrace
