#include "ctrace/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <thread>

#include "ctrace/error.hpp"

namespace ctrace {

namespace {

struct Partial {
  TraceAggregator aggregator;
  std::vector<TaskOutputs> tasks;
};

void process_shard(std::vector<TaskEvent>& events,
                   const AnalysisOptions& options, Partial& out) {
  sort_events(events);
  for (auto& life : build_lifecycles(events, options.lifecycle)) {
    auto spans = extract_spans(life, options.trace_end);
    out.aggregator.add(life, spans);
    if (options.keep_task_outputs) {
      out.tasks.push_back({life.key, std::move(spans), life.violations});
    }
  }
  events.clear();
  events.shrink_to_fit();
}

void process_group(std::vector<TaskEvent> events,
                   const AnalysisOptions& options, TraceAnalysis& result) {
  const unsigned workers = std::max(1u, options.workers);
  std::vector<std::vector<TaskEvent>> shards(workers);
  TaskKeyHash hash;
  for (auto& e : events) {
    shards[hash(e.key) % workers].push_back(std::move(e));
  }
  events.clear();

  std::vector<Partial> partials(workers);
  if (workers == 1) {
    process_shard(shards[0], options, partials[0]);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          process_shard(shards[w], options, partials[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (auto& p : partials) {
    result.aggregator.merge(p.aggregator);
    for (auto& t : p.tasks) result.tasks.push_back(std::move(t));
  }
}

void finish(TraceAnalysis& result) {
  std::sort(result.tasks.begin(), result.tasks.end(),
            [](const TaskOutputs& a, const TaskOutputs& b) {
              return a.key < b.key;
            });
}

std::filesystem::path make_spill_dir(const AnalysisOptions& options) {
  static std::atomic<unsigned> counter{0};
  std::filesystem::path dir = options.spill_dir;
  if (dir.empty()) {
    dir = std::filesystem::temp_directory_path() /
          ("ctrace-spill-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter++));
  }
  std::filesystem::create_directories(dir);
  return dir;
}

class Spill {
 public:
  Spill(std::filesystem::path dir, std::size_t partitions)
      : dir_(std::move(dir)) {
    partitions = std::max<std::size_t>(1, partitions);
    for (std::size_t i = 0; i < partitions; ++i) {
      paths_.push_back(dir_ / ("part-" + std::to_string(i) + ".csv"));
      files_.emplace_back(paths_.back(), std::ios::binary);
      if (!files_.back()) {
        throw InputError("cannot create spill file " + paths_.back().string());
      }
    }
  }

  void add(const TaskEvent& e) {
    files_[hash_(e.key) % files_.size()] << format_task_event_row(e) << '\n';
  }

  std::vector<std::filesystem::path> close() {
    for (auto& f : files_) f.close();
    return paths_;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> paths_;
  std::vector<std::ofstream> files_;
  TaskKeyHash hash_;
};

}  // namespace

TraceAnalysis analyze_events(std::vector<TaskEvent> events,
                             const AnalysisOptions& options) {
  TraceAnalysis result;
  result.events = events.size();
  for (const auto& e : events) result.max_time = std::max(result.max_time, e.time);
  process_group(std::move(events), options, result);
  finish(result);
  return result;
}

TraceAnalysis analyze_files(std::span<const std::filesystem::path> files,
                            const TaskEventColumns& columns,
                            const AnalysisOptions& options) {
  TraceAnalysis result;
  std::vector<TaskEvent> buffer;
  std::unique_ptr<Spill> spill;

  for (const auto& path : files) {
    auto reader = TaskEventReader::open(path, columns);
    while (auto e = reader.next()) {
      ++result.events;
      result.max_time = std::max(result.max_time, e->time);
      if (spill) {
        spill->add(*e);
        continue;
      }
      buffer.push_back(std::move(*e));
      if (buffer.size() > options.memory_budget_events) {
        spill = std::make_unique<Spill>(make_spill_dir(options),
                                        options.spill_partitions);
        for (const auto& b : buffer) spill->add(b);
        buffer.clear();
        buffer.shrink_to_fit();
        result.spilled = true;
      }
    }
    result.diagnostics.insert(result.diagnostics.end(),
                              reader.diagnostics().begin(),
                              reader.diagnostics().end());
  }

  if (!spill) {
    process_group(std::move(buffer), options, result);
  } else {
    const auto dir = spill->dir();
    for (const auto& part : spill->close()) {
      std::vector<Diagnostic> ignored;
      process_group(read_task_events(part, ignored), options, result);
      std::filesystem::remove(part);
    }
    if (options.spill_dir.empty()) std::filesystem::remove_all(dir);
  }
  finish(result);
  return result;
}

}  // namespace ctrace
