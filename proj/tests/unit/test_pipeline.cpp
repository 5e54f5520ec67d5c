#include <doctest.h>

#include <fstream>

#include "ctrace/pipeline.hpp"
#include "ctrace/synth.hpp"
#include "support/temp_dir.hpp"

using namespace ctrace;

namespace {

void check_same(const TraceAnalysis& a, const TraceAnalysis& b) {
  CHECK(a.events == b.events);
  CHECK(a.max_time == b.max_time);
  CHECK(a.aggregator.timeline().size() == b.aggregator.timeline().size());
  auto ca = event_cdfs(a.aggregator.timeline());
  auto cb = event_cdfs(b.aggregator.timeline());
  CHECK(ca == cb);
  CHECK(queue_series(a.aggregator.timeline()) == queue_series(b.aggregator.timeline()));
  CHECK(running_series(a.aggregator.timeline()) == running_series(b.aggregator.timeline()));
  CHECK(a.aggregator.execution_samples() == b.aggregator.execution_samples());
  CHECK(a.aggregator.scheduling_samples() == b.aggregator.scheduling_samples());
  CHECK(a.aggregator.distinct_tasks() == b.aggregator.distinct_tasks());
  REQUIRE(a.tasks.size() == b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    CHECK(a.tasks[i].key == b.tasks[i].key);
    CHECK(a.tasks[i].spans == b.tasks[i].spans);
    CHECK(a.tasks[i].violations == b.tasks[i].violations);
  }
}

}  // namespace

TEST_CASE("results do not depend on the worker count") {
  SynthConfig c;
  c.seed = 21;
  c.task_count = 3000;
  c.tasks_per_job = 5;
  c.emit_usage = false;
  auto t = generate_synthetic(c);
  AnalysisOptions o;
  o.keep_task_outputs = true;
  auto one = analyze_events(t.bundle.task_events, o);
  o.workers = 4;
  auto four = analyze_events(t.bundle.task_events, o);
  o.workers = 7;
  auto seven = analyze_events(t.bundle.task_events, o);
  check_same(one, four);
  check_same(one, seven);
}

TEST_CASE("spilling to partitions gives the in-memory result") {
  SynthConfig c;
  c.seed = 22;
  c.task_count = 2000;
  c.emit_usage = false;
  auto t = generate_synthetic(c);
  test::TempDir dir;
  {
    std::ofstream out(dir.path() / "a.csv");
    write_task_events(out, std::span(t.bundle.task_events).first(3000));
    std::ofstream out2(dir.path() / "b.csv");
    write_task_events(out2, std::span(t.bundle.task_events).subspan(3000));
    out2 << "not,a,row\n";
  }
  std::vector<std::filesystem::path> files{dir.path() / "a.csv", dir.path() / "b.csv"};
  AnalysisOptions o;
  o.keep_task_outputs = true;
  auto mem = analyze_files(files, {}, o);
  CHECK_FALSE(mem.spilled);
  CHECK(mem.diagnostics.size() == 1);
  o.memory_budget_events = 500;
  o.spill_partitions = 8;
  o.spill_dir = dir.path() / "spill";
  o.workers = 2;
  auto spilled = analyze_files(files, {}, o);
  CHECK(spilled.spilled);
  CHECK(spilled.diagnostics.size() == 1);
  check_same(mem, spilled);
  CHECK(mem.events == t.bundle.task_events.size());
}
