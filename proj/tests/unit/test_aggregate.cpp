#include <doctest.h>

#include <cmath>
#include <random>

#include "ctrace/aggregate.hpp"
#include "ctrace/error.hpp"
#include "ctrace/lifecycle.hpp"
#include "ctrace/synth.hpp"
#include "support/oracles.hpp"

using namespace ctrace;
using K = EventKind;

namespace {

std::vector<TaskEvent> seq(std::initializer_list<std::tuple<Micros, std::uint64_t, K>> items) {
  std::vector<TaskEvent> out;
  for (auto [t, job, k] : items) {
    TaskEvent e;
    e.time = t;
    e.key = {job, 0};
    e.kind = k;
    out.push_back(e);
  }
  sort_events(out);
  return out;
}

TraceAggregator aggregate(const std::vector<TaskEvent>& events, Micros end = 1'000'000) {
  TraceAggregator agg;
  for (const auto& life : build_lifecycles(events)) agg.add(life, extract_spans(life, end));
  return agg;
}

std::vector<std::pair<Micros, double>> values(const Series& s) {
  std::vector<std::pair<Micros, double>> out;
  for (const auto& p : s.points) out.emplace_back(p.time, p.value);
  return out;
}

std::vector<std::pair<double, double>> values(const Cdf& c) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : c.points) out.emplace_back(p.x, p.f);
  return out;
}

}  // namespace

TEST_CASE("single task gives single-step CDFs") {
  auto agg = aggregate(seq({{1, 1, K::Submit}, {2, 1, K::Schedule}, {3, 1, K::Finish}}));
  auto c = event_cdfs(agg.timeline());
  for (const Cdf* cdf : {&c.new_submissions, &c.completions, &c.submissions, &c.schedules}) {
    REQUIRE(cdf->points.size() == 1);
    CHECK(cdf->points[0].f == 1.0);
  }
  CHECK(c.totals == EventTotals{1, 1, 1, 1});
}

TEST_CASE("queue recurrence examples") {
  auto agg = aggregate(seq({{1, 1, K::Submit}, {2, 2, K::Submit}, {3, 1, K::Schedule}}));
  CHECK(values(queue_series(agg.timeline())) ==
        std::vector<std::pair<Micros, double>>{{1, 1}, {2, 2}, {3, 1}});

  auto kill = aggregate(seq({{1, 1, K::Submit}, {2, 1, K::Kill}}));
  CHECK(values(queue_series(kill.timeline())) ==
        std::vector<std::pair<Micros, double>>{{1, 1}, {2, 0}});
}

TEST_CASE("running recurrence examples") {
  auto fin = aggregate(seq({{1, 1, K::Submit}, {2, 1, K::Schedule}, {5, 1, K::Finish}}));
  auto r = running_series(fin.timeline());
  CHECK(r.at(1) == 0);
  CHECK(r.at(2) == 1);
  CHECK(r.at(4) == 1);
  CHECK(r.at(5) == 0);
  CHECK(r.at(100) == 0);

  auto ev = aggregate(seq({{1, 1, K::Submit}, {2, 1, K::Schedule}, {4, 1, K::Evict}}));
  auto e = running_series(ev.timeline());
  CHECK(e.at(3) == 1);
  CHECK(e.at(4) == 0);
}

TEST_CASE("series endpoints are optional") {
  auto agg = aggregate(seq({{5, 1, K::Submit}}));
  auto s = queue_series(agg.timeline(), {Micros{0}, Micros{10}});
  CHECK(values(s) == std::vector<std::pair<Micros, double>>{{0, 0}, {5, 1}, {10, 1}});
}

TEST_CASE("CDFs and series equal a brute-force recount on a synthetic trace") {
  SynthConfig c;
  c.seed = 5;
  c.task_count = 500;
  c.emit_usage = false;
  c.bursts = {{40'000, 2000, 20}};
  auto t = generate_synthetic(c);
  auto agg = aggregate(t.bundle.task_events, t.bundle.trace_end);
  auto cdfs = event_cdfs(agg.timeline());
  auto o = oracle::recount(t.bundle.task_events);
  CHECK(o.illegal == 0);
  CHECK(values(cdfs.new_submissions) == oracle::cdf_points(o.new_submits, o.total_new));
  CHECK(values(cdfs.submissions) == oracle::cdf_points(o.submits, o.total_submits));
  CHECK(values(cdfs.schedules) == oracle::cdf_points(o.schedules, o.total_schedules));
  CHECK(values(cdfs.completions) == oracle::cdf_points(o.finishes, o.total_finishes));
  CHECK(values(queue_series(agg.timeline())) == oracle::level_points(o.pending));
  CHECK(values(running_series(agg.timeline())) == oracle::level_points(o.running));
}

TEST_CASE("weighted CDFs") {
  auto agg = aggregate(seq({{1, 1, K::Submit}, {2, 1, K::Schedule}, {3, 1, K::Evict},
                            {4, 1, K::Submit}, {5, 1, K::Schedule}, {6, 1, K::Finish},
                            {1, 2, K::Submit}, {2, 2, K::Schedule}}));
  auto c = event_cdfs(agg.timeline());
  CHECK(c.totals == EventTotals{2, 1, 3, 3});
  auto w = weighted_cdfs(c);
  CHECK(w.submissions.points.back().f == 1.5);
  CHECK(w.schedules.points.back().f == 1.5);
  CHECK(w.completions.points.back().f == 0.5);
  CHECK(w.new_submissions == c.new_submissions);

  auto same = aggregate(seq({{1, 1, K::Submit}, {2, 1, K::Schedule}}));
  CHECK(weighted_cdfs(event_cdfs(same.timeline())).schedules.points.back().f == 1.0);

  EventCdfs empty;
  CHECK_THROWS_AS(weighted_cdfs(empty), UndefinedWeightError);
}

TEST_CASE("weights from large event totals") {
  EventCdfs c;
  c.totals = {25'424'731, 18'217'975, 48'375'166, 47'331'507};
  c.new_submissions.points = {{0, 1.0}};
  c.completions.points = {{0, 1.0}};
  c.submissions.points = {{0, 1.0}};
  c.schedules.points = {{0, 1.0}};
  auto w = weighted_cdfs(c);
  CHECK(w.completion_weight == doctest::Approx(0.7165).epsilon(1e-4));
  CHECK(w.completions.points.back().f == 18'217'975.0 / 25'424'731.0);
}

TEST_CASE("moving average") {
  std::vector<DurationSample> constant;
  for (Micros t = 0; t < 50; t += 3) constant.push_back({t, 7.5});
  for (const auto& p : moving_average(constant, 10).points) CHECK(p.value == 7.5);

  std::vector<DurationSample> two{{10, 2}, {20, 4}};
  auto m = moving_average(two, 15);
  CHECK(m.at(20) == 3);
  CHECK_THROWS_AS(moving_average(two, 0), ConfigError);

  std::mt19937_64 rng(2);
  std::vector<DurationSample> random;
  std::vector<std::pair<Micros, double>> raw;
  for (int i = 0; i < 400; ++i) {
    DurationSample s{rng() % 2000, static_cast<double>(rng() % 1000) / 7.0};
    random.push_back(s);
    raw.emplace_back(s.time, s.duration);
  }
  std::sort(random.begin(), random.end());
  auto got = moving_average(random, 150);
  auto want = oracle::windowed_mean(raw, 150);
  REQUIRE(got.points.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(got.points[i].time == want[i].first);
    CHECK(got.points[i].value == doctest::Approx(want[i].second).epsilon(1e-12));
  }
}

TEST_CASE("execution-time CDF") {
  std::vector<ScheduleSpan> one{{0, Micros{1'000'000}, Micros{3'000'000}, TerminalClass::Finish, false}};
  auto c = exec_time_cdf(one, false);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].x == 2.0);
  CHECK(c.points[0].f == 1.0);

  std::vector<ScheduleSpan> killed{{0, Micros{1}, Micros{3}, TerminalClass::RKill, false}};
  CHECK(exec_time_cdf(killed, true).empty());
  CHECK_FALSE(exec_time_cdf(killed, false).empty());
}

TEST_CASE("execution-time CDF at 30 minutes on the default mixture") {
  SynthConfig c;
  c.seed = 9;
  c.task_count = 20'000;
  c.duration_s = 40 * 86'400.0;
  c.p_finish = 1.0;
  c.emit_usage = false;
  auto t = generate_synthetic(c);
  auto agg = aggregate(t.bundle.task_events, t.bundle.trace_end);
  auto cdf = exec_time_cdf(agg.spans(), true);
  const double f = cdf.at(1800.0);
  CHECK(f >= 0.78);
  CHECK(f <= 0.82);
}

TEST_CASE("statistics helpers") {
  Cdf line;
  for (int i = 1; i <= 100; ++i) line.points.push_back({static_cast<double>(i), i / 100.0});
  CHECK(linear_fit_r2(line) == doctest::Approx(1.0));
  CHECK(std::isnan(linear_fit_r2(Cdf{{{1, 1}}})));
  Cdf shifted = line;
  for (auto& p : shifted.points) p.f = std::min(1.0, p.f + 0.1);
  CHECK(max_gap(line, shifted) == doctest::Approx(0.1));

  Series ramp;
  for (Micros h = 0; h <= 10; ++h) ramp.points.push_back({h * 3'600'000'000ull, 2.0 * h});
  CHECK(terminal_slope_per_hour(ramp, 0.5) == doctest::Approx(2.0).epsilon(0.05));
  Series flat{{{0, 3}, {10, 3}}};
  CHECK(variance(flat) == 0);
}

TEST_CASE("lumps: none without resubmissions, two with two bursts") {
  SynthConfig c;
  c.seed = 4;
  c.task_count = 5000;
  c.p_pending_exit = 0;
  c.p_finish = 1;
  c.emit_usage = false;
  auto plain = generate_synthetic(c);
  auto pa = aggregate(plain.bundle.task_events, plain.bundle.trace_end);
  auto pc = event_cdfs(pa.timeline());
  CHECK(pc.submissions == pc.new_submissions);
  CHECK(detect_lumps(pc.submissions, pc.new_submissions, 0.02).empty());

  c.bursts = {{25'000, 1500, 400}, {60'000, 1500, 400}};
  auto burst = generate_synthetic(c);
  auto ba = aggregate(burst.bundle.task_events, burst.bundle.trace_end);
  auto bc = event_cdfs(ba.timeline());
  auto lumps = detect_lumps(bc.submissions, bc.new_submissions, 0.02);
  REQUIRE(lumps.size() == 2);
  CHECK(std::fabs(lumps[0].location / 1e6 - 25'000) <= 1500);
  CHECK(std::fabs(lumps[1].location / 1e6 - 60'000) <= 1500);
}

TEST_CASE("observation report layout") {
  SynthConfig c;
  c.seed = 12;
  c.task_count = 2000;
  c.emit_usage = false;
  auto t = generate_synthetic(c);
  auto agg = aggregate(t.bundle.task_events, t.bundle.trace_end);
  auto cdfs = event_cdfs(agg.timeline());
  auto w = weighted_cdfs(cdfs);
  auto q = queue_series(agg.timeline());
  auto r = running_series(agg.timeline());
  auto ea = moving_average(agg.execution_samples(), 3'600'000'000);
  auto sa = moving_average(agg.scheduling_samples(), 3'600'000'000);
  ObservationInputs in{&cdfs, &w, &q, &r, &ea, &sa, &agg};
  auto j = observation_report(in, {});
  for (const char* key : {"meta", "new_submission_rate", "completion_rate", "resubmission_lumps",
                          "scheduling_lag", "event_totals", "weighted_gap", "queue_trend",
                          "running_trend", "duration_stability", "execution_times"}) {
    CHECK(j.contains(key));
  }
  CHECK(j.size() == 11);
  CHECK(j["new_submission_rate"]["r2"].get<double>() >= 0.999);
  CHECK(j["execution_times"]["distinct_tasks"] == 2000);
  CHECK(j["execution_times"]["first_submit_count"] == 2000);
  CHECK(j["execution_times"]["finished_spans"] == t.truth.finish_count);
  CHECK(j["resubmission_lumps"]["lump_count"] == 0);
}
