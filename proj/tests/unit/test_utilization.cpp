#include <doctest.h>

#include <cmath>
#include <map>

#include "ctrace/error.hpp"
#include "ctrace/synth.hpp"
#include "ctrace/utilization.hpp"

using namespace ctrace;

namespace {

constexpr Micros kSec = kMicrosPerSecond;

UsageSample sample(Micros start_s, Micros end_s, std::uint64_t job,
                   std::uint64_t machine, double cpu, double mem = 0) {
  return {start_s * kSec, end_s * kSec, {job, 0}, machine, cpu, mem};
}

TaskAttributeMap attrs_for(std::initializer_list<std::pair<std::uint64_t, int>> prios) {
  TaskAttributeMap m;
  for (auto [job, p] : prios) m[{job, 0}] = {p, 0.5, 0.5};
  return m;
}

double integral(std::span<const UsageSample> usage) {
  long double sum = 0;
  for (const auto& s : usage) {
    sum += static_cast<long double>(s.cpu_usage) * (s.window_end - s.window_start);
  }
  return static_cast<double>(sum);
}

}  // namespace

TEST_CASE("one task at 0.5 for one full period") {
  std::vector<UsageSample> u{sample(0, 300, 1, 1, 0.5)};
  auto s = util_series(u, {}, Resource::Cpu, 300, attrs_for({{1, 5}}));
  REQUIRE(s.points.size() == 1);
  CHECK(s.points[0].value == 0.5);
  CHECK(s.points[0].time == 0);
}

TEST_CASE("cluster scope adds tasks on different machines") {
  std::vector<UsageSample> u{sample(0, 300, 1, 1, 0.25), sample(0, 300, 2, 2, 0.125)};
  auto attrs = attrs_for({{1, 0}, {2, 10}});
  auto s = util_series(u, {}, Resource::Cpu, 300, attrs);
  CHECK(s.points[0].value == 0.375);
  auto m1 = util_series(u, {ScopeKind::Machine, std::nullopt, 1}, Resource::Cpu, 300, attrs);
  CHECK(m1.points[0].value == 0.25);
  auto prod = util_series(u, {ScopeKind::Tier, PriorityTier::Production, std::nullopt},
                          Resource::Cpu, 300, attrs);
  CHECK(prod.points[0].value == 0.125);
}

TEST_CASE("allocation mode sums requests over covered time") {
  std::vector<UsageSample> u{sample(0, 150, 1, 1, 0.1)};
  UtilOptions o;
  o.mode = UsageMode::Allocation;
  auto s = util_series(u, {}, Resource::Cpu, 300, attrs_for({{1, 5}}), o);
  CHECK(s.points[0].value == 0.25);
}

TEST_CASE("finer periods than the data are refused") {
  std::vector<UsageSample> u{sample(0, 300, 1, 1, 0.5)};
  CHECK_THROWS_AS(util_series(u, {}, Resource::Cpu, 30, {}), ResolutionError);
  CHECK_THROWS_AS(resample_usage(u, 30), ResolutionError);
  CHECK_THROWS_AS(resample(u, 30, Resource::Cpu), ResolutionError);
  CHECK(sampling_period_warning(5).has_value());
  CHECK_FALSE(sampling_period_warning(8).has_value());
}

TEST_CASE("per-second samples resampled to 60 s are plain means") {
  std::vector<UsageSample> u;
  std::vector<double> values;
  for (Micros s = 0; s < 180; ++s) {
    const double v = 0.01 * static_cast<double>((s * 37) % 101);
    values.push_back(v);
    u.push_back(sample(s, s + 1, 1, 1, v));
  }
  auto r = resample_usage(u, 60);
  REQUIRE(r.size() == 3);
  for (int k = 0; k < 3; ++k) {
    double sum = 0;
    for (int i = 0; i < 60; ++i) sum += values[60 * k + i];
    CHECK(r[k].cpu_usage == doctest::Approx(sum / 60).epsilon(1e-12));
    CHECK(r[k].window_start == static_cast<Micros>(60 * k) * kSec);
    CHECK(r[k].window_end == static_cast<Micros>(60 * (k + 1)) * kSec);
  }
  auto series = resample(u, 60, Resource::Cpu);
  REQUIRE(series.points.size() == 3);
  CHECK(series.points[1].value == doctest::Approx(r[1].cpu_usage).epsilon(1e-12));
}

TEST_CASE("resampling to the native period is the identity") {
  SynthConfig c;
  c.seed = 3;
  c.task_count = 200;
  c.duration_s = 20'000;
  auto t = generate_synthetic(c);
  auto r = resample_usage(t.bundle.usage, 300);
  REQUIRE(r.size() == t.bundle.usage.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(r[i].window_start == t.bundle.usage[i].window_start);
    CHECK(r[i].window_end == t.bundle.usage[i].window_end);
    CHECK(r[i].key == t.bundle.usage[i].key);
    CHECK(r[i].cpu_usage == doctest::Approx(t.bundle.usage[i].cpu_usage).epsilon(1e-15));
  }
}

TEST_CASE("coarser resampling preserves the usage integral") {
  SynthConfig c;
  c.seed = 4;
  c.task_count = 100;
  c.duration_s = 7200;
  c.usage_period_s = 10;
  c.exec_mixture = {{1, 20, 2000}};
  auto t = generate_synthetic(c);
  const double base = integral(t.bundle.usage);
  REQUIRE(base > 0);
  for (double p : {10.0, 60.0, 300.0, 3600.0}) {
    auto r = resample_usage(t.bundle.usage, p);
    CHECK(std::fabs(integral(r) - base) <= 1e-9 * base);
  }
}

TEST_CASE("tier series sum to the cluster series exactly") {
  SynthConfig c;
  c.seed = 5;
  c.task_count = 600;
  c.duration_s = 30'000;
  auto t = generate_synthetic(c);
  auto attrs = task_attributes(t.bundle.task_events);
  for (Resource r : {Resource::Cpu, Resource::Memory}) {
    auto ts = tier_series(t.bundle.usage, r, 300, attrs);
    REQUIRE(ts.cluster.points.size() > 10);
    for (std::size_t i = 0; i < ts.cluster.points.size(); ++i) {
      const double sum = ts.tiers[0].points[i].value + ts.tiers[1].points[i].value +
                         ts.tiers[2].points[i].value;
      CHECK(sum == ts.cluster.points[i].value);
      CHECK(ts.unknown.points[i].value == 0);
    }
  }
}

TEST_CASE("production share follows the generator target") {
  // Production usage set to 80% of the total in expectation.
  SynthConfig c;
  c.seed = 6;
  c.task_count = 20'000;
  c.duration_s = 86'400;
  c.exec_mixture = {{1, 8, 1800}};
  c.cpu_request_min = c.mem_request_min = 0.001;
  c.cpu_request_max = c.mem_request_max = 0.01;
  const double pf = c.production_fraction;
  c.production_request_scale = (0.8 / 0.2) * (1 - pf) / pf;
  auto t = generate_synthetic(c);
  auto attrs = task_attributes(t.bundle.task_events);
  auto ts = tier_series(t.bundle.usage, Resource::Cpu, 300, attrs);
  double prod = 0, total = 0;
  for (std::size_t i = 0; i < ts.cluster.points.size(); ++i) {
    prod += ts.tiers[2].points[i].value;
    total += ts.cluster.points[i].value;
  }
  CHECK(prod / total >= 0.78);
}

TEST_CASE("constant utilization has zero change") {
  std::vector<UsageSample> u;
  for (Micros k = 0; k < 10; ++k) u.push_back(sample(300 * k, 300 * (k + 1), 1, 1, 0.3));
  auto tracks = scope_tracks(u, ScopeKind::Machine, Resource::Cpu, 300);
  auto d = change_distribution(tracks, Resource::Cpu, 300);
  CHECK(d.samples.size() == 9);
  CHECK(d.quantile(0.9) == 0);
}

TEST_CASE("alternating 0.4 and 0.5") {
  std::vector<UsageSample> u;
  for (Micros k = 0; k < 10; ++k) {
    u.push_back(sample(300 * k, 300 * (k + 1), 1, 1, k % 2 == 0 ? 0.4 : 0.5));
  }
  auto tracks = scope_tracks(u, ScopeKind::Machine, Resource::Cpu, 300);
  auto d = change_distribution(tracks, Resource::Cpu, 300);
  REQUIRE(d.cdf.points.size() == 2);
  CHECK(d.cdf.points[0].x == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(d.cdf.points[1].x == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(d.cdf.points[1].f == 1.0);
  CHECK(d.quantile(1.0) == d.samples.back());

  ChangeOptions abs;
  abs.mode = ChangeMode::Absolute;
  auto da = change_distribution(tracks, Resource::Cpu, 300, abs);
  for (double s : da.samples) CHECK(s == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("idle machine periods count as zero change") {
  std::vector<UsageSample> u{sample(0, 300, 1, 1, 0.2), sample(1200, 1500, 2, 1, 0.2)};
  auto tracks = scope_tracks(u, ScopeKind::Machine, Resource::Cpu, 300);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].cells.size() == 5);
  auto d = change_distribution(tracks, Resource::Cpu, 300);
  // 0.2 -> 0, 0 -> 0, 0 -> 0, 0 -> 0.2 (relative to epsilon)
  CHECK(d.samples[0] == 0);
  CHECK(d.samples[1] == 0);
  CHECK(d.samples[2] == 1.0);
  CHECK(d.samples[3] == doctest::Approx(0.2 / 1e-6));
}

TEST_CASE("churn exclusion drops periods where tasks start or stop") {
  std::vector<UsageSample> u;
  for (Micros k = 0; k < 6; ++k) u.push_back(sample(300 * k, 300 * (k + 1), 1, 1, 0.2));
  u.push_back(sample(600, 750, 2, 1, 0.4));  // starts and stops inside period 2
  auto tracks = scope_tracks(u, ScopeKind::Machine, Resource::Cpu, 300);
  auto all = change_distribution(tracks, Resource::Cpu, 300);
  ChangeOptions o;
  o.exclude_churn = true;
  auto stable = change_distribution(tracks, Resource::Cpu, 300, o);
  CHECK(all.samples.size() == 5);
  CHECK(stable.samples.size() == 3);
  CHECK(stable.quantile(1.0) == 0);
}

TEST_CASE("too little data") {
  std::vector<UsageSample> u{sample(0, 300, 1, 1, 0.2)};
  auto tracks = scope_tracks(u, ScopeKind::Task, Resource::Cpu, 300);
  CHECK_THROWS_AS(change_distribution(tracks, Resource::Cpu, 300), InsufficientDataError);
  ChangeDistribution empty;
  CHECK_THROWS_AS(empty.quantile(0.5), InsufficientDataError);
}

TEST_CASE("generator changes bounded at 20% for 90% of periods") {
  SynthConfig c;
  c.seed = 8;
  c.task_count = 2000;
  c.volatility = 0.2 / 0.9;
  c.mean_reversion = 0;
  auto t = generate_synthetic(c);
  auto tracks = scope_tracks(t.bundle.usage, ScopeKind::Task, Resource::Cpu, 300);
  auto d = change_distribution(tracks, Resource::Cpu, 300);
  CHECK(d.quantile(0.9) <= 0.22);
  CHECK(d.quantile(0.9) >= 0.18);
  double prev = 0;
  for (double q = 0.05; q <= 1.0; q += 0.05) {
    CHECK(d.quantile(q) >= prev);
    prev = d.quantile(q);
  }
}
