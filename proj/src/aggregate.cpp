#include "ctrace/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctrace/error.hpp"

namespace ctrace {

double Cdf::at(double x) const {
  auto it = std::upper_bound(
      points.begin(), points.end(), x,
      [](double v, const CdfPoint& p) { return v < p.x; });
  if (it == points.begin()) return 0.0;
  return std::prev(it)->f;
}

double Series::at(Micros t) const {
  auto it = std::upper_bound(
      points.begin(), points.end(), t,
      [](Micros v, const SeriesPoint& p) { return v < p.time; });
  if (it == points.begin()) return 0.0;
  return std::prev(it)->value;
}

std::int64_t TimestampCounts::queue_change() const {
  std::int64_t out = static_cast<std::int64_t>(submits) -
                     static_cast<std::int64_t>(schedules);
  for (TerminalClass c : kAllTerminalClasses) {
    if (is_pending_class(c)) out -= static_cast<std::int64_t>(terminal(c));
  }
  return out;
}

std::int64_t TimestampCounts::running_change() const {
  std::int64_t out = static_cast<std::int64_t>(schedules);
  for (TerminalClass c : kAllTerminalClasses) {
    if (!is_pending_class(c)) out -= static_cast<std::int64_t>(terminal(c));
  }
  return out;
}

TimestampCounts& TimestampCounts::operator+=(const TimestampCounts& o) {
  new_submits += o.new_submits;
  submits += o.submits;
  schedules += o.schedules;
  for (std::size_t i = 0; i < terminals.size(); ++i) {
    terminals[i] += o.terminals[i];
  }
  return *this;
}

void TraceAggregator::add(const Lifecycle& life,
                          std::span<const ScheduleSpan> spans) {
  ++distinct_tasks_;
  bool first_submit = true;
  bool completed = false;
  for (std::size_t c = 0; c < life.collapsed.size(); ++c) {
    const TaskEvent& e = life.collapsed_event(c);
    if (e.kind == EventKind::Submit) {
      TimestampCounts& counts = timeline_[e.time];
      ++counts.submits;
      if (first_submit) {
        ++counts.new_submits;
        first_submit = false;
      }
    } else if (e.kind == EventKind::Schedule) {
      ++timeline_[e.time].schedules;
    } else if (auto cls = life.terminals[c]) {
      ++timeline_[e.time].terminals[static_cast<std::size_t>(*cls)];
      completed = completed || *cls == TerminalClass::Finish;
    }
  }
  if (completed) ++completed_tasks_;
  violations_ += life.violations.size();
  if (!life.violations.empty()) ++violating_tasks_;
  if (life.seeded) ++seeded_tasks_;
  for (const auto& e : life.events) {
    if (e.missing_info) ++flagged_events_;
  }
  for (const auto& s : spans) {
    if (auto sched = s.scheduling_time()) {
      scheduling_.push_back({*s.schedule_time, to_seconds(*sched)});
    }
    if (auto exec = s.execution_time()) {
      execution_.push_back({*s.end_time, to_seconds(*exec)});
    }
    spans_.push_back(s);
  }
}

void TraceAggregator::merge(const TraceAggregator& other) {
  for (const auto& [t, counts] : other.timeline_) timeline_[t] += counts;
  execution_.insert(execution_.end(), other.execution_.begin(),
                    other.execution_.end());
  scheduling_.insert(scheduling_.end(), other.scheduling_.begin(),
                     other.scheduling_.end());
  spans_.insert(spans_.end(), other.spans_.begin(), other.spans_.end());
  distinct_tasks_ += other.distinct_tasks_;
  completed_tasks_ += other.completed_tasks_;
  violations_ += other.violations_;
  violating_tasks_ += other.violating_tasks_;
  seeded_tasks_ += other.seeded_tasks_;
  flagged_events_ += other.flagged_events_;
}

std::vector<DurationSample> TraceAggregator::execution_samples() const {
  auto out = execution_;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DurationSample> TraceAggregator::scheduling_samples() const {
  auto out = scheduling_;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ScheduleSpan> TraceAggregator::spans() const { return spans_; }

Timeline tally(std::span<const Lifecycle> lifecycles) {
  TraceAggregator agg;
  for (const auto& life : lifecycles) agg.add(life, {});
  return agg.timeline();
}

namespace {

Cdf cumulative(const Timeline& timeline,
               std::uint64_t (*count)(const TimestampCounts&),
               std::uint64_t& total) {
  total = 0;
  for (const auto& [t, c] : timeline) total += count(c);
  Cdf cdf;
  if (total == 0) return cdf;
  std::uint64_t running = 0;
  for (const auto& [t, c] : timeline) {
    std::uint64_t n = count(c);
    if (n == 0) continue;
    running += n;
    cdf.points.push_back({static_cast<double>(t),
                          static_cast<double>(running) /
                              static_cast<double>(total)});
  }
  return cdf;
}

Cdf scaled(const Cdf& cdf, double weight) {
  Cdf out = cdf;
  for (auto& p : out.points) p.f *= weight;
  return out;
}

Series prefix_sum(const Timeline& timeline, const SeriesOptions& options,
                  std::int64_t (TimestampCounts::*change)() const) {
  Series s;
  std::int64_t level = 0;
  for (const auto& [t, c] : timeline) {
    std::int64_t d = (c.*change)();
    if (d == 0) continue;
    level += d;
    if (level < 0) s.negative = true;
    s.points.push_back({t, static_cast<double>(level)});
  }
  if (options.start &&
      (s.points.empty() || *options.start < s.points.front().time)) {
    s.points.insert(s.points.begin(), {*options.start, 0.0});
  }
  if (options.end && (s.points.empty() || *options.end > s.points.back().time)) {
    s.points.push_back({*options.end, static_cast<double>(level)});
  }
  return s;
}

}  // namespace

EventCdfs event_cdfs(const Timeline& timeline) {
  EventCdfs out;
  out.new_submissions = cumulative(
      timeline, [](const TimestampCounts& c) { return c.new_submits; },
      out.totals.new_submissions);
  out.completions = cumulative(
      timeline,
      [](const TimestampCounts& c) { return c.terminal(TerminalClass::Finish); },
      out.totals.completions);
  out.submissions = cumulative(
      timeline, [](const TimestampCounts& c) { return c.submits; },
      out.totals.submissions);
  out.schedules = cumulative(
      timeline, [](const TimestampCounts& c) { return c.schedules; },
      out.totals.schedules);
  return out;
}

WeightedCdfs weighted_cdfs(const EventCdfs& cdfs) {
  const auto& t = cdfs.totals;
  if (t.new_submissions == 0) {
    throw UndefinedWeightError("no new submissions; CDF weights undefined");
  }
  const double base = static_cast<double>(t.new_submissions);
  WeightedCdfs out;
  out.new_submissions = cdfs.new_submissions;
  out.completion_weight = static_cast<double>(t.completions) / base;
  out.submission_weight = static_cast<double>(t.submissions) / base;
  out.schedule_weight = static_cast<double>(t.schedules) / base;
  out.completions = scaled(cdfs.completions, out.completion_weight);
  out.submissions = scaled(cdfs.submissions, out.submission_weight);
  out.schedules = scaled(cdfs.schedules, out.schedule_weight);
  return out;
}

Series queue_series(const Timeline& timeline, const SeriesOptions& options) {
  return prefix_sum(timeline, options, &TimestampCounts::queue_change);
}

Series running_series(const Timeline& timeline,
                      const SeriesOptions& options) {
  return prefix_sum(timeline, options, &TimestampCounts::running_change);
}

Series moving_average(std::span<const DurationSample> sorted,
                      std::int64_t window) {
  if (window <= 0) throw ConfigError("moving-average window must be positive");
  const auto w = static_cast<Micros>(window);
  std::vector<long double> prefix(sorted.size() + 1, 0.0L);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    prefix[i + 1] = prefix[i] + sorted[i].duration;
  }
  Series out;
  std::size_t lo = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const Micros t = sorted[i].time;
    std::size_t hi = i;
    while (hi < sorted.size() && sorted[hi].time == t) ++hi;
    while (sorted[lo].time + w <= t) ++lo;
    const long double sum = prefix[hi] - prefix[lo];
    out.points.push_back(
        {t, static_cast<double>(sum / static_cast<long double>(hi - lo))});
    i = hi;
  }
  return out;
}

Cdf exec_time_cdf(std::span<const ScheduleSpan> spans, bool finished_only) {
  std::vector<Micros> durations;
  for (const auto& s : spans) {
    if (finished_only && s.terminal != TerminalClass::Finish) continue;
    if (auto d = s.execution_time()) durations.push_back(*d);
  }
  std::sort(durations.begin(), durations.end());
  Cdf cdf;
  const double n = static_cast<double>(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (i + 1 < durations.size() && durations[i + 1] == durations[i]) continue;
    cdf.points.push_back({to_seconds(durations[i]),
                          static_cast<double>(i + 1) / n});
  }
  return cdf;
}

Series densify(const Series& series, Micros step) {
  if (series.points.empty() || step == 0) return series;
  Series out;
  out.negative = series.negative;
  const Micros first = series.points.front().time;
  const Micros last = series.points.back().time;
  for (Micros t = first;; t += step) {
    if (t >= last) {
      out.points.push_back({last, series.points.back().value});
      break;
    }
    out.points.push_back({t, series.at(t)});
  }
  return out;
}

double linear_fit_r2(const Cdf& cdf) {
  const std::size_t n = cdf.points.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  long double mx = 0, my = 0;
  for (const auto& p : cdf.points) {
    mx += p.x;
    my += p.f;
  }
  mx /= n;
  my /= n;
  long double sxx = 0, syy = 0, sxy = 0;
  for (const auto& p : cdf.points) {
    long double dx = p.x - mx;
    long double dy = p.f - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(sxy * sxy / (sxx * syy));
}

namespace {

std::vector<double> union_x(const Cdf& a, const Cdf& b) {
  std::vector<double> xs;
  xs.reserve(a.points.size() + b.points.size());
  for (const auto& p : a.points) xs.push_back(p.x);
  for (const auto& p : b.points) xs.push_back(p.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

}  // namespace

double max_gap(const Cdf& a, const Cdf& b) {
  double gap = 0;
  for (double x : union_x(a, b)) gap = std::max(gap, std::abs(a.at(x) - b.at(x)));
  return gap;
}

double terminal_slope_per_hour(const Series& series, double tail_fraction) {
  if (series.points.size() < 2) return 0.0;
  const double t0 = static_cast<double>(series.points.front().time);
  const double t1 = static_cast<double>(series.points.back().time);
  const double from = t1 - std::clamp(tail_fraction, 0.0, 1.0) * (t1 - t0);
  if (t1 <= from) return 0.0;
  constexpr int kGrid = 256;
  long double mx = 0, my = 0;
  std::vector<std::pair<double, double>> pts;
  pts.reserve(kGrid + 1);
  for (int i = 0; i <= kGrid; ++i) {
    double t = from + (t1 - from) * i / kGrid;
    double hours = t / 3.6e9;
    double v = series.at(static_cast<Micros>(t));
    pts.emplace_back(hours, v);
    mx += hours;
    my += v;
  }
  mx /= pts.size();
  my /= pts.size();
  long double sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  return sxx == 0 ? 0.0 : static_cast<double>(sxy / sxx);
}

double variance(const Series& series) {
  if (series.points.empty()) return 0.0;
  long double mean = 0;
  for (const auto& p : series.points) mean += p.value;
  mean /= series.points.size();
  long double acc = 0;
  for (const auto& p : series.points) acc += (p.value - mean) * (p.value - mean);
  return static_cast<double>(acc / series.points.size());
}

std::vector<Lump> detect_lumps(const Cdf& submissions,
                               const Cdf& new_submissions, double threshold) {
  const auto xs = union_x(submissions, new_submissions);
  std::vector<double> excess(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    excess[i] = submissions.at(xs[i]) - new_submissions.at(xs[i]);
  }
  std::vector<Lump> lumps;
  std::size_t search_from = 0;  // rising edges start after the previous lump
  std::size_t i = 0;
  while (i < xs.size()) {
    if (excess[i] <= threshold) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    std::size_t peak = i;
    while (i < xs.size() && excess[i] > threshold) {
      if (excess[i] > excess[peak]) peak = i;
      ++i;
    }
    std::size_t last = i - 1;
    std::size_t trough = search_from;
    for (std::size_t k = search_from; k <= peak; ++k) {
      if (excess[k] < excess[trough]) trough = k;
    }
    const double half = 0.5 * (excess[trough] + excess[peak]);
    std::size_t rise = trough;
    while (rise < peak && excess[rise] < half) ++rise;
    lumps.push_back({xs[begin], xs[last], xs[rise], xs[peak], excess[peak]});
    search_from = i < xs.size() ? i : last;
  }
  return lumps;
}

namespace {

nlohmann::json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

nlohmann::json observation_report(const ObservationInputs& in,
                                  const ReportOptions& options) {
  using nlohmann::json;
  const EventCdfs& cdfs = *in.cdfs;
  const TraceAggregator& agg = *in.aggregator;
  json report;

  report["meta"] = {
      {"moving_average_window_s",
       static_cast<double>(options.window) / 1e6},
      {"lump_threshold", options.lump_threshold},
      {"slope_tail_fraction", options.tail_fraction},
      {"totals",
       {{"new_submissions", cdfs.totals.new_submissions},
        {"completions", cdfs.totals.completions},
        {"submissions", cdfs.totals.submissions},
        {"schedules", cdfs.totals.schedules}}},
      {"distinct_tasks", agg.distinct_tasks()},
      {"violations", agg.violation_count()},
      {"tasks_with_violations", agg.tasks_with_violations()},
      {"snapshot_seeded_tasks", agg.seeded_tasks()},
  };

  report["new_submission_rate"] = {
      {"statistic", "linear-fit R^2 of the new-submission CDF"},
      {"r2", number_or_null(linear_fit_r2(cdfs.new_submissions))},
  };
  report["completion_rate"] = {
      {"statistic", "linear-fit R^2 of the completion CDF"},
      {"r2", number_or_null(linear_fit_r2(cdfs.completions))},
      {"max_gap_to_new_submissions",
       max_gap(cdfs.completions, cdfs.new_submissions)},
  };

  json lumps = json::array();
  for (const auto& l : detect_lumps(cdfs.submissions, cdfs.new_submissions,
                                    options.lump_threshold)) {
    lumps.push_back({{"start", l.start},
                     {"end", l.end},
                     {"location", l.location},
                     {"peak_time", l.peak_time},
                     {"peak_excess", l.peak_excess}});
  }
  report["resubmission_lumps"] = {
      {"statistic", "regions where the submission CDF exceeds the "
                    "new-submission CDF"},
      {"lump_count", lumps.size()},
      {"lumps", lumps},
  };
  report["scheduling_lag"] = {
      {"statistic", "max vertical gap between submission and scheduling CDFs"},
      {"max_gap", max_gap(cdfs.submissions, cdfs.schedules)},
  };

  const auto& t = cdfs.totals;
  json event_totals = {
      {"statistic", "event totals relative to new submissions"},
      {"unfinished_tasks", agg.distinct_tasks() - agg.completed_tasks()},
  };
  json weighted_gap = {
      {"statistic", "gap between weighted submission and scheduling CDFs"},
  };
  if (in.weighted != nullptr) {
    const auto& w = *in.weighted;
    event_totals["completion_weight"] = w.completion_weight;
    event_totals["submission_weight"] = w.submission_weight;
    weighted_gap["max_gap"] = max_gap(w.submissions, w.schedules);
    weighted_gap["final_gap"] = w.submission_weight - w.schedule_weight;
  } else {
    event_totals["completion_weight"] = nullptr;
    event_totals["submission_weight"] = nullptr;
    weighted_gap["max_gap"] = nullptr;
    weighted_gap["final_gap"] = nullptr;
  }
  event_totals["final_queue"] = in.queue->points.empty() ? 0.0 : in.queue->points.back().value;
  event_totals["final_running"] =
      in.running->points.empty() ? 0.0 : in.running->points.back().value;
  event_totals["queue_slope_per_hour"] =
      terminal_slope_per_hour(*in.queue, options.tail_fraction);
  event_totals["running_slope_per_hour"] =
      terminal_slope_per_hour(*in.running, options.tail_fraction);
  report["event_totals"] = event_totals;
  report["weighted_gap"] = weighted_gap;

  auto max_value = [](const Series& s) {
    double m = 0;
    for (const auto& p : s.points) m = std::max(m, p.value);
    return m;
  };
  report["queue_trend"] = {
      {"statistic", "terminal slope of the queue-length series"},
      {"slope_per_hour", terminal_slope_per_hour(*in.queue, options.tail_fraction)},
      {"final", in.queue->points.empty() ? 0.0 : in.queue->points.back().value},
      {"max", max_value(*in.queue)},
      {"negative", in.queue->negative},
  };
  report["running_trend"] = {
      {"statistic", "terminal slope of the running-count series"},
      {"slope_per_hour",
       terminal_slope_per_hour(*in.running, options.tail_fraction)},
      {"final",
       in.running->points.empty() ? 0.0 : in.running->points.back().value},
      {"max", max_value(*in.running)},
      {"negative", in.running->negative},
  };
  report["duration_stability"] = {
      {"statistic", "variance of execution and scheduling moving averages"},
      {"execution_variance_s2", variance(*in.exec_average)},
      {"scheduling_variance_s2", variance(*in.sched_average)},
      {"execution_points", in.exec_average->points.size()},
      {"scheduling_points", in.sched_average->points.size()},
  };

  std::vector<Micros> finished;
  for (const auto& span : agg.spans()) {
    if (span.terminal != TerminalClass::Finish) continue;
    if (auto d = span.execution_time()) finished.push_back(*d);
  }
  std::sort(finished.begin(), finished.end());
  json execution_times = {
      {"statistic", "execution-time extrema of finished spans"},
      {"completed_tasks", agg.completed_tasks()},
      {"distinct_tasks", agg.distinct_tasks()},
      {"first_submit_count", t.new_submissions},
      {"finished_spans", finished.size()},
      {"empty", finished.empty()},
  };
  if (!finished.empty()) {
    auto below = [&](double seconds) {
      auto limit = static_cast<Micros>(std::llround(seconds * 1e6));
      return static_cast<std::uint64_t>(
          std::lower_bound(finished.begin(), finished.end(), limit) -
          finished.begin());
    };
    const double n = static_cast<double>(finished.size());
    execution_times["min_execution_s"] = to_seconds(finished.front());
    execution_times["max_execution_s"] = to_seconds(finished.back());
    execution_times["sub_second_finished"] = below(1.0);
    if (finished.size() >= 3) {
      execution_times["third_shortest_s"] = to_seconds(finished[2]);
    }
    execution_times["fraction_under_5_min"] = static_cast<double>(below(300.0)) / n;
    execution_times["fraction_under_30_min"] = static_cast<double>(below(1800.0)) / n;
  }
  report["execution_times"] = execution_times;
  return report;
}

}  // namespace ctrace
