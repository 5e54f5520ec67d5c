#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrace/lifecycle.hpp"
#include "ctrace/model.hpp"

namespace ctrace {

struct CdfPoint {
  double x = 0;
  double f = 0;

  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

struct Cdf {
  std::vector<CdfPoint> points;

  bool empty() const { return points.empty(); }
  // Step evaluation: fraction at the last point with x <= at, 0 before.
  double at(double x) const;

  friend bool operator==(const Cdf&, const Cdf&) = default;
};

struct SeriesPoint {
  Micros time = 0;
  double value = 0;

  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

struct Series {
  std::vector<SeriesPoint> points;
  bool negative = false;  // some value dipped below zero (malformed trace)

  // Step evaluation; 0 before the first point.
  double at(Micros t) const;

  friend bool operator==(const Series&, const Series&) = default;
};

// Event counts landing on one timestamp.
struct TimestampCounts {
  std::uint64_t new_submits = 0;
  std::uint64_t submits = 0;
  std::uint64_t schedules = 0;
  std::array<std::uint64_t, 9> terminals{};  // indexed by TerminalClass

  std::uint64_t terminal(TerminalClass c) const {
    return terminals[static_cast<std::size_t>(c)];
  }
  std::int64_t queue_change() const;
  std::int64_t running_change() const;

  TimestampCounts& operator+=(const TimestampCounts& o);
};

using Timeline = std::map<Micros, TimestampCounts>;

struct DurationSample {
  Micros time = 0;      // when the duration became known
  double duration = 0;  // seconds

  friend auto operator<=>(const DurationSample&, const DurationSample&) = default;
};

// Order-independent accumulation of per-task contributions; merging
// partial aggregators in any grouping gives the same result.
class TraceAggregator {
 public:
  void add(const Lifecycle& life, std::span<const ScheduleSpan> spans);
  void merge(const TraceAggregator& other);

  const Timeline& timeline() const { return timeline_; }
  std::uint64_t distinct_tasks() const { return distinct_tasks_; }
  std::uint64_t completed_tasks() const { return completed_tasks_; }
  std::uint64_t violation_count() const { return violations_; }
  std::uint64_t tasks_with_violations() const { return violating_tasks_; }
  std::uint64_t seeded_tasks() const { return seeded_tasks_; }
  std::uint64_t snapshot_flagged_events() const { return flagged_events_; }

  // Sorted copies of the duration samples.
  std::vector<DurationSample> execution_samples() const;
  std::vector<DurationSample> scheduling_samples() const;
  std::vector<ScheduleSpan> spans() const;

 private:
  Timeline timeline_;
  std::vector<DurationSample> execution_;
  std::vector<DurationSample> scheduling_;
  std::vector<ScheduleSpan> spans_;
  std::uint64_t distinct_tasks_ = 0;
  std::uint64_t completed_tasks_ = 0;
  std::uint64_t violations_ = 0;
  std::uint64_t violating_tasks_ = 0;
  std::uint64_t seeded_tasks_ = 0;
  std::uint64_t flagged_events_ = 0;
};

Timeline tally(std::span<const Lifecycle> lifecycles);

struct EventTotals {
  std::uint64_t new_submissions = 0;
  std::uint64_t completions = 0;
  std::uint64_t submissions = 0;
  std::uint64_t schedules = 0;

  friend bool operator==(const EventTotals&, const EventTotals&) = default;
};

struct EventCdfs {
  Cdf new_submissions;  // first Submit of each task
  Cdf completions;      // Finish terminals
  Cdf submissions;      // every Submit
  Cdf schedules;        // every Schedule
  EventTotals totals;

  friend bool operator==(const EventCdfs&, const EventCdfs&) = default;
};

// Each CDF is normalized by its own total.
EventCdfs event_cdfs(const Timeline& timeline);

struct WeightedCdfs {
  Cdf new_submissions;  // unscaled reference
  Cdf completions;
  Cdf submissions;
  Cdf schedules;
  double completion_weight = 0;
  double submission_weight = 0;
  double schedule_weight = 0;
};

// Scales each curve by total_kind / new_submissions. Throws
// UndefinedWeightError when there are no new submissions.
WeightedCdfs weighted_cdfs(const EventCdfs& cdfs);

struct SeriesOptions {
  std::optional<Micros> start;  // adds a leading zero point
  std::optional<Micros> end;    // adds a trailing point with the final value
};

// Running sum of queue / running changes, one point per timestamp whose
// change is nonzero.
Series queue_series(const Timeline& timeline, const SeriesOptions& options = {});
Series running_series(const Timeline& timeline,
                      const SeriesOptions& options = {});

// Mean of the samples in (t - window, t] at each distinct sample time t.
// Throws ConfigError for a non-positive window.
Series moving_average(std::span<const DurationSample> sorted,
                      std::int64_t window);

// CDF over execution time in seconds of spans with a schedule and a
// terminal; finished_only keeps Finish terminals.
Cdf exec_time_cdf(std::span<const ScheduleSpan> spans, bool finished_only);

// Resamples a step series onto a uniform grid, for plotting.
Series densify(const Series& series, Micros step);

// Statistics used by the observation report.
double linear_fit_r2(const Cdf& cdf);
double max_gap(const Cdf& a, const Cdf& b);
// Least-squares slope per hour over the last tail_fraction of the series'
// time span, sampled on a uniform grid.
double terminal_slope_per_hour(const Series& series, double tail_fraction);
double variance(const Series& series);

struct Lump {
  double start = 0;     // first time the excess exceeds the threshold
  double end = 0;       // last time it does
  double location = 0;  // half-height point of the rising edge
  double peak_time = 0;
  double peak_excess = 0;
};

// Regions where submissions (normalized) run ahead of new submissions by
// more than threshold.
std::vector<Lump> detect_lumps(const Cdf& submissions,
                               const Cdf& new_submissions, double threshold);

struct ReportOptions {
  double lump_threshold = 0.02;
  double tail_fraction = 0.1;
  std::int64_t window = 3600 * static_cast<std::int64_t>(kMicrosPerSecond);
};

struct ObservationInputs {
  const EventCdfs* cdfs = nullptr;
  const WeightedCdfs* weighted = nullptr;  // may be null (no submissions)
  const Series* queue = nullptr;
  const Series* running = nullptr;
  const Series* exec_average = nullptr;
  const Series* sched_average = nullptr;
  const TraceAggregator* aggregator = nullptr;
};

// One block per statistic plus a meta block.
nlohmann::json observation_report(const ObservationInputs& in,
                               const ReportOptions& options);

}  // namespace ctrace
