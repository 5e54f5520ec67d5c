#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctrace/aggregate.hpp"
#include "ctrace/ingest.hpp"
#include "ctrace/model.hpp"

namespace ctrace {

enum class Resource : std::uint8_t { Cpu, Memory };
enum class ScopeKind : std::uint8_t { Cluster, Machine, Tier, Task };
// Usage sums measured usage; Allocation sums the requests of tasks that
// ran during the period, weighted by the time they ran.
enum class UsageMode : std::uint8_t { Usage, Allocation };
enum class ChangeMode : std::uint8_t { Relative, Absolute };

std::string_view to_string(Resource r);
std::string_view to_string(ScopeKind s);

inline double usage_of(const UsageSample& s, Resource r) {
  return r == Resource::Cpu ? s.cpu_usage : s.mem_usage;
}

struct TaskAttributes {
  int priority = 0;
  std::optional<double> cpu_request;
  std::optional<double> mem_request;

  std::optional<double> request(Resource r) const {
    return r == Resource::Cpu ? cpu_request : mem_request;
  }
};

using TaskAttributeMap =
    std::unordered_map<TaskKey, TaskAttributes, TaskKeyHash>;

// Latest priority and requests seen for each task.
TaskAttributeMap task_attributes(std::span<const TaskEvent> events);

struct UtilSeries {
  double period_s = 300;
  Resource resource = Resource::Cpu;
  ScopeKind scope = ScopeKind::Cluster;
  std::optional<PriorityTier> tier;
  std::optional<std::uint64_t> machine;
  std::vector<SeriesPoint> points;  // period start, value in request units
  double capacity = 0;
};

struct UtilScope {
  ScopeKind kind = ScopeKind::Cluster;
  std::optional<PriorityTier> tier;
  std::optional<std::uint64_t> machine;
};

struct UtilOptions {
  UsageMode mode = UsageMode::Usage;
  TierBands bands;
  double capacity = 0;
};

// Longest sample window; usage carries no detail finer than this.
Micros native_resolution(std::span<const UsageSample> usage);

// Warning text when a sampling period is below the shortest meaningful
// task duration (8 s).
std::optional<std::string> sampling_period_warning(double period_s);

inline constexpr double kMinMeaningfulPeriodS = 8.0;

// Per-period sum over in-scope tasks of time-weighted mean usage. Throws
// ResolutionError when period_s is finer than the data.
UtilSeries util_series(std::span<const UsageSample> usage,
                       const UtilScope& scope, Resource resource,
                       double period_s, const TaskAttributeMap& attributes,
                       const UtilOptions& options = {});

// Cluster series plus its partition by tier. The cluster value of each
// period is the sum of the tier values (plus tasks of unknown priority).
struct TierSeries {
  UtilSeries cluster;
  std::array<UtilSeries, 3> tiers;  // indexed by PriorityTier
  UtilSeries unknown;
};

TierSeries tier_series(std::span<const UsageSample> usage, Resource resource,
                       double period_s, const TaskAttributeMap& attributes,
                       const UtilOptions& options = {});

// Per-task resampling: one sample per task, period and contiguous run of
// coverage, holding the mean usage over that run. Throws ResolutionError
// when period_s is finer than the data; period_s below 8 s is allowed.
std::vector<UsageSample> resample_usage(std::span<const UsageSample> usage,
                                        double period_s);

// Cluster-scope series at a finer (or equal) period.
UtilSeries resample(std::span<const UsageSample> usage, double period_s,
                    Resource resource, const UtilOptions& options = {});

// One cell of a per-scope period grid.
struct PeriodCell {
  std::int64_t period = 0;
  double value = 0;
  bool partial = false;        // some task started or stopped inside it
  std::uint64_t members = 0;   // order-independent hash of the task set
};

struct ScopeTrack {
  std::uint64_t id = 0;  // machine id, or task hash for task scope
  TaskKey task;          // task scope only
  std::vector<PeriodCell> cells;  // increasing period
};

// Machine tracks are dense between their first and last busy period (idle
// periods hold 0). Task tracks hold only the periods the task was covered,
// valued at the mean over covered time.
std::vector<ScopeTrack> scope_tracks(std::span<const UsageSample> usage,
                                     ScopeKind scope, Resource resource,
                                     double period_s);

struct ChangeOptions {
  ChangeMode mode = ChangeMode::Relative;
  bool exclude_churn = false;  // drop pairs where tasks start or stop
  double epsilon = 1e-6;
};

struct ChangeDistribution {
  Resource resource = Resource::Cpu;
  double period_s = 300;
  ChangeMode mode = ChangeMode::Relative;
  std::vector<double> samples;  // sorted
  Cdf cdf;

  // Smallest sample with cumulative fraction >= q. Throws
  // InsufficientDataError when empty.
  double quantile(double q) const;
};

// Pooled changes between consecutive periods of every track:
// |u1 - u0| / max(u0, epsilon) (relative) or |u1 - u0| (absolute). Throws
// InsufficientDataError when no track has two consecutive periods.
ChangeDistribution change_distribution(std::span<const ScopeTrack> tracks,
                                       Resource resource, double period_s,
                                       const ChangeOptions& options = {});

}  // namespace ctrace
