#include "ctrace/utilization.hpp"

#include <algorithm>
#include <cmath>

#include "ctrace/error.hpp"

namespace ctrace {

std::string_view to_string(Resource r) {
  return r == Resource::Cpu ? "cpu" : "memory";
}

std::string_view to_string(ScopeKind s) {
  switch (s) {
    case ScopeKind::Cluster: return "cluster";
    case ScopeKind::Machine: return "machine";
    case ScopeKind::Tier: return "tier";
    case ScopeKind::Task: return "task";
  }
  return "?";
}

TaskAttributeMap task_attributes(std::span<const TaskEvent> events) {
  TaskAttributeMap out;
  for (const auto& e : events) {
    auto& a = out[e.key];
    a.priority = e.priority;
    if (e.cpu_request) a.cpu_request = e.cpu_request;
    if (e.mem_request) a.mem_request = e.mem_request;
  }
  return out;
}

Micros native_resolution(std::span<const UsageSample> usage) {
  Micros widest = 0;
  for (const auto& s : usage) {
    widest = std::max(widest, s.window_end - s.window_start);
  }
  return widest;
}

std::optional<std::string> sampling_period_warning(double period_s) {
  if (period_s < kMinMeaningfulPeriodS) {
    return "sampling period " + std::to_string(period_s) +
           " s is below the 8 s shortest meaningful task duration";
  }
  return std::nullopt;
}

namespace {

Micros period_micros(double period_s) {
  if (!(period_s > 0)) throw ConfigError("sampling period must be positive");
  return static_cast<Micros>(std::llround(period_s * 1e6));
}

Micros checked_period(std::span<const UsageSample> usage, double period_s) {
  const Micros period = period_micros(period_s);
  const Micros native = native_resolution(usage);
  if (period < native) {
    throw ResolutionError("period " + std::to_string(period_s) +
                          " s is finer than the data's " +
                          std::to_string(to_seconds(native)) +
                          " s sampling; sub-sample detail cannot be recovered");
  }
  return period;
}

// Calls fn(bin, overlap_micros) for each period the sample overlaps.
template <typename Fn>
void for_each_overlap(const UsageSample& s, Micros period, Fn&& fn) {
  if (s.window_end <= s.window_start) return;
  for (Micros k = s.window_start / period; k * period < s.window_end; ++k) {
    Micros lo = std::max(s.window_start, k * period);
    Micros hi = std::min(s.window_end, (k + 1) * period);
    if (hi > lo) fn(static_cast<std::int64_t>(k), hi - lo);
  }
}

using BinMap = std::map<std::int64_t, double>;

UtilSeries make_series(const BinMap& bins, std::int64_t first,
                       std::int64_t last, Micros period, Resource resource,
                       double period_s, double capacity) {
  UtilSeries s;
  s.period_s = period_s;
  s.resource = resource;
  s.capacity = capacity;
  for (std::int64_t k = first; k <= last; ++k) {
    auto it = bins.find(k);
    double integral = it == bins.end() ? 0.0 : it->second;
    s.points.push_back({static_cast<Micros>(k) * period,
                        integral / static_cast<double>(period)});
  }
  return s;
}

double contribution(const UsageSample& s, Resource resource,
                    const TaskAttributeMap& attributes, UsageMode mode) {
  if (mode == UsageMode::Usage) return usage_of(s, resource);
  auto it = attributes.find(s.key);
  if (it == attributes.end()) return 0.0;
  return it->second.request(resource).value_or(0.0);
}

}  // namespace

TierSeries tier_series(std::span<const UsageSample> usage, Resource resource,
                       double period_s, const TaskAttributeMap& attributes,
                       const UtilOptions& options) {
  const Micros period = checked_period(usage, period_s);
  std::array<BinMap, 4> bins;  // gratis, middle, production, unknown
  std::int64_t first = 0;
  std::int64_t last = -1;
  for (const auto& s : usage) {
    auto it = attributes.find(s.key);
    std::size_t bucket = 3;
    if (it != attributes.end()) {
      bucket = static_cast<std::size_t>(tier_of(it->second.priority, options.bands));
    }
    const double v = contribution(s, resource, attributes, options.mode);
    for_each_overlap(s, period, [&](std::int64_t k, Micros overlap) {
      bins[bucket][k] += v * static_cast<double>(overlap);
      if (last < first) {
        first = last = k;
      } else {
        first = std::min(first, k);
        last = std::max(last, k);
      }
    });
  }
  TierSeries out;
  for (std::size_t t = 0; t < 3; ++t) {
    out.tiers[t] = make_series(bins[t], first, last, period, resource,
                               period_s, options.capacity);
    out.tiers[t].scope = ScopeKind::Tier;
    out.tiers[t].tier = static_cast<PriorityTier>(t);
  }
  out.unknown = make_series(bins[3], first, last, period, resource, period_s,
                            options.capacity);
  out.unknown.scope = ScopeKind::Tier;
  out.cluster = out.unknown;
  out.cluster.scope = ScopeKind::Cluster;
  for (std::size_t i = 0; i < out.cluster.points.size(); ++i) {
    out.cluster.points[i].value =
        out.tiers[0].points[i].value + out.tiers[1].points[i].value +
        out.tiers[2].points[i].value + out.unknown.points[i].value;
  }
  return out;
}

UtilSeries util_series(std::span<const UsageSample> usage,
                       const UtilScope& scope, Resource resource,
                       double period_s, const TaskAttributeMap& attributes,
                       const UtilOptions& options) {
  switch (scope.kind) {
    case ScopeKind::Cluster:
      return tier_series(usage, resource, period_s, attributes, options).cluster;
    case ScopeKind::Tier: {
      if (!scope.tier) throw ConfigError("tier scope needs a tier");
      auto all = tier_series(usage, resource, period_s, attributes, options);
      return all.tiers[static_cast<std::size_t>(*scope.tier)];
    }
    case ScopeKind::Machine: {
      if (!scope.machine) throw ConfigError("machine scope needs a machine id");
      std::vector<UsageSample> mine;
      for (const auto& s : usage) {
        if (s.machine_id == *scope.machine) mine.push_back(s);
      }
      const Micros period = checked_period(usage, period_s);
      auto series = tier_series(mine, resource, to_seconds(period), attributes,
                                options).cluster;
      series.scope = ScopeKind::Machine;
      series.machine = scope.machine;
      return series;
    }
    case ScopeKind::Task:
      break;
  }
  throw ConfigError("util_series does not support task scope");
}

std::vector<UsageSample> resample_usage(std::span<const UsageSample> usage,
                                        double period_s) {
  const Micros period = checked_period(usage, period_s);
  struct Piece {
    Micros lo = 0;
    Micros hi = 0;
    long double cpu = 0;  // usage times covered micros
    long double mem = 0;
    std::uint64_t machine = 0;
  };
  std::map<std::pair<TaskKey, std::int64_t>, std::vector<Piece>> cells;
  for (const auto& s : usage) {
    for_each_overlap(s, period, [&](std::int64_t k, Micros overlap) {
      const Micros lo = std::max(s.window_start, static_cast<Micros>(k) * period);
      cells[{s.key, k}].push_back({lo, lo + overlap,
                                   static_cast<long double>(s.cpu_usage) * overlap,
                                   static_cast<long double>(s.mem_usage) * overlap,
                                   s.machine_id});
    });
  }
  // Contiguous pieces merge; a gap inside a period (a task that stopped
  // and came back) keeps the runs apart so the windows stay exact.
  std::vector<UsageSample> out;
  out.reserve(cells.size());
  for (auto& [id, pieces] : cells) {
    std::stable_sort(pieces.begin(), pieces.end(),
                     [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
    Piece run = pieces.front();
    Micros covered = run.hi - run.lo;
    auto flush = [&] {
      out.push_back({run.lo, run.hi, id.first, run.machine,
                     static_cast<double>(run.cpu / covered),
                     static_cast<double>(run.mem / covered)});
    };
    for (std::size_t i = 1; i < pieces.size(); ++i) {
      const Piece& p = pieces[i];
      if (p.lo > run.hi) {
        flush();
        run = p;
        covered = p.hi - p.lo;
        continue;
      }
      run.hi = std::max(run.hi, p.hi);
      run.cpu += p.cpu;
      run.mem += p.mem;
      run.machine = p.machine;
      covered += p.hi - p.lo;
    }
    flush();
  }
  sort_usage(out);
  return out;
}

UtilSeries resample(std::span<const UsageSample> usage, double period_s,
                    Resource resource, const UtilOptions& options) {
  return tier_series(usage, resource, period_s, {}, options).cluster;
}

std::vector<ScopeTrack> scope_tracks(std::span<const UsageSample> usage,
                                     ScopeKind scope, Resource resource,
                                     double period_s) {
  if (scope != ScopeKind::Machine && scope != ScopeKind::Task) {
    throw ConfigError("change tracks need machine or task scope");
  }
  const Micros period = checked_period(usage, period_s);
  struct TaskCell {
    long double integral = 0;
    Micros covered = 0;
    std::uint64_t machine = 0;
  };
  std::map<TaskKey, std::map<std::int64_t, TaskCell>> tasks;
  for (const auto& s : usage) {
    const double v = usage_of(s, resource);
    auto& cells = tasks[s.key];
    for_each_overlap(s, period, [&](std::int64_t k, Micros overlap) {
      TaskCell& c = cells[k];
      c.integral += static_cast<long double>(v) * overlap;
      c.covered += overlap;
      c.machine = s.machine_id;
    });
  }

  std::vector<ScopeTrack> out;
  TaskKeyHash hash;
  if (scope == ScopeKind::Task) {
    for (const auto& [key, cells] : tasks) {
      ScopeTrack track;
      track.id = hash(key);
      track.task = key;
      for (const auto& [k, c] : cells) {
        track.cells.push_back({k, static_cast<double>(c.integral / c.covered),
                               c.covered < period, track.id});
      }
      out.push_back(std::move(track));
    }
    return out;
  }

  struct MachineCell {
    long double integral = 0;
    bool partial = false;
    std::uint64_t members = 0;
  };
  std::map<std::uint64_t, std::map<std::int64_t, MachineCell>> machines;
  for (const auto& [key, cells] : tasks) {
    const std::uint64_t h = hash(key);
    for (const auto& [k, c] : cells) {
      MachineCell& m = machines[c.machine][k];
      m.integral += c.integral;
      m.partial = m.partial || c.covered < period;
      m.members ^= h;
    }
  }
  for (const auto& [id, cells] : machines) {
    ScopeTrack track;
    track.id = id;
    const std::int64_t first = cells.begin()->first;
    const std::int64_t last = cells.rbegin()->first;
    for (std::int64_t k = first; k <= last; ++k) {
      auto it = cells.find(k);
      if (it == cells.end()) {
        track.cells.push_back({k, 0.0, false, 0});
      } else {
        track.cells.push_back(
            {k, static_cast<double>(it->second.integral / period),
             it->second.partial, it->second.members});
      }
    }
    out.push_back(std::move(track));
  }
  return out;
}

double ChangeDistribution::quantile(double q) const {
  if (samples.empty()) {
    throw InsufficientDataError("change distribution has no samples");
  }
  if (q <= 0) return samples.front();
  const double n = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

ChangeDistribution change_distribution(std::span<const ScopeTrack> tracks,
                                       Resource resource, double period_s,
                                       const ChangeOptions& options) {
  ChangeDistribution d;
  d.resource = resource;
  d.period_s = period_s;
  d.mode = options.mode;
  for (const auto& track : tracks) {
    for (std::size_t i = 1; i < track.cells.size(); ++i) {
      const PeriodCell& a = track.cells[i - 1];
      const PeriodCell& b = track.cells[i];
      if (b.period != a.period + 1) continue;
      if (options.exclude_churn &&
          (a.partial || b.partial || a.members != b.members)) {
        continue;
      }
      const double diff = std::abs(b.value - a.value);
      d.samples.push_back(options.mode == ChangeMode::Relative
                              ? diff / std::max(a.value, options.epsilon)
                              : diff);
    }
  }
  if (d.samples.empty()) {
    throw InsufficientDataError(
        "change distribution needs at least two consecutive periods");
  }
  std::sort(d.samples.begin(), d.samples.end());
  const double n = static_cast<double>(d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    if (i + 1 < d.samples.size() && d.samples[i + 1] == d.samples[i]) continue;
    d.cdf.points.push_back({d.samples[i], static_cast<double>(i + 1) / n});
  }
  return d;
}

}  // namespace ctrace
