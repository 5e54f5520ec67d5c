#include "ctrace/reservation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <yaml-cpp/yaml.h>

#include "ctrace/error.hpp"
#include "ctrace/lifecycle.hpp"
#include "ctrace/text.hpp"

namespace ctrace {

std::string_view to_string(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::RequestStatic: return "request_static";
    case PolicyVariant::BorgDecay: return "borg_decay";
    case PolicyVariant::ChangeQuantileMargin: return "change_quantile";
  }
  return "?";
}

std::string_view to_string(MarginSource s) {
  return s == MarginSource::Measured ? "measured" : "fixed";
}

nlohmann::json ReservationPolicy::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["variant"] = std::string(to_string(variant));
  j["sampling_period_s"] = sampling_period_s;
  if (variant == PolicyVariant::BorgDecay) {
    j["decay_rate"] = decay_rate;
    j["margin_fraction"] = margin_fraction;
  }
  if (variant == PolicyVariant::ChangeQuantileMargin) {
    j["quantile"] = quantile;
    j["source"] = std::string(to_string(source));
    if (source == MarginSource::Fixed) j["fixed_margin"] = fixed_margin;
    j["floor_fraction"] = floor_fraction;
    j["per_class"] = per_class;
    if (per_class) j["class_threshold_s"] = class_threshold_s;
  }
  return j;
}

void validate(const ReservationPolicy& p) {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("policy: ") + msg);
  };
  require(p.sampling_period_s > 0, "sampling_period must be positive");
  require(p.decay_rate > 0 && p.decay_rate <= 1, "decay_rate must lie in (0, 1]");
  require(p.margin_fraction >= 0, "margin_fraction must be non-negative");
  require(p.quantile > 0 && p.quantile < 1, "quantile must lie in (0, 1)");
  require(p.fixed_margin >= 0, "fixed_margin must be non-negative");
  require(p.floor_fraction >= 0, "floor_fraction must be non-negative");
  require(p.class_threshold_s >= 0, "class_threshold must be non-negative");
}

ReservationPolicy load_policy(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("policy " + path.string() + ": " + e.what());
  }
  if (!root.IsMap()) throw ConfigError("policy file must be a mapping");
  ReservationPolicy p;
  p.name = path.stem().string();
  try {
    for (const auto& item : root) {
      const auto key = item.first.as<std::string>();
      const YAML::Node& v = item.second;
      if (key == "name") p.name = v.as<std::string>();
      else if (key == "variant") {
        const auto s = v.as<std::string>();
        if (s == "request_static") p.variant = PolicyVariant::RequestStatic;
        else if (s == "borg_decay") p.variant = PolicyVariant::BorgDecay;
        else if (s == "change_quantile") p.variant = PolicyVariant::ChangeQuantileMargin;
        else throw ConfigError("policy: unknown variant '" + s + "'");
      } else if (key == "sampling_period") p.sampling_period_s = v.as<double>();
      else if (key == "decay_rate") p.decay_rate = v.as<double>();
      else if (key == "margin_fraction") p.margin_fraction = v.as<double>();
      else if (key == "quantile") p.quantile = v.as<double>();
      else if (key == "source") {
        const auto s = v.as<std::string>();
        if (s == "measured") p.source = MarginSource::Measured;
        else if (s == "fixed") p.source = MarginSource::Fixed;
        else throw ConfigError("policy: unknown source '" + s + "'");
      } else if (key == "fixed_margin") p.fixed_margin = v.as<double>();
      else if (key == "floor_fraction") p.floor_fraction = v.as<double>();
      else if (key == "per_class") p.per_class = v.as<bool>();
      else if (key == "class_threshold") p.class_threshold_s = v.as<double>();
      else throw ConfigError("policy: unknown key '" + key + "'");
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError("policy " + path.string() + ": " + e.what());
  }
  validate(p);
  return p;
}

double reserve(const ReservationPolicy& policy, const ReserveInput& in) {
  if (!in.request) {
    throw PolicyError("task has no request; reservation basis undefined");
  }
  const double request = *in.request;
  if (!in.usage) return request;
  const double u = *in.usage;
  switch (policy.variant) {
    case PolicyVariant::RequestStatic:
      return request;
    case PolicyVariant::BorgDecay: {
      const double target = u * (1 + policy.margin_fraction);
      const double prev = in.previous.value_or(request);
      double r = target;
      if (prev > target) r = prev - policy.decay_rate * (prev - target);
      return std::min(request, r);
    }
    case PolicyVariant::ChangeQuantileMargin: {
      const double r = std::max(u * (1 + in.margin), u * (1 + policy.floor_fraction));
      return std::min(request, r);
    }
  }
  return request;
}

namespace {

template <typename Fn>
void parallel_chunks(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || n < 2) {
    fn(0, n);
    return;
  }
  const std::size_t w = std::min<std::size_t>(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(w);
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t i = 0; i < w; ++i) {
    const std::size_t lo = n * i / w;
    const std::size_t hi = n * (i + 1) / w;
    threads.emplace_back([&, i, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<TaskEvent> sorted_events(const TraceBundle& bundle) {
  std::vector<TaskEvent> events = bundle.task_events;
  sort_events(events);
  return events;
}

}  // namespace

std::vector<TaskKey> short_lived_tasks(const TraceBundle& bundle,
                                       double threshold_s) {
  const Micros threshold = static_cast<Micros>(std::llround(threshold_s * 1e6));
  std::map<TaskKey, Micros> longest;
  auto events = sorted_events(bundle);
  for (const auto& life : build_lifecycles(events)) {
    std::optional<Micros> best;
    for (const auto& span : extract_spans(life, bundle.trace_end)) {
      if (!span.schedule_time) continue;
      Micros d = 0;
      if (auto e = span.execution_time()) {
        d = *e;
      } else if (span.live && bundle.trace_end > *span.schedule_time) {
        d = bundle.trace_end - *span.schedule_time;
      } else {
        continue;
      }
      best = std::max(best.value_or(0), d);
    }
    if (best) longest[life.key] = *best;
  }
  std::map<TaskKey, std::pair<Micros, Micros>> extent;
  for (const auto& s : bundle.usage) {
    auto [it, fresh] = extent.try_emplace(s.key, s.window_start, s.window_end);
    if (!fresh) {
      it->second.first = std::min(it->second.first, s.window_start);
      it->second.second = std::max(it->second.second, s.window_end);
    }
  }
  for (const auto& [key, range] : extent) {
    longest.try_emplace(key, range.second - range.first);
  }
  std::vector<TaskKey> out;
  for (const auto& [key, d] : longest) {
    if (d < threshold) out.push_back(key);
  }
  return out;
}

namespace {

std::optional<ChangeDistribution> try_distribution(
    std::span<const ScopeTrack> tracks, Resource r, double period_s,
    const ChangeOptions& options) {
  try {
    return change_distribution(tracks, r, period_s, options);
  } catch (const InsufficientDataError&) {
    return std::nullopt;
  }
}

}  // namespace

ClassDistributions per_class_distributions(const TraceBundle& bundle,
                                           double threshold_s,
                                           Resource resource, double period_s,
                                           const ChangeOptions& options) {
  const auto short_keys = short_lived_tasks(bundle, threshold_s);
  auto tracks = scope_tracks(bundle.usage, ScopeKind::Task, resource, period_s);
  std::vector<ScopeTrack> short_tracks;
  std::vector<ScopeTrack> long_tracks;
  for (auto& t : tracks) {
    if (std::binary_search(short_keys.begin(), short_keys.end(), t.task)) {
      short_tracks.push_back(std::move(t));
    } else {
      long_tracks.push_back(std::move(t));
    }
  }
  ClassDistributions out;
  out.threshold_s = threshold_s;
  out.short_tasks = short_tracks.size();
  out.long_tasks = long_tracks.size();
  out.short_lived = try_distribution(short_tracks, resource, period_s, options);
  out.long_running = try_distribution(long_tracks, resource, period_s, options);
  return out;
}

std::vector<TaskPeriod> replay(const TraceBundle& bundle,
                               const ReservationPolicy& policy,
                               const SimOptions& options, SimReport* report) {
  validate(policy);
  const double period_s = policy.sampling_period_s;
  std::vector<UsageSample> cells = resample_usage(bundle.usage, period_s);
  std::stable_sort(cells.begin(), cells.end(),
                   [](const UsageSample& a, const UsageSample& b) {
                     if (a.key != b.key) return a.key < b.key;
                     return a.window_start < b.window_start;
                   });
  const Micros period = static_cast<Micros>(std::llround(period_s * 1e6));
  const TaskAttributeMap attrs = task_attributes(bundle.task_events);

  // Margins per resource for long-running (index 0) and short-lived tasks.
  std::array<std::array<double, 2>, 2> margin{};
  std::vector<TaskKey> short_keys;
  const bool quantile_policy =
      policy.variant == PolicyVariant::ChangeQuantileMargin;
  if (quantile_policy) {
    for (Resource r : {Resource::Cpu, Resource::Memory}) {
      const auto ri = static_cast<std::size_t>(r);
      if (policy.source == MarginSource::Fixed) {
        margin[0][ri] = margin[1][ri] = policy.fixed_margin;
        continue;
      }
      const auto& given =
          r == Resource::Cpu ? options.cpu_distribution : options.mem_distribution;
      std::optional<ChangeDistribution> pooled = given;
      auto pooled_q = [&] {
        if (!pooled) {
          auto tracks = scope_tracks(bundle.usage, ScopeKind::Task, r, period_s);
          pooled = change_distribution(tracks, r, period_s, options.change);
        }
        return pooled->quantile(policy.quantile);
      };
      if (policy.per_class && !given) {
        auto classes = per_class_distributions(bundle, policy.class_threshold_s,
                                               r, period_s, options.change);
        margin[0][ri] = classes.long_running
                            ? classes.long_running->quantile(policy.quantile)
                            : pooled_q();
        margin[1][ri] = classes.short_lived
                            ? classes.short_lived->quantile(policy.quantile)
                            : pooled_q();
      } else {
        margin[0][ri] = margin[1][ri] = pooled_q();
      }
    }
    if (policy.per_class) {
      short_keys = short_lived_tasks(bundle, policy.class_threshold_s);
    }
  }

  // Task boundaries within cells.
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i == 0 || cells[i].key != cells[i - 1].key) starts.push_back(i);
  }
  starts.push_back(cells.size());
  const std::size_t task_count = starts.size() - 1;

  std::vector<std::vector<TaskPeriod>> per_task(task_count);
  std::vector<char> skipped(task_count, 0);
  parallel_chunks(task_count, options.workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t t = lo; t < hi; ++t) {
      const TaskKey key = cells[starts[t]].key;
      auto it = attrs.find(key);
      if (it == attrs.end() || !it->second.cpu_request || !it->second.mem_request) {
        skipped[t] = 1;
        continue;
      }
      const TaskAttributes& a = it->second;
      const bool is_short =
          std::binary_search(short_keys.begin(), short_keys.end(), key);
      const auto& m = margin[is_short ? 1 : 0];
      std::array<std::optional<double>, 2> prev_usage;
      std::array<std::optional<double>, 2> prev_res;
      auto& out = per_task[t];
      for (std::size_t i = starts[t]; i < starts[t + 1]; ++i) {
        const UsageSample& c = cells[i];
        TaskPeriod tp;
        tp.key = key;
        tp.period = static_cast<std::int64_t>(c.window_start / period);
        tp.machine = c.machine_id;
        tp.priority = a.priority;
        tp.tier = tier_of(a.priority, options.bands);
        tp.covered_s = to_seconds(c.window_end - c.window_start);
        for (Resource r : {Resource::Cpu, Resource::Memory}) {
          const auto ri = static_cast<std::size_t>(r);
          tp.usage[ri] = usage_of(c, r);
          tp.request[ri] = *a.request(r);
          tp.reservation[ri] =
              reserve(policy, {a.request(r), prev_usage[ri], prev_res[ri], m[ri]});
          prev_usage[ri] = tp.usage[ri];
          prev_res[ri] = tp.reservation[ri];
        }
        out.push_back(tp);
      }
    }
  });

  std::vector<TaskPeriod> records;
  for (auto& v : per_task) {
    records.insert(records.end(), v.begin(), v.end());
  }

  // Machine-level overflow and eviction, one group per (machine, period).
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = records[a];
    const auto& y = records[b];
    if (x.machine != y.machine) return x.machine < y.machine;
    return x.period < y.period;
  });
  std::vector<std::size_t> group_starts;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || records[order[i]].machine != records[order[i - 1]].machine ||
        records[order[i]].period != records[order[i - 1]].period) {
      group_starts.push_back(i);
    }
  }
  group_starts.push_back(order.size());
  const std::size_t groups = group_starts.size() - 1;
  std::vector<char> unresolved(groups, 0);

  parallel_chunks(groups, options.workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t g = lo; g < hi; ++g) {
      const std::size_t b = group_starts[g];
      const std::size_t e = group_starts[g + 1];
      const std::uint64_t machine_id = records[order[b]].machine;
      std::array<double, 2> capacity{0, 0};
      auto mit = std::lower_bound(
          bundle.machines.begin(), bundle.machines.end(), machine_id,
          [](const Machine& m, std::uint64_t id) { return m.id < id; });
      if (mit != bundle.machines.end() && mit->id == machine_id) {
        capacity = {mit->cpu, mit->mem};
      }
      std::array<double, 2> load{0, 0};
      std::array<double, 2> requested{0, 0};
      for (std::size_t i = b; i < e; ++i) {
        const TaskPeriod& tp = records[order[i]];
        for (std::size_t r = 0; r < 2; ++r) {
          load[r] += std::max(tp.reservation[r], tp.usage[r]) +
                     std::max(0.0, tp.request[r] - tp.reservation[r]);
          requested[r] += tp.request[r];
        }
      }
      const std::array<double, 2> cap{std::max(capacity[0], requested[0]),
                                      std::max(capacity[1], requested[1])};
      auto over = [&] { return load[0] > cap[0] || load[1] > cap[1]; };
      if (!over()) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t i = b; i < e; ++i) {
        if (records[order[i]].tier != PriorityTier::Production) {
          candidates.push_back(order[i]);
        }
      }
      auto overflow = [&](const TaskPeriod& tp) {
        return std::max(0.0, tp.usage[0] - tp.reservation[0]) +
               std::max(0.0, tp.usage[1] - tp.reservation[1]);
      };
      std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t c) {
        const auto& x = records[a];
        const auto& y = records[c];
        if (x.tier != y.tier) return x.tier < y.tier;
        if (x.priority != y.priority) return x.priority < y.priority;
        const double ox = overflow(x);
        const double oy = overflow(y);
        if (ox != oy) return ox > oy;
        return x.key < y.key;
      });
      for (std::size_t idx : candidates) {
        if (!over()) break;
        TaskPeriod& tp = records[idx];
        tp.evicted = true;
        for (std::size_t r = 0; r < 2; ++r) {
          load[r] -= std::max(tp.reservation[r], tp.usage[r]);
        }
      }
      unresolved[g] = over() ? 1 : 0;
    }
  });

  if (report) {
    SimReport& rep = *report;
    rep = SimReport{};
    rep.policy = policy;
    if (quantile_policy) {
      for (std::size_t r = 0; r < 2; ++r) {
        rep.margin[r] = margin[0][r];
        if (policy.per_class) rep.short_margin[r] = margin[1][r];
      }
    }
    for (char s : skipped) rep.skipped_tasks += s ? 1 : 0;
    for (char u : unresolved) rep.unresolved_overflow += u ? 1 : 0;
    std::map<std::int64_t, SeriesRow> series;
    for (const TaskPeriod& tp : records) {
      auto& tier = rep.tiers[static_cast<std::size_t>(tp.tier)];
      bool violated = false;
      SeriesRow& row = series[tp.period];
      const double weight = tp.covered_s / period_s;
      for (std::size_t r = 0; r < 2; ++r) {
        const double res = tp.reservation[r];
        const bool v = tp.usage[r] > res;
        violated = violated || v;
        for (ResourceTotals* t : {&rep.resources[r], &tier.resources[r]}) {
          t->reclaimed += std::max(0.0, tp.request[r] - res) * tp.covered_s;
          t->reserved += res * tp.covered_s;
          t->used += tp.usage[r] * tp.covered_s;
          t->requested += tp.request[r] * tp.covered_s;
          t->violations += v ? 1 : 0;
        }
        row.reserved[r] += res * weight;
        row.used[r] += tp.usage[r] * weight;
        row.requested[r] += tp.request[r] * weight;
      }
      ++rep.task_periods;
      ++tier.task_periods;
      if (violated) {
        ++rep.violation_count;
        ++tier.violations;
      }
      if (tp.evicted) {
        ++rep.evictions_triggered;
        ++tier.evictions;
      }
    }
    rep.violation_rate =
        rep.task_periods == 0
            ? 0.0
            : static_cast<double>(rep.violation_count) /
                  static_cast<double>(rep.task_periods);
    for (auto& [k, row] : series) {
      row.time = static_cast<Micros>(k) * period;
      rep.series.push_back(row);
    }
  }
  return records;
}

SimReport simulate(const TraceBundle& bundle, const ReservationPolicy& policy,
                   const SimOptions& options) {
  SimReport report;
  replay(bundle, policy, options, &report);
  return report;
}

std::vector<SimReport> compare_policies(
    const TraceBundle& bundle, std::span<const ReservationPolicy> policies,
    const SimOptions& options) {
  if (policies.empty()) throw ConfigError("compare needs at least one policy");
  std::vector<SimReport> out;
  for (const auto& p : policies) out.push_back(simulate(bundle, p, options));
  std::stable_sort(out.begin(), out.end(), [](const SimReport& a, const SimReport& b) {
    if (a.resources[0].reclaimed != b.resources[0].reclaimed) {
      return a.resources[0].reclaimed > b.resources[0].reclaimed;
    }
    return a.resources[1].reclaimed > b.resources[1].reclaimed;
  });
  return out;
}

namespace {

nlohmann::json totals_json(const ResourceTotals& t, std::uint64_t periods) {
  return {
      {"reclaimed", t.reclaimed},
      {"reserved", t.reserved},
      {"used", t.used},
      {"requested", t.requested},
      {"violations", t.violations},
      {"violation_rate",
       periods == 0 ? 0.0
                    : static_cast<double>(t.violations) / static_cast<double>(periods)},
  };
}

}  // namespace

nlohmann::json SimReport::to_json() const {
  nlohmann::json j;
  j["policy"] = policy.to_json();
  j["task_periods"] = task_periods;
  j["violation_count"] = violation_count;
  j["violation_rate"] = violation_rate;
  j["evictions_triggered"] = evictions_triggered;
  j["unresolved_overflow"] = unresolved_overflow;
  j["skipped_tasks"] = skipped_tasks;
  for (Resource r : {Resource::Cpu, Resource::Memory}) {
    const auto ri = static_cast<std::size_t>(r);
    const std::string name(to_string(r));
    j["resources"][name] = totals_json(resources[ri], task_periods);
    if (margin[ri]) j["margin"][name] = *margin[ri];
    if (short_margin[ri]) j["short_lived_margin"][name] = *short_margin[ri];
  }
  for (PriorityTier t : kAllTiers) {
    const auto& tt = tiers[static_cast<std::size_t>(t)];
    nlohmann::json tj;
    tj["task_periods"] = tt.task_periods;
    tj["violations"] = tt.violations;
    tj["evictions"] = tt.evictions;
    for (Resource r : {Resource::Cpu, Resource::Memory}) {
      tj[std::string(to_string(r))] =
          totals_json(tt.resources[static_cast<std::size_t>(r)], tt.task_periods);
    }
    j["tiers"][std::string(to_string(t))] = tj;
  }
  return j;
}

void write_series_csv(std::ostream& out, const SimReport& report) {
  out << "time,reserved_cpu,used_cpu,requested_cpu,reserved_memory,"
         "used_memory,requested_memory\n";
  for (const auto& row : report.series) {
    out << row.time;
    for (std::size_t r = 0; r < 2; ++r) {
      out << ',' << format_double(row.reserved[r]) << ','
          << format_double(row.used[r]) << ',' << format_double(row.requested[r]);
    }
    out << '\n';
  }
}

void write_comparison_csv(std::ostream& out, std::span<const SimReport> reports) {
  out << "policy,variant,reclaimed_cpu,reclaimed_memory,violation_count,"
         "violation_rate,evictions\n";
  for (const auto& r : reports) {
    out << r.policy.name << ',' << to_string(r.policy.variant) << ','
        << format_double(r.resources[0].reclaimed) << ','
        << format_double(r.resources[1].reclaimed) << ',' << r.violation_count
        << ',' << format_double(r.violation_rate) << ',' << r.evictions_triggered
        << '\n';
  }
}

}  // namespace ctrace
