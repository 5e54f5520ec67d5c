#include "ctrace/synth.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "ctrace/error.hpp"

namespace ctrace {

namespace {

using Rng = std::mt19937_64;

double uniform01(Rng& rng) {
  // 53 random bits; avoids relying on distribution internals.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

std::size_t pick(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

double exponential(Rng& rng, double mean) {
  return -mean * std::log1p(-uniform01(rng));
}

Micros to_micros(double seconds) {
  return static_cast<Micros>(std::llround(seconds * 1e6));
}

// At least one microsecond, so events of a task never share a timestamp.
Micros positive_micros(double seconds) {
  return std::max<Micros>(1, to_micros(seconds));
}

double draw_exec_seconds(Rng& rng, const std::vector<ExecComponent>& mix,
                         double total_weight) {
  double u = uniform01(rng) * total_weight;
  const ExecComponent* chosen = &mix.back();
  for (const auto& c : mix) {
    if (u < c.weight) {
      chosen = &c;
      break;
    }
    u -= c.weight;
  }
  double lo = std::log(chosen->min_s);
  double hi = std::log(chosen->max_s);
  return std::exp(uniform(rng, lo, hi));
}

constexpr std::array<EventKind, 4> kDeathKinds = {
    EventKind::Fail, EventKind::Kill, EventKind::Lost, EventKind::Evict};
constexpr std::array<EventKind, 4> kRunningDeathKinds = {
    EventKind::Evict, EventKind::Fail, EventKind::Kill, EventKind::Lost};

struct TaskPlan {
  TaskKey key;
  Micros arrival = 0;
  int priority = 0;
  int scheduling_class = 0;
  double cpu_request = 0;
  double mem_request = 0;
  double exec_s = 0;
  std::optional<Micros> burst_resubmit;
};

class Generator {
 public:
  explicit Generator(const SynthConfig& config)
      : config_(config), rng_(config.seed) {
    horizon_ = to_micros(config.duration_s);
    usage_period_ = positive_micros(config.usage_period_s);
    total_exec_weight_ = 0;
    for (const auto& c : config.exec_mixture) total_exec_weight_ += c.weight;
  }

  SyntheticTrace run() {
    SyntheticTrace out;
    out.bundle.trace_end = horizon_;
    for (std::size_t m = 0; m < config_.machine_count; ++m) {
      out.bundle.machines.push_back(
          {m + 1, config_.machine_cpu, config_.machine_mem});
    }
    out.bundle.machine_capacity = total_capacity(out.bundle.machines);
    if (config_.task_count == 0) return out;

    std::vector<TaskPlan> plans = make_plans(out.truth);
    assign_bursts(plans, out.truth);
    for (const auto& plan : plans) emit_task(plan, out);

    sort_events(out.bundle.task_events);
    sort_usage(out.bundle.usage);
    return out;
  }

 private:
  std::vector<TaskPlan> make_plans(SynthTruth& truth) {
    const std::size_t n = config_.task_count;
    const std::size_t per_job = std::max<std::size_t>(1, config_.tasks_per_job);
    const std::size_t jobs = (n + per_job - 1) / per_job;

    // Exact tier counts over jobs, assigned by a seeded shuffle.
    std::vector<std::size_t> order(jobs);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = jobs; i > 1; --i) {
      std::swap(order[i - 1], order[pick(rng_, i)]);
    }
    auto n_prod = static_cast<std::size_t>(
        std::llround(config_.production_fraction * static_cast<double>(jobs)));
    auto n_gratis = static_cast<std::size_t>(
        std::llround(config_.gratis_fraction * static_cast<double>(jobs)));
    std::vector<int> job_priority(jobs);
    std::vector<int> job_class(jobs);
    for (std::size_t r = 0; r < jobs; ++r) {
      std::size_t j = order[r];
      if (r < n_prod) {
        job_priority[j] = 9 + static_cast<int>(pick(rng_, 3));
      } else if (r < n_prod + n_gratis) {
        job_priority[j] = static_cast<int>(pick(rng_, 2));
      } else {
        job_priority[j] = 2 + static_cast<int>(pick(rng_, 7));
      }
      job_class[j] = static_cast<int>(pick(rng_, 4));
    }

    std::vector<TaskPlan> plans(n);
    const double slot = config_.duration_s / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      TaskPlan& p = plans[i];
      std::size_t job = i / per_job;
      p.key = {1'000'000 + job, static_cast<std::uint32_t>(i % per_job)};
      // Stratified arrivals give a constant new-submission rate.
      p.arrival = std::min(
          horizon_ - 1,
          to_micros((static_cast<double>(i) + uniform01(rng_)) * slot));
      p.priority = job_priority[job];
      p.scheduling_class = job_class[job];
      double scale =
          p.priority >= 9 ? config_.production_request_scale : 1.0;
      p.cpu_request = std::min(
          1.0, scale * uniform(rng_, config_.cpu_request_min,
                               config_.cpu_request_max));
      p.mem_request = std::min(
          1.0, scale * uniform(rng_, config_.mem_request_min,
                               config_.mem_request_max));
      p.exec_s = draw_exec_seconds(rng_, config_.exec_mixture,
                                   total_exec_weight_);
      truth.sampled_exec_s.push_back(p.exec_s);
      if (p.exec_s < config_.class_threshold_s) {
        truth.short_tasks.push_back(p.key);
      }
    }
    return plans;
  }

  void assign_bursts(std::vector<TaskPlan>& plans, SynthTruth& truth) {
    std::vector<bool> taken(plans.size(), false);
    for (const auto& burst : config_.bursts) {
      Micros lo = to_micros(burst.center_s - burst.width_s);
      Micros hi = to_micros(burst.center_s + burst.width_s);
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < plans.size(); ++i) {
        if (!taken[i] && plans[i].arrival + 3 <= lo) eligible.push_back(i);
      }
      if (eligible.size() < burst.count) {
        throw ConfigError("resubmission burst at " +
                          std::to_string(burst.center_s) +
                          " s has too few earlier tasks");
      }
      std::vector<TaskKey> members;
      for (std::size_t k = 0; k < burst.count; ++k) {
        std::size_t j = k + pick(rng_, eligible.size() - k);
        std::swap(eligible[k], eligible[j]);
        TaskPlan& p = plans[eligible[k]];
        taken[eligible[k]] = true;
        p.burst_resubmit =
            lo + static_cast<Micros>(uniform01(rng_) *
                                     static_cast<double>(hi - lo));
        members.push_back(p.key);
      }
      std::sort(members.begin(), members.end());
      truth.burst_tasks.push_back(std::move(members));
    }
  }

  TaskEvent base_event(const TaskPlan& p, Micros t, EventKind kind) const {
    TaskEvent e;
    e.time = t;
    e.key = p.key;
    e.kind = kind;
    e.priority = p.priority;
    e.scheduling_class = p.scheduling_class;
    e.cpu_request = p.cpu_request;
    e.mem_request = p.mem_request;
    e.user = "u" + std::to_string(p.key.job_id % 97);
    return e;
  }

  // Emits an event if it falls inside the horizon.
  bool emit(SyntheticTrace& out, TaskEvent e) {
    if (e.time >= horizon_) return false;
    if (e.kind == EventKind::Finish) ++out.truth.finish_count;
    out.bundle.task_events.push_back(std::move(e));
    return true;
  }

  void emit_task(const TaskPlan& p, SyntheticTrace& out) {
    const double volatility =
        p.exec_s < config_.class_threshold_s
            ? config_.volatility_short.value_or(config_.volatility)
            : config_.volatility_long.value_or(config_.volatility);
    Micros submit = p.arrival;
    for (int attempt = 1;; ++attempt) {
      if (submit >= horizon_) return;
      const bool forced = attempt == 1 && p.burst_resubmit.has_value();
      emit(out, base_event(p, submit, EventKind::Submit));
      if (attempt == 1) ++out.truth.first_submit_count;
      TruthSpan span{p.key, submit, {}, {}, {}};

      Micros delay = positive_micros(exponential(rng_, config_.sched_delay_mean_s));
      if (forced) {
        delay = std::clamp<Micros>(delay, 1, (*p.burst_resubmit - submit) / 3);
      }
      if (uniform01(rng_) < config_.p_update && delay >= 2) {
        emit(out, base_event(p, submit + delay / 2, EventKind::UpdatePending));
      }

      Micros end = 0;
      bool finished = false;
      if (!forced && uniform01(rng_) < config_.p_pending_exit) {
        EventKind kind = kDeathKinds[pick(rng_, kDeathKinds.size())];
        end = submit + delay;
        if (emit(out, base_event(p, end, kind))) {
          span.end_time = end;
          span.terminal = classify_terminal(TaskState::Pending, kind);
        }
      } else {
        Micros sched = submit + delay;
        auto machine = 1 + pick(rng_, std::max<std::size_t>(1, config_.machine_count));
        TaskEvent s = base_event(p, sched, EventKind::Schedule);
        s.machine_id = machine;
        if (emit(out, s)) span.schedule_time = sched;

        bool finish = !forced && uniform01(rng_) < config_.p_finish;
        Micros run;
        if (forced) {
          Micros room = *p.burst_resubmit - sched;  // >= 2
          run = 1 + static_cast<Micros>(uniform01(rng_) *
                                        static_cast<double>(room - 2));
        } else if (finish) {
          run = positive_micros(p.exec_s);
        } else {
          run = std::max<Micros>(1, to_micros(uniform01(rng_) * p.exec_s));
        }
        if (uniform01(rng_) < config_.p_update && run >= 2) {
          TaskEvent u = base_event(p, sched + run / 2, EventKind::UpdateRunning);
          u.machine_id = machine;
          emit(out, u);
        }
        end = sched + run;
        EventKind kind =
            forced ? EventKind::Evict
                   : (finish ? EventKind::Finish
                             : kRunningDeathKinds[pick(rng_, kRunningDeathKinds.size())]);
        TaskEvent t = base_event(p, end, kind);
        t.machine_id = machine;
        if (emit(out, t)) {
          span.end_time = end;
          span.terminal = classify_terminal(TaskState::Running, kind);
        }
        if (config_.emit_usage && sched < horizon_) {
          emit_usage(p, machine, sched, std::min(end, horizon_), volatility,
                     out.bundle.usage);
        }
        finished = finish;
      }
      out.truth.spans.push_back(span);

      if (finished || end >= horizon_) return;
      if (forced) {
        submit = *p.burst_resubmit;
        continue;
      }
      if (attempt >= config_.max_attempts ||
          uniform01(rng_) >= config_.p_resubmit) {
        return;
      }
      submit = end + positive_micros(
                         exponential(rng_, config_.resubmit_delay_mean_s));
    }
  }

  void emit_usage(const TaskPlan& p, std::uint64_t machine, Micros start,
                  Micros stop, double volatility,
                  std::vector<UsageSample>& usage) {
    const double cpu_mean = p.cpu_request * config_.usage_level;
    const double mem_mean = p.mem_request * config_.usage_level;
    double cpu = cpu_mean * (1 + uniform(rng_, -volatility, volatility));
    double mem = mem_mean * (1 + uniform(rng_, -volatility, volatility));
    for (Micros k = start / usage_period_; k * usage_period_ < stop; ++k) {
      Micros ws = std::max(start, k * usage_period_);
      Micros we = std::min(stop, (k + 1) * usage_period_);
      if (we > ws) {
        if (usage.size() >= config_.max_usage_samples) {
          throw ConfigError("synthetic usage exceeds max_usage_samples");
        }
        usage.push_back({ws, we, p.key, machine, cpu, mem});
      }
      cpu *= 1 + uniform(rng_, -volatility, volatility);
      mem *= 1 + uniform(rng_, -volatility, volatility);
      cpu += config_.mean_reversion * (cpu_mean - cpu);
      mem += config_.mean_reversion * (mem_mean - mem);
    }
  }

  const SynthConfig& config_;
  Rng rng_;
  Micros horizon_ = 0;
  Micros usage_period_ = 0;
  double total_exec_weight_ = 0;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("synth config: " + message);
}

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void validate(const SynthConfig& c) {
  require(c.duration_s > 0, "duration_s must be positive");
  require(c.machine_count > 0, "machine_count must be positive");
  require(c.machine_cpu >= 0 && c.machine_mem >= 0,
          "machine capacities must be non-negative");
  require(is_probability(c.production_fraction) &&
              is_probability(c.gratis_fraction) &&
              c.production_fraction + c.gratis_fraction <= 1.0,
          "tier fractions must be probabilities summing to at most 1");
  require(c.sched_delay_mean_s >= 0 && c.resubmit_delay_mean_s >= 0,
          "delays must be non-negative");
  require(is_probability(c.p_pending_exit) && is_probability(c.p_finish) &&
              is_probability(c.p_resubmit) && is_probability(c.p_update),
          "probabilities must lie in [0, 1]");
  require(c.max_attempts >= 1, "max_attempts must be at least 1");
  require(!c.exec_mixture.empty(), "exec_mixture must not be empty");
  for (const auto& e : c.exec_mixture) {
    require(e.weight > 0 && e.min_s > 0 && e.min_s <= e.max_s,
            "exec_mixture components need weight > 0 and 0 < min <= max");
  }
  std::size_t burst_total = 0;
  for (const auto& b : c.bursts) {
    require(b.width_s >= 0, "burst width must be non-negative");
    require(b.center_s - b.width_s >= 0 &&
                b.center_s + b.width_s < c.duration_s,
            "burst window must lie inside the trace duration");
    burst_total += b.count;
  }
  require(burst_total <= c.task_count, "bursts need more tasks than exist");
  require(c.usage_period_s > 0 && c.usage_period_s <= 300,
          "usage_period_s must lie in (0, 300]");
  require(c.cpu_request_min >= 0 && c.cpu_request_min <= c.cpu_request_max &&
              c.mem_request_min >= 0 && c.mem_request_min <= c.mem_request_max,
          "request ranges must be non-negative and ordered");
  require(c.production_request_scale >= 0 && c.usage_level >= 0,
          "scales must be non-negative");
  auto vol_ok = [](double v) { return v >= 0 && v < 1; };
  require(vol_ok(c.volatility) && vol_ok(c.volatility_short.value_or(0)) &&
              vol_ok(c.volatility_long.value_or(0)),
          "volatility must lie in [0, 1)");
  require(is_probability(c.mean_reversion), "mean_reversion must lie in [0, 1]");
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("synth config " + path.string() + ": " + e.what());
  }
  if (!root.IsMap()) throw ConfigError("synth config must be a mapping");
  SynthConfig c;
  try {
    for (const auto& item : root) {
      const auto key = item.first.as<std::string>();
      const YAML::Node& v = item.second;
      if (key == "seed") c.seed = v.as<std::uint64_t>();
      else if (key == "task_count") c.task_count = v.as<std::size_t>();
      else if (key == "duration_s") c.duration_s = v.as<double>();
      else if (key == "tasks_per_job") c.tasks_per_job = v.as<std::size_t>();
      else if (key == "machine_count") c.machine_count = v.as<std::size_t>();
      else if (key == "machine_cpu") c.machine_cpu = v.as<double>();
      else if (key == "machine_mem") c.machine_mem = v.as<double>();
      else if (key == "production_fraction") c.production_fraction = v.as<double>();
      else if (key == "gratis_fraction") c.gratis_fraction = v.as<double>();
      else if (key == "sched_delay_mean_s") c.sched_delay_mean_s = v.as<double>();
      else if (key == "p_pending_exit") c.p_pending_exit = v.as<double>();
      else if (key == "p_finish") c.p_finish = v.as<double>();
      else if (key == "p_resubmit") c.p_resubmit = v.as<double>();
      else if (key == "resubmit_delay_mean_s") c.resubmit_delay_mean_s = v.as<double>();
      else if (key == "max_attempts") c.max_attempts = v.as<int>();
      else if (key == "p_update") c.p_update = v.as<double>();
      else if (key == "emit_usage") c.emit_usage = v.as<bool>();
      else if (key == "usage_period_s") c.usage_period_s = v.as<double>();
      else if (key == "cpu_request_min") c.cpu_request_min = v.as<double>();
      else if (key == "cpu_request_max") c.cpu_request_max = v.as<double>();
      else if (key == "mem_request_min") c.mem_request_min = v.as<double>();
      else if (key == "mem_request_max") c.mem_request_max = v.as<double>();
      else if (key == "production_request_scale") c.production_request_scale = v.as<double>();
      else if (key == "usage_level") c.usage_level = v.as<double>();
      else if (key == "volatility") c.volatility = v.as<double>();
      else if (key == "volatility_short") c.volatility_short = v.as<double>();
      else if (key == "volatility_long") c.volatility_long = v.as<double>();
      else if (key == "class_threshold_s") c.class_threshold_s = v.as<double>();
      else if (key == "mean_reversion") c.mean_reversion = v.as<double>();
      else if (key == "max_usage_samples") c.max_usage_samples = v.as<std::size_t>();
      else if (key == "exec_mixture") {
        c.exec_mixture.clear();
        for (const auto& comp : v) {
          c.exec_mixture.push_back({comp["weight"].as<double>(),
                                    comp["min"].as<double>(),
                                    comp["max"].as<double>()});
        }
      } else if (key == "bursts") {
        c.bursts.clear();
        for (const auto& b : v) {
          c.bursts.push_back({b["center"].as<double>(), b["width"].as<double>(),
                              b["count"].as<std::size_t>()});
        }
      } else {
        throw ConfigError("synth config: unknown key '" + key + "'");
      }
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError("synth config " + path.string() + ": " + e.what());
  }
  validate(c);
  return c;
}

SyntheticTrace generate_synthetic(const SynthConfig& config) {
  validate(config);
  return Generator(config).run();
}

void write_bundle(const TraceBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };
  auto events = open("task_events.csv");
  write_task_events(events, bundle.task_events);
  auto usage = open("task_usage.csv");
  write_usage(usage, bundle.usage);
  auto machines = open("machine_events.csv");
  write_machines(machines, bundle.machines);
}

}  // namespace ctrace
