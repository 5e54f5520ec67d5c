#include "ctrace/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctrace/aggregate.hpp"
#include "ctrace/error.hpp"
#include "ctrace/lifecycle.hpp"
#include "ctrace/manifest.hpp"
#include "ctrace/pipeline.hpp"
#include "ctrace/reservation.hpp"
#include "ctrace/synth.hpp"
#include "ctrace/text.hpp"
#include "ctrace/utilization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ctrace {

TraceBundle load_bundle(const std::vector<fs::path>& events,
                        const std::vector<fs::path>& usage,
                        const fs::path& machines,
                        std::vector<Diagnostic>& diagnostics,
                        const TaskEventColumns& event_columns,
                        const UsageColumns& usage_columns) {
  TraceBundle b;
  for (const auto& p : events) {
    auto part = read_task_events(p, diagnostics, event_columns);
    b.task_events.insert(b.task_events.end(), part.begin(), part.end());
  }
  sort_events(b.task_events);
  for (const auto& p : usage) {
    auto part = read_usage(p, diagnostics, usage_columns);
    b.usage.insert(b.usage.end(), part.begin(), part.end());
  }
  sort_usage(b.usage);
  if (!machines.empty()) {
    b.machines = read_machines(machines, diagnostics);
    b.machine_capacity = total_capacity(b.machines);
  }
  for (const auto& e : b.task_events) b.trace_end = std::max(b.trace_end, e.time);
  for (const auto& s : b.usage) b.trace_end = std::max(b.trace_end, s.window_end);
  return b;
}

namespace {

struct Common {
  std::string out;
  unsigned workers = 1;
  std::string graph = "corrected";
  bool seed_snapshot = false;
  std::string columns;
  std::size_t memory_budget = 20'000'000;
};

struct Run {
  fs::path dir;
  RunManifest manifest;

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InputError("cannot write " + (dir / name).string());
    manifest.outputs.push_back(name);
    return f;
  }

  void write_json(const std::string& name, const json& j) {
    auto f = open(name);
    f << j.dump(2) << '\n';
  }
};

std::vector<std::string> path_strings(const std::vector<std::string>& v) {
  return v;
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) {
  return {v.begin(), v.end()};
}

TransitionGraph parse_graph(const std::string& s) {
  if (s == "corrected") return TransitionGraph::Corrected;
  if (s == "documented") return TransitionGraph::Documented;
  throw ConfigError("unknown graph '" + s + "'");
}

TaskEventColumns event_columns(const Common& c) {
  return c.columns.empty() ? TaskEventColumns{}
                           : load_task_event_columns(c.columns);
}

AnalysisOptions analysis_options(const Common& c, std::optional<double> trace_end_s,
                                 bool keep) {
  AnalysisOptions o;
  o.lifecycle.graph = parse_graph(c.graph);
  o.lifecycle.seed_from_snapshot = c.seed_snapshot;
  o.workers = std::max(1u, c.workers);
  o.memory_budget_events = c.memory_budget;
  o.keep_task_outputs = keep;
  if (trace_end_s) {
    o.trace_end = static_cast<Micros>(std::llround(*trace_end_s * 1e6));
  }
  return o;
}

json common_params(const Common& c) {
  return {{"workers", c.workers},
          {"graph", c.graph},
          {"seed_snapshot", c.seed_snapshot},
          {"columns", c.columns},
          {"memory_budget_events", c.memory_budget}};
}

void write_cdf(std::ostream& out, const Cdf& cdf) {
  out << "x,value\n";
  for (const auto& p : cdf.points) {
    out << format_double(p.x) << ',' << format_double(p.f) << '\n';
  }
}

void write_series(std::ostream& out, const Series& s) {
  out << "time,value\n";
  for (const auto& p : s.points) {
    out << p.time << ',' << format_double(p.value) << '\n';
  }
}

void write_diagnostics(std::ostream& out, const std::vector<Diagnostic>& diags) {
  out << "source,line,message\n";
  for (const auto& d : diags) {
    out << d.source << ',' << d.line << ',' << d.message << '\n';
  }
}

void report_diagnostics(const std::vector<Diagnostic>& diags) {
  if (!diags.empty()) {
    std::cerr << "skipped " << diags.size() << " malformed rows; first: "
              << format_diagnostic(diags.front()) << '\n';
  }
}

json analysis_summary(const TraceAnalysis& a) {
  const auto& agg = a.aggregator;
  return {{"events", a.events},
          {"malformed_rows", a.diagnostics.size()},
          {"distinct_tasks", agg.distinct_tasks()},
          {"completed_tasks", agg.completed_tasks()},
          {"violations", agg.violation_count()},
          {"tasks_with_violations", agg.tasks_with_violations()},
          {"seeded_tasks", agg.seeded_tasks()},
          {"snapshot_flagged_events", agg.snapshot_flagged_events()},
          {"spilled", a.spilled}};
}

void write_task_violations(std::ostream& out, const TraceAnalysis& a) {
  write_violation_header(out);
  for (const auto& t : a.tasks) {
    for (const auto& v : t.violations) {
      out << t.key.job_id << ',' << t.key.task_index << ',' << v.event_index
          << ',' << v.time << ',' << to_string(v.from) << ','
          << to_string(v.kind) << '\n';
    }
  }
}

// validate

struct ValidateArgs {
  std::vector<std::string> events;
};

void cmd_validate(Run& run, const Common& c, const ValidateArgs& a) {
  auto options = analysis_options(c, std::nullopt, true);
  std::cerr << "validating " << a.events.size() << " file(s)\n";
  auto paths = to_paths(a.events);
  auto analysis = analyze_files(paths, event_columns(c), options);
  run.manifest.inputs = path_strings(a.events);
  run.manifest.parameters = common_params(c);
  run.manifest.in_memory = false;
  {
    auto f = run.open("diagnostics.csv");
    write_diagnostics(f, analysis.diagnostics);
  }
  {
    auto f = run.open("violations.csv");
    write_task_violations(f, analysis);
  }
  run.write_json("validate.json", analysis_summary(analysis));
}

// lifecycle

struct LifecycleArgs {
  std::vector<std::string> events;
  std::optional<double> trace_end_s;
};

void cmd_lifecycle(Run& run, const Common& c, const LifecycleArgs& a) {
  auto options = analysis_options(c, a.trace_end_s, true);
  auto paths = to_paths(a.events);
  auto analysis = analyze_files(paths, event_columns(c), options);
  report_diagnostics(analysis.diagnostics);
  run.manifest.inputs = path_strings(a.events);
  run.manifest.parameters = common_params(c);
  run.manifest.parameters["trace_end_s"] =
      a.trace_end_s ? json(*a.trace_end_s) : json(nullptr);
  {
    auto f = run.open("spans.csv");
    write_span_header(f);
    for (const auto& t : analysis.tasks) write_spans(f, t.key, t.spans);
  }
  {
    auto f = run.open("violations.csv");
    write_task_violations(f, analysis);
  }
}

// aggregate / report

struct AggregateArgs {
  std::vector<std::string> events;
  std::optional<double> trace_end_s;
  double window_s = 3600;
  double lump_threshold = 0.02;
  double tail_fraction = 0.1;
};

struct Aggregates {
  TraceAnalysis analysis;
  EventCdfs cdfs;
  std::optional<WeightedCdfs> weighted;
  Series queue;
  Series running;
  Series exec_average;
  Series sched_average;
};

Aggregates compute_aggregates(const Common& c, const AggregateArgs& a) {
  if (!(a.window_s > 0)) throw ConfigError("window must be positive");
  auto options = analysis_options(c, a.trace_end_s, false);
  auto paths = to_paths(a.events);
  Aggregates g;
  g.analysis = analyze_files(paths, event_columns(c), options);
  report_diagnostics(g.analysis.diagnostics);
  const auto& agg = g.analysis.aggregator;
  g.cdfs = event_cdfs(agg.timeline());
  try {
    g.weighted = weighted_cdfs(g.cdfs);
  } catch (const UndefinedWeightError& e) {
    std::cerr << "weighted curves omitted: " << e.what() << '\n';
  }
  g.queue = queue_series(agg.timeline());
  g.running = running_series(agg.timeline());
  const auto window = static_cast<std::int64_t>(std::llround(a.window_s * 1e6));
  g.exec_average = moving_average(agg.execution_samples(), window);
  g.sched_average = moving_average(agg.scheduling_samples(), window);
  return g;
}

json aggregate_params(const Common& c, const AggregateArgs& a) {
  json p = common_params(c);
  p["trace_end_s"] = a.trace_end_s ? json(*a.trace_end_s) : json(nullptr);
  p["window_s"] = a.window_s;
  return p;
}

void cmd_aggregate(Run& run, const Common& c, const AggregateArgs& a) {
  auto g = compute_aggregates(c, a);
  run.manifest.inputs = path_strings(a.events);
  run.manifest.parameters = aggregate_params(c, a);
  auto cdf_file = [&](const std::string& name, const Cdf& cdf) {
    auto f = run.open(name);
    write_cdf(f, cdf);
  };
  auto series_file = [&](const std::string& name, const Series& s) {
    auto f = run.open(name);
    write_series(f, s);
  };
  cdf_file("cdf_new_submissions.csv", g.cdfs.new_submissions);
  cdf_file("cdf_completions.csv", g.cdfs.completions);
  cdf_file("cdf_submissions.csv", g.cdfs.submissions);
  cdf_file("cdf_schedules.csv", g.cdfs.schedules);
  if (g.weighted) {
    cdf_file("weighted_completions.csv", g.weighted->completions);
    cdf_file("weighted_submissions.csv", g.weighted->submissions);
    cdf_file("weighted_schedules.csv", g.weighted->schedules);
  }
  series_file("queue.csv", g.queue);
  series_file("running.csv", g.running);
  series_file("exec_moving_average.csv", g.exec_average);
  series_file("sched_moving_average.csv", g.sched_average);
  const auto spans = g.analysis.aggregator.spans();
  cdf_file("exec_time_cdf.csv", exec_time_cdf(spans, false));
  cdf_file("exec_time_cdf_finished.csv", exec_time_cdf(spans, true));

  json j = analysis_summary(g.analysis);
  const auto& t = g.cdfs.totals;
  j["totals"] = {{"new_submissions", t.new_submissions},
                 {"completions", t.completions},
                 {"submissions", t.submissions},
                 {"schedules", t.schedules}};
  if (g.weighted) {
    j["weights"] = {{"completions", g.weighted->completion_weight},
                    {"submissions", g.weighted->submission_weight},
                    {"schedules", g.weighted->schedule_weight}};
  } else {
    j["weights"] = nullptr;
  }
  j["queue_negative"] = g.queue.negative;
  j["running_negative"] = g.running.negative;
  j["time_unit"] = "microseconds";
  j["duration_unit"] = "seconds";
  run.write_json("aggregate.json", j);
}

void cmd_report(Run& run, const Common& c, const AggregateArgs& a) {
  auto g = compute_aggregates(c, a);
  run.manifest.inputs = path_strings(a.events);
  json p = aggregate_params(c, a);
  p["lump_threshold"] = a.lump_threshold;
  p["tail_fraction"] = a.tail_fraction;
  run.manifest.parameters = p;
  ReportOptions ro;
  ro.lump_threshold = a.lump_threshold;
  ro.tail_fraction = a.tail_fraction;
  ro.window = static_cast<std::int64_t>(std::llround(a.window_s * 1e6));
  ObservationInputs in;
  in.cdfs = &g.cdfs;
  in.weighted = g.weighted ? &*g.weighted : nullptr;
  in.queue = &g.queue;
  in.running = &g.running;
  in.exec_average = &g.exec_average;
  in.sched_average = &g.sched_average;
  in.aggregator = &g.analysis.aggregator;
  run.write_json("report.json", observation_report(in, ro));
}

// utilization

struct UtilArgs {
  std::vector<std::string> usage;
  std::vector<std::string> events;
  std::string machines;
  double period_s = 300;
  std::string resource = "both";
  std::string scope = "machine";
  std::string mode = "usage";
  bool absolute = false;
  bool exclude_churn = false;
};

std::vector<Resource> parse_resources(const std::string& s) {
  if (s == "cpu") return {Resource::Cpu};
  if (s == "memory") return {Resource::Memory};
  if (s == "both") return {Resource::Cpu, Resource::Memory};
  throw ConfigError("unknown resource '" + s + "'");
}

void cmd_utilization(Run& run, const Common& c, const UtilArgs& a) {
  if (auto w = sampling_period_warning(a.period_s)) std::cerr << "warning: " << *w << '\n';
  ScopeKind scope;
  if (a.scope == "machine") scope = ScopeKind::Machine;
  else if (a.scope == "task") scope = ScopeKind::Task;
  else throw ConfigError("change scope must be machine or task");
  UtilOptions uo;
  if (a.mode == "usage") uo.mode = UsageMode::Usage;
  else if (a.mode == "allocation") uo.mode = UsageMode::Allocation;
  else throw ConfigError("unknown mode '" + a.mode + "'");
  const auto resources = parse_resources(a.resource);

  std::vector<Diagnostic> diags;
  auto bundle = load_bundle(to_paths(a.events), to_paths(a.usage),
                            a.machines, diags, event_columns(c));
  report_diagnostics(diags);
  const auto attrs = task_attributes(bundle.task_events);
  uo.capacity = 0;

  std::vector<std::string> inputs = a.usage;
  inputs.insert(inputs.end(), a.events.begin(), a.events.end());
  if (!a.machines.empty()) inputs.push_back(a.machines);
  run.manifest.inputs = inputs;
  json p = common_params(c);
  p["period_s"] = a.period_s;
  p["resource"] = a.resource;
  p["scope"] = a.scope;
  p["mode"] = a.mode;
  p["change"] = a.absolute ? "absolute" : "relative";
  p["exclude_churn"] = a.exclude_churn;
  p["epsilon"] = ChangeOptions{}.epsilon;
  run.manifest.parameters = p;
  run.manifest.in_memory = true;

  json summary;
  summary["native_resolution_s"] = to_seconds(native_resolution(bundle.usage));
  summary["time_unit"] = "microseconds";
  for (Resource r : resources) {
    const std::string rn(to_string(r));
    uo.capacity = r == Resource::Cpu ? bundle.machine_capacity.cpu
                                     : bundle.machine_capacity.mem;
    auto ts = tier_series(bundle.usage, r, a.period_s, attrs, uo);
    {
      auto f = run.open("util_" + rn + ".csv");
      f << "time,cluster,gratis,middle,production,unknown\n";
      for (std::size_t i = 0; i < ts.cluster.points.size(); ++i) {
        f << ts.cluster.points[i].time << ','
          << format_double(ts.cluster.points[i].value);
        for (const auto& t : ts.tiers) f << ',' << format_double(t.points[i].value);
        f << ',' << format_double(ts.unknown.points[i].value) << '\n';
      }
    }
    ChangeOptions co;
    co.mode = a.absolute ? ChangeMode::Absolute : ChangeMode::Relative;
    co.exclude_churn = a.exclude_churn;
    auto tracks = scope_tracks(bundle.usage, scope, r, a.period_s);
    auto dist = change_distribution(tracks, r, a.period_s, co);
    {
      auto f = run.open("change_cdf_" + rn + ".csv");
      write_cdf(f, dist.cdf);
    }
    json q;
    for (double level : {0.5, 0.9, 0.95, 0.99}) {
      q[format_double(level)] = dist.quantile(level);
    }
    summary["resources"][rn] = {{"capacity", uo.capacity},
                                {"change_samples", dist.samples.size()},
                                {"quantiles", q}};
  }
  run.write_json("utilization.json", summary);
}

// simulate

struct SimulateArgs {
  std::vector<std::string> events;
  std::vector<std::string> usage;
  std::string machines;
  std::vector<std::string> policies;
  std::optional<double> period_s;
};

void cmd_simulate(Run& run, const Common& c, const SimulateArgs& a) {
  std::vector<ReservationPolicy> policies;
  for (const auto& p : a.policies) {
    auto policy = load_policy(p);
    if (a.period_s) policy.sampling_period_s = *a.period_s;
    validate(policy);
    if (auto w = sampling_period_warning(policy.sampling_period_s)) {
      std::cerr << "warning: " << *w << '\n';
    }
    policies.push_back(policy);
  }
  for (std::size_t i = 0; i < policies.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (policies[i].name == policies[j].name) {
        policies[i].name += "_" + std::to_string(i);
      }
    }
  }
  std::vector<Diagnostic> diags;
  auto bundle = load_bundle(to_paths(a.events), to_paths(a.usage), a.machines,
                            diags, event_columns(c));
  report_diagnostics(diags);

  std::vector<std::string> inputs = a.events;
  inputs.insert(inputs.end(), a.usage.begin(), a.usage.end());
  if (!a.machines.empty()) inputs.push_back(a.machines);
  inputs.insert(inputs.end(), a.policies.begin(), a.policies.end());
  run.manifest.inputs = inputs;
  json p = common_params(c);
  p["period_override_s"] = a.period_s ? json(*a.period_s) : json(nullptr);
  p["policies"] = json::array();
  for (const auto& pol : policies) p["policies"].push_back(pol.to_json());
  run.manifest.parameters = p;
  run.manifest.in_memory = true;

  SimOptions so;
  so.workers = std::max(1u, c.workers);
  std::vector<SimReport> reports;
  for (const auto& pol : policies) {
    std::cerr << "simulating " << pol.name << '\n';
    reports.push_back(simulate(bundle, pol, so));
  }
  for (const auto& r : reports) {
    run.write_json("sim_" + r.policy.name + ".json", r.to_json());
    auto f = run.open("sim_" + r.policy.name + "_series.csv");
    write_series_csv(f, r);
  }
  std::stable_sort(reports.begin(), reports.end(), [](const SimReport& x, const SimReport& y) {
    if (x.resources[0].reclaimed != y.resources[0].reclaimed) {
      return x.resources[0].reclaimed > y.resources[0].reclaimed;
    }
    return x.resources[1].reclaimed > y.resources[1].reclaimed;
  });
  auto f = run.open("comparison.csv");
  write_comparison_csv(f, reports);
}

// synth

struct SynthArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void cmd_synth(Run& run, const Common& c, const SynthArgs& a) {
  SynthConfig config;
  if (!a.config.empty()) config = load_synth_config(a.config);
  if (a.seed) config.seed = *a.seed;
  auto trace = generate_synthetic(config);
  write_bundle(trace.bundle, run.dir);
  for (const char* name : {"task_events.csv", "task_usage.csv", "machine_events.csv"}) {
    run.manifest.outputs.push_back(name);
  }
  json bursts = json::array();
  for (const auto& b : trace.truth.burst_tasks) bursts.push_back(b.size());
  json truth = {{"finish_count", trace.truth.finish_count},
                {"first_submit_count", trace.truth.first_submit_count},
                {"burst_tasks", bursts},
                {"short_tasks", trace.truth.short_tasks.size()},
                {"events", trace.bundle.task_events.size()},
                {"usage_samples", trace.bundle.usage.size()},
                {"trace_end", trace.bundle.trace_end}};
  run.write_json("truth.json", truth);
  if (!a.config.empty()) run.manifest.inputs = {a.config};
  run.manifest.seeds = {config.seed};
  json p = common_params(c);
  p["seed"] = config.seed;
  p["task_count"] = config.task_count;
  p["duration_s"] = config.duration_s;
  p["tasks_per_job"] = config.tasks_per_job;
  p["machine_count"] = config.machine_count;
  p["usage_period_s"] = config.usage_period_s;
  p["emit_usage"] = config.emit_usage;
  p["volatility"] = config.volatility;
  p["bursts"] = json::array();
  for (const auto& b : config.bursts) {
    p["bursts"].push_back({{"center_s", b.center_s}, {"width_s", b.width_s},
                           {"count", b.count}});
  }
  run.manifest.parameters = p;
  run.manifest.in_memory = true;
}

int guarded(const std::string& name, const std::string& out,
            const std::function<void(Run&)>& body) {
  try {
    Run run;
    run.dir = out;
    fs::create_directories(run.dir);
    run.manifest.subcommand = name;
    body(run);
    run.manifest.write(run.dir);
    std::cout << name << ": ok, " << run.manifest.outputs.size()
              << " artifacts in " << run.dir.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out", c.out, "Output directory")->required();
  sub->add_option("--workers", c.workers, "Worker threads")
      ->check(CLI::Range(1u, 1024u));
  sub->add_option("--graph", c.graph, "Transition graph: corrected or documented");
  sub->add_flag("--seed-snapshot", c.seed_snapshot,
                "Start tasks alive at trace start in their implied state");
  sub->add_option("--columns", c.columns, "Task-event column map (YAML)");
  sub->add_option("--memory-budget", c.memory_budget,
                  "Events held in memory before spilling to disk");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Cluster trace lifecycle, utilization and reservation analysis", "ctrace"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common common;
  ValidateArgs va;
  LifecycleArgs la;
  AggregateArgs aa;
  AggregateArgs ra;
  UtilArgs ua;
  SimulateArgs sa;
  SynthArgs ya;

  auto* v = app.add_subcommand("validate", "Parse diagnostics and lifecycle violations");
  add_common(v, common);
  v->add_option("--events", va.events, "task_events files")->required();

  auto* l = app.add_subcommand("lifecycle", "Schedule spans and violations per task");
  add_common(l, common);
  l->add_option("--events", la.events, "task_events files")->required();
  l->add_option("--trace-end", la.trace_end_s, "Trace end (seconds)");

  auto* g = app.add_subcommand("aggregate", "Event CDFs, queue series and duration curves");
  add_common(g, common);
  g->add_option("--events", aa.events, "task_events files")->required();
  g->add_option("--trace-end", aa.trace_end_s, "Trace end (seconds)");
  g->add_option("--window", aa.window_s, "Moving-average window (seconds)");

  auto* u = app.add_subcommand("utilization", "Utilization series and change distributions");
  add_common(u, common);
  u->add_option("--usage", ua.usage, "task_usage files")->required();
  u->add_option("--events", ua.events, "task_events files (priorities, requests)");
  u->add_option("--machines", ua.machines, "machine_events file");
  u->add_option("--period", ua.period_s, "Sampling period (seconds)");
  u->add_option("--resource", ua.resource, "cpu, memory or both");
  u->add_option("--scope", ua.scope, "Change scope: machine or task");
  u->add_option("--mode", ua.mode, "usage or allocation");
  u->add_flag("--absolute", ua.absolute, "Absolute instead of relative change");
  u->add_flag("--exclude-churn", ua.exclude_churn,
              "Drop period pairs where the task set changes");

  auto* s = app.add_subcommand("simulate", "Replay reservation policies");
  add_common(s, common);
  s->add_option("--events", sa.events, "task_events files")->required();
  s->add_option("--usage", sa.usage, "task_usage files")->required();
  s->add_option("--machines", sa.machines, "machine_events file");
  s->add_option("--policy", sa.policies, "Policy files (YAML)")->required();
  s->add_option("--period", sa.period_s, "Sampling period override (seconds)");

  auto* y = app.add_subcommand("synth", "Generate a synthetic trace bundle");
  add_common(y, common);
  y->add_option("--config", ya.config, "Generator config (YAML)");
  y->add_option("--seed", ya.seed, "Seed override");

  auto* r = app.add_subcommand("report", "Summary report");
  add_common(r, common);
  r->add_option("--events", ra.events, "task_events files")->required();
  r->add_option("--trace-end", ra.trace_end_s, "Trace end (seconds)");
  r->add_option("--window", ra.window_s, "Moving-average window (seconds)");
  r->add_option("--lump-threshold", ra.lump_threshold, "Lump detection threshold");
  r->add_option("--tail-fraction", ra.tail_fraction, "Tail used for slope estimates");

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("ctrace");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*v) return guarded("validate", common.out, [&](Run& run) { cmd_validate(run, common, va); });
  if (*l) return guarded("lifecycle", common.out, [&](Run& run) { cmd_lifecycle(run, common, la); });
  if (*g) return guarded("aggregate", common.out, [&](Run& run) { cmd_aggregate(run, common, aa); });
  if (*u) return guarded("utilization", common.out, [&](Run& run) { cmd_utilization(run, common, ua); });
  if (*s) return guarded("simulate", common.out, [&](Run& run) { cmd_simulate(run, common, sa); });
  if (*y) return guarded("synth", common.out, [&](Run& run) { cmd_synth(run, common, ya); });
  if (*r) return guarded("report", common.out, [&](Run& run) { cmd_report(run, common, ra); });
  return 2;
}

}  // namespace ctrace
