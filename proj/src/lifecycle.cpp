#include "ctrace/lifecycle.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_map>

namespace ctrace {

namespace {

std::optional<TaskState> snapshot_state(EventKind kind) {
  switch (kind) {
    case EventKind::Schedule:
    case EventKind::UpdatePending:
      return TaskState::Pending;
    case EventKind::Submit:
      return std::nullopt;
    default:
      return TaskState::Running;
  }
}

void replay(Lifecycle& life, const LifecycleOptions& options) {
  life.violations.clear();
  life.seeded = false;
  life.accepted.assign(life.collapsed.size(), false);
  life.terminals.assign(life.collapsed.size(), std::nullopt);

  // A task that has not been submitted behaves like a dead one: Submit is
  // the only way in.
  TaskState state = TaskState::Dead;
  if (options.seed_from_snapshot && !life.events.empty()) {
    const TaskEvent& first = life.events.front();
    if (first.missing_info &&
        !legal_transition(state, first.kind, options.graph)) {
      if (auto seeded = snapshot_state(first.kind)) {
        state = *seeded;
        life.seeded = true;
      }
    }
  }

  std::size_t c = 0;  // position in collapsed
  for (std::size_t i = 0; i < life.events.size(); ++i) {
    const TaskEvent& e = life.events[i];
    const bool in_collapsed = c < life.collapsed.size() && life.collapsed[c] == i;
    auto next = legal_transition(state, e.kind, options.graph);
    if (!next) {
      life.violations.push_back({i, e.time, state, e.kind});
    } else if (in_collapsed) {
      life.accepted[c] = true;
      if (is_terminal(e.kind)) life.terminals[c] = classify_terminal(state, e.kind);
    }
    if (next) state = *next;
    if (in_collapsed) ++c;
  }
}

}  // namespace

Lifecycle collapse_updates(Lifecycle life) {
  life.collapsed.clear();
  for (std::size_t i = 0; i < life.events.size(); ++i) {
    if (!is_update(life.events[i].kind)) life.collapsed.push_back(i);
  }
  life.accepted.assign(life.collapsed.size(), true);
  life.terminals.assign(life.collapsed.size(), std::nullopt);
  return life;
}

void validate(Lifecycle& life, const LifecycleOptions& options) {
  replay(life, options);
}

std::vector<std::optional<TerminalClass>> classify_terminals(
    Lifecycle& life, const LifecycleOptions& options) {
  replay(life, options);
  std::vector<std::optional<TerminalClass>> out;
  for (std::size_t c = 0; c < life.collapsed.size(); ++c) {
    if (is_terminal(life.collapsed_event(c).kind)) {
      out.push_back(life.terminals[c]);
    }
  }
  return out;
}

std::vector<ScheduleSpan> extract_spans(const Lifecycle& life,
                                        Micros trace_end) {
  std::vector<ScheduleSpan> spans;
  bool open = false;
  for (std::size_t c = 0; c < life.collapsed.size(); ++c) {
    const TaskEvent& e = life.collapsed_event(c);
    if (e.time > trace_end) break;
    if (!life.accepted[c]) continue;
    if (e.kind == EventKind::Submit) {
      spans.push_back({e.time, {}, {}, {}, true});
      open = true;
    } else if (!open) {
      continue;  // snapshot-seeded prefix without a Submit
    } else if (e.kind == EventKind::Schedule) {
      spans.back().schedule_time = e.time;
    } else if (life.terminals[c]) {
      spans.back().end_time = e.time;
      spans.back().terminal = life.terminals[c];
      spans.back().live = false;
      open = false;
    }
  }
  return spans;
}

Lifecycle make_lifecycle(TaskKey key, std::vector<TaskEvent> events,
                         const LifecycleOptions& options) {
  Lifecycle life;
  life.key = key;
  life.events = std::move(events);
  life = collapse_updates(std::move(life));
  replay(life, options);
  return life;
}

std::vector<Lifecycle> build_lifecycles(std::span<const TaskEvent> sorted,
                                        const LifecycleOptions& options) {
  std::unordered_map<TaskKey, std::vector<TaskEvent>, TaskKeyHash> groups;
  for (const auto& e : sorted) groups[e.key].push_back(e);
  std::vector<TaskKey> keys;
  keys.reserve(groups.size());
  for (const auto& [key, _] : groups) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  std::vector<Lifecycle> out;
  out.reserve(keys.size());
  for (const auto& key : keys) {
    out.push_back(make_lifecycle(key, std::move(groups[key]), options));
  }
  return out;
}

void write_violation_header(std::ostream& out) {
  out << "job_id,task_index,event_index,time,from_state,kind\n";
}

void write_violations(std::ostream& out, const Lifecycle& life) {
  for (const auto& v : life.violations) {
    out << life.key.job_id << ',' << life.key.task_index << ','
        << v.event_index << ',' << v.time << ',' << to_string(v.from) << ','
        << to_string(v.kind) << '\n';
  }
}

void write_span_header(std::ostream& out) {
  out << "job_id,task_index,submit_time,schedule_time,end_time,terminal,live\n";
}

void write_spans(std::ostream& out, const TaskKey& key,
                 std::span<const ScheduleSpan> spans) {
  for (const auto& s : spans) {
    out << key.job_id << ',' << key.task_index << ',' << s.submit_time << ',';
    if (s.schedule_time) out << *s.schedule_time;
    out << ',';
    if (s.end_time) out << *s.end_time;
    out << ',';
    if (s.terminal) out << to_string(*s.terminal);
    out << ',' << (s.live ? 1 : 0) << '\n';
  }
}

}  // namespace ctrace
