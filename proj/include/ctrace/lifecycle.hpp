#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ctrace/model.hpp"

namespace ctrace {

struct Violation {
  std::size_t event_index = 0;  // into Lifecycle::events
  Micros time = 0;
  TaskState from = TaskState::Dead;
  EventKind kind = EventKind::Submit;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ScheduleSpan {
  Micros submit_time = 0;
  std::optional<Micros> schedule_time;
  std::optional<Micros> end_time;
  std::optional<TerminalClass> terminal;
  bool live = false;  // still pending or running at trace end

  std::optional<Micros> scheduling_time() const {
    if (!schedule_time) return std::nullopt;
    return *schedule_time - submit_time;
  }
  std::optional<Micros> execution_time() const {
    if (!schedule_time || !end_time || !terminal) return std::nullopt;
    return *end_time - *schedule_time;
  }

  friend bool operator==(const ScheduleSpan&, const ScheduleSpan&) = default;
};

struct LifecycleOptions {
  TransitionGraph graph = TransitionGraph::Corrected;
  // Tasks already alive at trace start show up with snapshot-flagged rows
  // and no Submit. When set, the replay starts such a task in the state its
  // first event implies instead of reporting a violation.
  bool seed_from_snapshot = false;
};

struct Lifecycle {
  TaskKey key;
  std::vector<TaskEvent> events;
  // Indices into events of the non-update events, in order.
  std::vector<std::size_t> collapsed;
  // Parallel to collapsed: classification of terminal events, absent for
  // non-terminals and for rejected terminals.
  std::vector<std::optional<TerminalClass>> terminals;
  // Parallel to collapsed: false when the event violated the graph.
  std::vector<bool> accepted;
  std::vector<Violation> violations;
  bool seeded = false;

  const TaskEvent& collapsed_event(std::size_t i) const {
    return events[collapsed[i]];
  }
};

// Removes update events; idempotent.
Lifecycle collapse_updates(Lifecycle life);

// Replays events through the transition graph, recording violations and
// per-event acceptance. Requires collapsed to be populated.
void validate(Lifecycle& life, const LifecycleOptions& options = {});

// Classifies each terminal in the collapsed sequence by the kind of its
// collapsed predecessor (on violation-free lifecycles this is the state the
// replay was in). Violating terminals and terminals without a Submit or
// Schedule predecessor classify as absent. Returns one entry per terminal,
// in order, and fills life.terminals.
std::vector<std::optional<TerminalClass>> classify_terminals(
    Lifecycle& life, const LifecycleOptions& options = {});

// One span per accepted Submit. Events after trace_end are ignored; spans
// without a terminal by then are live.
std::vector<ScheduleSpan> extract_spans(const Lifecycle& life,
                                        Micros trace_end);

// Full per-task analysis: collapse, validate, classify.
Lifecycle make_lifecycle(TaskKey key, std::vector<TaskEvent> events,
                         const LifecycleOptions& options = {});

// Groups a sorted event stream by key. One lifecycle per distinct key,
// ordered by key; each keeps its events in input order.
std::vector<Lifecycle> build_lifecycles(std::span<const TaskEvent> sorted,
                                        const LifecycleOptions& options = {});

// CSV writers (with header rows).
void write_violation_header(std::ostream& out);
void write_violations(std::ostream& out, const Lifecycle& life);
void write_span_header(std::ostream& out);
void write_spans(std::ostream& out, const TaskKey& key,
                 std::span<const ScheduleSpan> spans);

}  // namespace ctrace
