#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ctrace {

// Trace time in microseconds since trace start.
using Micros = std::uint64_t;

inline constexpr Micros kMicrosPerSecond = 1'000'000;

constexpr double to_seconds(Micros t) { return static_cast<double>(t) / 1e6; }

struct TaskKey {
  std::uint64_t job_id = 0;
  std::uint32_t task_index = 0;

  friend constexpr auto operator<=>(const TaskKey&, const TaskKey&) = default;
};

struct TaskKeyHash {
  std::size_t operator()(const TaskKey& key) const noexcept;
};

// Numeric values are the clusterdata event codes.
enum class EventKind : std::uint8_t {
  Submit = 0,
  Schedule = 1,
  Evict = 2,
  Fail = 3,
  Finish = 4,
  Kill = 5,
  Lost = 6,
  UpdatePending = 7,
  UpdateRunning = 8,
};

inline constexpr std::array<EventKind, 9> kAllEventKinds = {
    EventKind::Submit, EventKind::Schedule,      EventKind::Evict,
    EventKind::Fail,   EventKind::Finish,        EventKind::Kill,
    EventKind::Lost,   EventKind::UpdatePending, EventKind::UpdateRunning,
};

enum class TaskState : std::uint8_t { Pending, Running, Dead };

inline constexpr std::array<TaskState, 3> kAllTaskStates = {
    TaskState::Pending, TaskState::Running, TaskState::Dead};

enum class PriorityTier : std::uint8_t { Gratis, Middle, Production };

inline constexpr std::array<PriorityTier, 3> kAllTiers = {
    PriorityTier::Gratis, PriorityTier::Middle, PriorityTier::Production};

// Terminal event classified by the kind of its predecessor in the
// update-collapsed lifecycle: p* follow Submit, r* and Finish follow Schedule.
enum class TerminalClass : std::uint8_t {
  PFail,
  PKill,
  PLost,
  RFail,
  RKill,
  RLost,
  Finish,
  EvictFromPending,
  EvictFromRunning,
};

inline constexpr std::array<TerminalClass, 9> kAllTerminalClasses = {
    TerminalClass::PFail,  TerminalClass::PKill,
    TerminalClass::PLost,  TerminalClass::RFail,
    TerminalClass::RKill,  TerminalClass::RLost,
    TerminalClass::Finish, TerminalClass::EvictFromPending,
    TerminalClass::EvictFromRunning,
};

// Values of the clusterdata missing-info column.
enum class MissingInfo : std::uint8_t {
  SnapshotButNoTransition = 0,
  NoSnapshotOrTransition = 1,
  ExistsButNoCreation = 2,
};

struct TaskEvent {
  Micros time = 0;
  TaskKey key;
  EventKind kind = EventKind::Submit;
  std::optional<std::uint64_t> machine_id;
  int priority = 0;
  int scheduling_class = 0;
  std::optional<double> cpu_request;
  std::optional<double> mem_request;
  std::optional<MissingInfo> missing_info;
  // Pass-through columns, kept so rows survive a read/write cycle.
  std::string user;
  std::optional<double> disk_request;
  std::optional<bool> different_machine;

  friend bool operator==(const TaskEvent&, const TaskEvent&) = default;
};

// Which transition graph validation runs against. Corrected is the graph
// observed in the trace: eviction straight out of Pending is legal and a
// second Submit while Pending is not. Documented is the graph of the trace
// format description, kept for comparison runs.
enum class TransitionGraph : std::uint8_t { Corrected, Documented };

constexpr bool is_update(EventKind kind) {
  return kind == EventKind::UpdatePending || kind == EventKind::UpdateRunning;
}

// Kinds that move a task to Dead.
constexpr bool is_terminal(EventKind kind) {
  switch (kind) {
    case EventKind::Evict:
    case EventKind::Fail:
    case EventKind::Finish:
    case EventKind::Kill:
    case EventKind::Lost:
      return true;
    default:
      return false;
  }
}

constexpr bool is_pending_class(TerminalClass c) {
  return c == TerminalClass::PFail || c == TerminalClass::PKill ||
         c == TerminalClass::PLost || c == TerminalClass::EvictFromPending;
}

std::optional<TaskState> legal_transition(
    TaskState from, EventKind kind,
    TransitionGraph graph = TransitionGraph::Corrected);

// Classifies a terminal event from the state the task was in when it
// arrived. Absent for non-terminal kinds and for Finish out of Pending.
std::optional<TerminalClass> classify_terminal(TaskState from, EventKind kind);

struct TierBands {
  int gratis_max = 1;       // priorities 0..gratis_max are gratis
  int production_min = 9;   // priorities production_min..11 are production
};

inline constexpr int kMaxPriority = 11;

// Throws InputError for priorities outside 0..11.
PriorityTier tier_of(int priority, const TierBands& bands = {});

// Tie-break order for events sharing a timestamp.
int kind_rank(EventKind kind);

std::string_view to_string(EventKind kind);
std::string_view to_string(TaskState state);
std::string_view to_string(PriorityTier tier);
std::string_view to_string(TerminalClass c);

std::optional<EventKind> event_kind_from_code(long code);
std::optional<TerminalClass> terminal_class_from_string(std::string_view s);

}  // namespace ctrace
