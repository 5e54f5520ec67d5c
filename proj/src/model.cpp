#include "ctrace/model.hpp"

#include "ctrace/error.hpp"

namespace ctrace {

std::size_t TaskKeyHash::operator()(const TaskKey& key) const noexcept {
  // splitmix64 finalizer over the packed key
  std::uint64_t x = key.job_id * 0x9E3779B97F4A7C15ULL + key.task_index;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return static_cast<std::size_t>(x);
}

std::optional<TaskState> legal_transition(TaskState from, EventKind kind,
                                          TransitionGraph graph) {
  switch (from) {
    case TaskState::Pending:
      switch (kind) {
        case EventKind::Schedule:
          return TaskState::Running;
        case EventKind::Fail:
        case EventKind::Kill:
        case EventKind::Lost:
          return TaskState::Dead;
        case EventKind::Evict:
          if (graph == TransitionGraph::Documented) return std::nullopt;
          return TaskState::Dead;
        case EventKind::UpdatePending:
          return TaskState::Pending;
        case EventKind::Submit:
          if (graph == TransitionGraph::Documented) return TaskState::Pending;
          return std::nullopt;
        default:
          return std::nullopt;
      }
    case TaskState::Running:
      switch (kind) {
        case EventKind::Finish:
        case EventKind::Evict:
        case EventKind::Fail:
        case EventKind::Kill:
        case EventKind::Lost:
          return TaskState::Dead;
        case EventKind::UpdateRunning:
          return TaskState::Running;
        default:
          return std::nullopt;
      }
    case TaskState::Dead:
      if (kind == EventKind::Submit) return TaskState::Pending;
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<TerminalClass> classify_terminal(TaskState from,
                                               EventKind kind) {
  if (from == TaskState::Pending) {
    switch (kind) {
      case EventKind::Fail: return TerminalClass::PFail;
      case EventKind::Kill: return TerminalClass::PKill;
      case EventKind::Lost: return TerminalClass::PLost;
      case EventKind::Evict: return TerminalClass::EvictFromPending;
      default: return std::nullopt;
    }
  }
  if (from == TaskState::Running) {
    switch (kind) {
      case EventKind::Fail: return TerminalClass::RFail;
      case EventKind::Kill: return TerminalClass::RKill;
      case EventKind::Lost: return TerminalClass::RLost;
      case EventKind::Finish: return TerminalClass::Finish;
      case EventKind::Evict: return TerminalClass::EvictFromRunning;
      default: return std::nullopt;
    }
  }
  return std::nullopt;
}

PriorityTier tier_of(int priority, const TierBands& bands) {
  if (priority < 0 || priority > kMaxPriority) {
    throw InputError("priority " + std::to_string(priority) +
                     " outside 0.." + std::to_string(kMaxPriority));
  }
  if (priority >= bands.production_min) return PriorityTier::Production;
  if (priority <= bands.gratis_max) return PriorityTier::Gratis;
  return PriorityTier::Middle;
}

int kind_rank(EventKind kind) {
  switch (kind) {
    case EventKind::Submit: return 0;
    case EventKind::Schedule: return 1;
    case EventKind::UpdatePending: return 2;
    case EventKind::UpdateRunning: return 3;
    case EventKind::Evict: return 4;
    case EventKind::Fail: return 5;
    case EventKind::Finish: return 6;
    case EventKind::Kill: return 7;
    case EventKind::Lost: return 8;
  }
  return 9;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Submit: return "submit";
    case EventKind::Schedule: return "schedule";
    case EventKind::Evict: return "evict";
    case EventKind::Fail: return "fail";
    case EventKind::Finish: return "finish";
    case EventKind::Kill: return "kill";
    case EventKind::Lost: return "lost";
    case EventKind::UpdatePending: return "update_pending";
    case EventKind::UpdateRunning: return "update_running";
  }
  return "?";
}

std::string_view to_string(TaskState state) {
  switch (state) {
    case TaskState::Pending: return "pending";
    case TaskState::Running: return "running";
    case TaskState::Dead: return "dead";
  }
  return "?";
}

std::string_view to_string(PriorityTier tier) {
  switch (tier) {
    case PriorityTier::Gratis: return "gratis";
    case PriorityTier::Middle: return "middle";
    case PriorityTier::Production: return "production";
  }
  return "?";
}

std::string_view to_string(TerminalClass c) {
  switch (c) {
    case TerminalClass::PFail: return "pFail";
    case TerminalClass::PKill: return "pKill";
    case TerminalClass::PLost: return "pLost";
    case TerminalClass::RFail: return "rFail";
    case TerminalClass::RKill: return "rKill";
    case TerminalClass::RLost: return "rLost";
    case TerminalClass::Finish: return "finish";
    case TerminalClass::EvictFromPending: return "evictFromPending";
    case TerminalClass::EvictFromRunning: return "evictFromRunning";
  }
  return "?";
}

std::optional<EventKind> event_kind_from_code(long code) {
  if (code < 0 || code > 8) return std::nullopt;
  return static_cast<EventKind>(code);
}

std::optional<TerminalClass> terminal_class_from_string(std::string_view s) {
  for (TerminalClass c : kAllTerminalClasses) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

}  // namespace ctrace
