#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

#include "ctrace/lifecycle.hpp"
#include "ctrace/synth.hpp"

using namespace ctrace;

namespace {

std::vector<TaskEvent> seq(std::initializer_list<std::pair<Micros, EventKind>> items,
                           TaskKey key = {1, 0}) {
  std::vector<TaskEvent> out;
  for (auto [t, k] : items) {
    TaskEvent e;
    e.time = t;
    e.key = key;
    e.kind = k;
    out.push_back(e);
  }
  return out;
}

std::vector<EventKind> kinds(const Lifecycle& life) {
  std::vector<EventKind> out;
  for (std::size_t i = 0; i < life.collapsed.size(); ++i) {
    out.push_back(life.collapsed_event(i).kind);
  }
  return out;
}

using K = EventKind;

// Legal random lifecycle of up to `attempts` submissions.
std::vector<TaskEvent> random_legal(std::mt19937_64& rng, TaskKey key, Micros& t) {
  std::vector<TaskEvent> out;
  auto push = [&](K k) {
    t += 1 + rng() % 5;
    TaskEvent e;
    e.time = t;
    e.key = key;
    e.kind = k;
    out.push_back(e);
  };
  const int attempts = 1 + static_cast<int>(rng() % 3);
  for (int a = 0; a < attempts; ++a) {
    push(K::Submit);
    if (rng() % 3 == 0) push(K::UpdatePending);
    if (rng() % 4 == 0) {
      const K pend[] = {K::Fail, K::Kill, K::Lost, K::Evict};
      push(pend[rng() % 4]);
      continue;
    }
    if (rng() % 10 == 0) return out;  // left pending
    push(K::Schedule);
    if (rng() % 3 == 0) push(K::UpdateRunning);
    if (rng() % 10 == 0) return out;  // left running
    const K run[] = {K::Finish, K::Fail, K::Kill, K::Lost, K::Evict};
    push(run[rng() % 5]);
  }
  return out;
}

}  // namespace

TEST_CASE("happy path") {
  auto lives = build_lifecycles(seq({{1, K::Submit}, {2, K::Schedule}, {3, K::Finish}}));
  REQUIRE(lives.size() == 1);
  CHECK(lives[0].violations.empty());
  auto spans = extract_spans(lives[0], 100);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].terminal == TerminalClass::Finish);
  CHECK_FALSE(spans[0].live);
}

TEST_CASE("submit after submit is flagged") {
  auto lives = build_lifecycles(seq({{1, K::Submit}, {2, K::Submit}}));
  REQUIRE(lives.size() == 1);
  REQUIRE(lives[0].violations.size() == 1);
  CHECK(lives[0].violations[0].event_index == 1);
  CHECK(lives[0].violations[0].from == TaskState::Pending);
  CHECK(lives[0].violations[0].kind == K::Submit);
}

TEST_CASE("eviction from pending is accepted") {
  auto life = make_lifecycle({1, 0}, seq({{1, K::Submit}, {2, K::Evict}}));
  CHECK(life.violations.empty());
  REQUIRE(life.terminals.size() == 2);
  CHECK(life.terminals[1] == TerminalClass::EvictFromPending);
  auto doc = make_lifecycle({1, 0}, seq({{1, K::Submit}, {2, K::Evict}}),
                            {TransitionGraph::Documented});
  CHECK(doc.violations.size() == 1);
}

TEST_CASE("collapse_updates") {
  Lifecycle life;
  life.events = seq({{1, K::Submit}, {2, K::UpdatePending}, {3, K::Schedule},
                     {4, K::UpdateRunning}, {5, K::Finish}});
  auto c = collapse_updates(life);
  CHECK(kinds(c) == std::vector<K>{K::Submit, K::Schedule, K::Finish});
  auto twice = collapse_updates(c);
  CHECK(twice.collapsed == c.collapsed);

  life.events = seq({{1, K::Submit}, {3, K::Schedule}});
  CHECK(collapse_updates(life).collapsed == std::vector<std::size_t>{0, 1});

  life.events = seq({{1, K::UpdatePending}, {3, K::UpdateRunning}});
  CHECK(collapse_updates(life).collapsed.empty());
}

TEST_CASE("classify_terminals") {
  auto a = make_lifecycle({1, 0}, seq({{1, K::Submit}, {2, K::Kill}}));
  auto ca = classify_terminals(a);
  CHECK(ca == std::vector<std::optional<TerminalClass>>{TerminalClass::PKill});

  auto b = make_lifecycle({1, 0}, seq({{1, K::Submit}, {2, K::Schedule}, {3, K::Evict},
                                       {4, K::Submit}, {5, K::Schedule}, {6, K::Finish}}));
  auto cb = classify_terminals(b);
  CHECK(cb == std::vector<std::optional<TerminalClass>>{TerminalClass::EvictFromRunning,
                                                        TerminalClass::Finish});

  auto c = make_lifecycle({1, 0}, seq({{1, K::Kill}}));
  auto cc = classify_terminals(c);
  REQUIRE(cc.size() == 1);
  CHECK_FALSE(cc[0]);
  CHECK(c.violations.size() == 1);
}

TEST_CASE("classification equals a predecessor scan on random lifecycles") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    Micros t = 0;
    auto events = random_legal(rng, {static_cast<std::uint64_t>(i), 0}, t);
    auto life = make_lifecycle({static_cast<std::uint64_t>(i), 0}, events);
    REQUIRE(life.violations.empty());
    auto got = classify_terminals(life);
    std::vector<std::optional<TerminalClass>> want;
    K prev = K::Submit;
    for (const auto& e : events) {
      if (is_update(e.kind)) continue;
      if (is_terminal(e.kind)) {
        const bool p = prev == K::Submit;
        switch (e.kind) {
          case K::Fail: want.push_back(p ? TerminalClass::PFail : TerminalClass::RFail); break;
          case K::Kill: want.push_back(p ? TerminalClass::PKill : TerminalClass::RKill); break;
          case K::Lost: want.push_back(p ? TerminalClass::PLost : TerminalClass::RLost); break;
          case K::Evict:
            want.push_back(p ? TerminalClass::EvictFromPending
                             : TerminalClass::EvictFromRunning);
            break;
          default: want.push_back(TerminalClass::Finish);
        }
      }
      prev = e.kind;
    }
    REQUIRE(got == want);

    // Pending exits account for every Submit but a trailing live one.
    std::size_t submits = 0, pend_exits = 0;
    for (std::size_t j = 0; j < life.collapsed.size(); ++j) {
      K k = life.collapsed_event(j).kind;
      if (k == K::Submit) ++submits;
      if (k == K::Schedule) ++pend_exits;
      if (life.terminals[j] && is_pending_class(*life.terminals[j])) ++pend_exits;
    }
    CHECK(submits - pend_exits <= 1);
  }
}

TEST_CASE("grouping equals a per-key filter") {
  std::mt19937_64 rng(8);
  std::vector<TaskEvent> all;
  std::map<TaskKey, std::vector<TaskEvent>> by_key;
  for (int i = 0; i < 1000; ++i) {
    Micros t = rng() % 1000;
    TaskKey key{rng() % 100000, static_cast<std::uint32_t>(i)};
    auto events = random_legal(rng, key, t);
    all.insert(all.end(), events.begin(), events.end());
  }
  sort_events(all);
  for (const auto& e : all) by_key[e.key].push_back(e);
  auto lives = build_lifecycles(all);
  REQUIRE(lives.size() == by_key.size());
  auto it = by_key.begin();
  for (const auto& life : lives) {
    CHECK(life.key == it->first);
    CHECK(life.events == it->second);
    CHECK(life.violations.empty());
    for (std::size_t j = 0; j < life.collapsed.size(); ++j) {
      CHECK_FALSE(is_update(life.collapsed_event(j).kind));
    }
    ++it;
  }
}

TEST_CASE("span arithmetic and censoring") {
  auto life = make_lifecycle({1, 0}, seq({{10, K::Submit}, {25, K::Schedule}, {100, K::Finish}}));
  auto spans = extract_spans(life, 1000);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].scheduling_time() == 15u);
  CHECK(spans[0].execution_time() == 75u);

  auto pending = make_lifecycle({1, 0}, seq({{10, K::Submit}}));
  auto ps = extract_spans(pending, 1000);
  REQUIRE(ps.size() == 1);
  CHECK_FALSE(ps[0].scheduling_time());
  CHECK(ps[0].live);

  // A terminal after trace_end is not seen.
  auto cut = extract_spans(life, 50);
  REQUIRE(cut.size() == 1);
  CHECK(cut[0].live);
  CHECK_FALSE(cut[0].execution_time());
}

TEST_CASE("violating events stay out of spans") {
  auto life = make_lifecycle({1, 0}, seq({{1, K::Submit}, {2, K::Submit}, {3, K::Schedule},
                                          {4, K::Finish}}));
  CHECK(life.violations.size() == 1);
  auto spans = extract_spans(life, 100);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].submit_time == 1u);
  CHECK(spans[0].execution_time() == 1u);
}

TEST_CASE("snapshot seeding starts flagged tasks in their implied state") {
  auto events = seq({{0, K::Schedule}, {5, K::Finish}});
  events[0].missing_info = MissingInfo::SnapshotButNoTransition;
  auto plain = make_lifecycle({1, 0}, events);
  CHECK_FALSE(plain.violations.empty());
  auto seeded = make_lifecycle({1, 0}, events, {TransitionGraph::Corrected, true});
  CHECK(seeded.seeded);
}

TEST_CASE("extracted spans match generator bookkeeping") {
  SynthConfig c;
  c.seed = 17;
  c.task_count = 800;
  c.tasks_per_job = 4;
  c.emit_usage = false;
  c.bursts = {{30'000, 2000, 15}};
  auto t = generate_synthetic(c);
  std::map<TaskKey, std::vector<TruthSpan>> truth;
  for (const auto& s : t.truth.spans) truth[s.key].push_back(s);
  std::size_t finishes = 0;
  for (const auto& life : build_lifecycles(t.bundle.task_events)) {
    auto spans = extract_spans(life, t.bundle.trace_end);
    const auto& want = truth[life.key];
    REQUIRE(spans.size() == want.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
      CHECK(spans[i].submit_time == want[i].submit_time);
      CHECK(spans[i].schedule_time == want[i].schedule_time);
      CHECK(spans[i].end_time == want[i].end_time);
      CHECK(spans[i].terminal == want[i].terminal);
      if (spans[i].terminal == TerminalClass::Finish) ++finishes;
      if (auto e = spans[i].execution_time()) CHECK(*e <= t.bundle.trace_end);
    }
  }
  CHECK(finishes == t.truth.finish_count);
}

TEST_CASE("csv writers") {
  auto life = make_lifecycle({7, 2}, seq({{1, K::Submit}, {2, K::Submit}}, {7, 2}));
  std::ostringstream v;
  write_violation_header(v);
  write_violations(v, life);
  CHECK(v.str() == "job_id,task_index,event_index,time,from_state,kind\n"
                   "7,2,1,2,pending,submit\n");
  std::ostringstream s;
  write_span_header(s);
  write_spans(s, life.key, extract_spans(life, 10));
  CHECK(s.str() == "job_id,task_index,submit_time,schedule_time,end_time,terminal,live\n"
                   "7,2,1,,,,1\n");
}
