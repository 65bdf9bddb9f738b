#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "commdecode/demos.hpp"
#include "commdecode/env.hpp"
#include "commdecode/errors.hpp"
#include "commdecode/exact_decoder.hpp"
#include "commdecode/planner.hpp"

using namespace commdecode;

#include "decode_oracle.hpp"

namespace {

using PairSet = decode_oracle::PairSet;

std::set<std::pair<int, int>> to_pair_set(const GoalSet& gs) {
  std::set<std::pair<int, int>> out;
  for (const Cell& c : gs.cells) out.insert({c.x, c.y});
  return out;
}

PairSet oracle_pairs(std::span<const Action> actions, bool terminated,
                     const GridConfig& c) {
  return decode_oracle::pairs(actions, terminated, c);
}

auto oracle_decode(std::span<const Demonstration> demos, const GridConfig& c) {
  return decode_oracle::decode(demos, c);
}

}  // namespace

TEST_CASE("a single terminated Right step pins the goal one cell to the right") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const std::vector<Action> actions = {Action::Right};
  const ConsistencySet cs = consistent_pairs(actions, true, q, c);

  CHECK(!cs.vacuous);
  CHECK(cs.pairs.size() == 4 * 5);  // x < 4, any y
  std::set<std::pair<int, int>> goals;
  for (const auto& [start, goal] : cs.pairs) {
    CHECK(goal.x == start.x + 1);
    CHECK(goal.y == start.y);
    goals.insert({goal.x, goal.y});
  }
  for (const auto& [gx, gy] : goals) CHECK(gx >= 1);
  CHECK(goals.size() == 20);  // columns 1..4, every row
}

TEST_CASE("an Up action from the top row is never consistent") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const std::vector<Action> actions = {Action::Up};
  for (bool terminated : {true, false}) {
    const ConsistencySet cs = consistent_pairs(actions, terminated, q, c);
    for (const auto& [start, goal] : cs.pairs) CHECK(start.y < c.height - 1);
  }
}

TEST_CASE("an empty action list is vacuous evidence") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const ConsistencySet cs = consistent_pairs({}, false, q, c);
  CHECK(cs.vacuous);
  CHECK(cs.pairs.size() == 600);
}

TEST_CASE("action lists longer than the horizon are rejected") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const std::vector<Action> actions(static_cast<std::size_t>(c.horizon) + 1, Action::Up);
  CHECK_THROWS_AS(consistent_pairs(actions, false, q, c), DomainError);
}

TEST_CASE("right-right-up: closed form and oracle agree") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const std::vector<Action> actions = {Action::Right, Action::Right, Action::Up};
  const ConsistencySet cs = consistent_pairs(actions, true, q, c);

  // closed form: start (x, y) with x <= 2, y <= 3; goal = start + (2, 1)
  PairSet expected;
  for (int x = 0; x <= 2; ++x)
    for (int y = 0; y <= 3; ++y) expected.insert({{x, y}, {x + 2, y + 1}});

  PairSet got;
  for (const auto& [s, g] : cs.pairs) got.insert({{s.x, s.y}, {g.x, g.y}});
  CHECK(got == expected);
  CHECK(got == oracle_pairs(actions, true, c));
}

TEST_CASE("consistent_pairs equals the trajectory-enumeration oracle") {
  const GridConfig c3 = GridConfig::make(3, 3);
  const QTable q3 = value_iteration(c3);
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 1 + rng.uniform_below(4);
    std::vector<Action> actions;
    for (std::size_t i = 0; i < len; ++i)
      actions.push_back(static_cast<Action>(rng.uniform_below(4)));
    const bool terminated = rng.uniform_below(2) == 0;

    const ConsistencySet cs = consistent_pairs(actions, terminated, q3, c3);
    PairSet got;
    for (const auto& [s, g] : cs.pairs) got.insert({{s.x, s.y}, {g.x, g.y}});
    CHECK(got == oracle_pairs(actions, terminated, c3));
  }
}

TEST_CASE("decode_dataset matches the brute-force decoder on random corpora") {
  const GridConfig c3 = GridConfig::make(3, 3);
  const QTable q3 = value_iteration(c3);
  const MessageMapping mapping = assign_messages(c3, 5);

  const DemoDataset data = generate_demos(q3, mapping, 60, 0.0, c3, 6);
  const DecodeResult got = decode_dataset(data.demos, q3, c3);
  const auto expected = oracle_decode(data.demos, c3);

  REQUIRE(got.goal_sets.size() == expected.size());
  for (const auto& [symbol, gs] : got.goal_sets) {
    REQUIRE(expected.count(symbol) == 1);
    CHECK(to_pair_set(gs) == expected.at(symbol));
  }
}

TEST_CASE("soundness: the true goal always survives decoding of greedy demos") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const MessageMapping mapping = assign_messages(c, 11);
  const DemoDataset data = generate_demos(q, mapping, 2000, 0.0, c, 12);
  const DecodeResult result = decode_dataset(data.demos, q, c);

  CHECK(result.empty_messages.empty());
  for (const auto& [goal, symbol] : mapping.map) {
    const auto it = result.goal_sets.find(symbol);
    if (it == result.goal_sets.end()) continue;  // message never sampled
    CHECK(it->second.contains(goal));
  }
}

TEST_CASE("adding demonstrations never enlarges a goal set (monotonicity)") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const MessageMapping mapping = assign_messages(c, 21);
  const DemoDataset data = generate_demos(q, mapping, 300, 0.0, c, 22);

  std::map<int, std::size_t> last_size;
  for (const std::size_t n : {50UL, 100UL, 200UL, 300UL}) {
    const std::span<const Demonstration> prefix(data.demos.data(), n);
    const DecodeResult r = decode_dataset(prefix, q, c);
    for (const auto& [symbol, gs] : r.goal_sets) {
      if (last_size.count(symbol)) CHECK(gs.cells.size() <= last_size[symbol]);
      last_size[symbol] = gs.cells.size();
    }
  }
}

TEST_CASE("decoding output is independent of demo ordering") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const MessageMapping mapping = assign_messages(c, 31);
  DemoDataset data = generate_demos(q, mapping, 200, 0.0, c, 32);

  const DecodeResult a = decode_dataset(data.demos, q, c);
  std::reverse(data.demos.begin(), data.demos.end());
  const DecodeResult b = decode_dataset(data.demos, q, c);

  REQUIRE(a.goal_sets.size() == b.goal_sets.size());
  for (const auto& [symbol, gs] : a.goal_sets)
    CHECK(to_pair_set(gs) == to_pair_set(b.goal_sets.at(symbol)));
}

TEST_CASE("decoding never reads the ground-truth oracle") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  const MessageMapping mapping = assign_messages(c, 41);
  DemoDataset data = generate_demos(q, mapping, 150, 0.0, c, 42);

  const DecodeResult with = decode_dataset(data.demos, q, c);
  for (Demonstration& d : data.demos) d.oracle.reset();
  const DecodeResult without = decode_dataset(data.demos, q, c);

  REQUIRE(with.goal_sets.size() == without.goal_sets.size());
  for (const auto& [symbol, gs] : with.goal_sets)
    CHECK(to_pair_set(gs) == to_pair_set(without.goal_sets.at(symbol)));
}

TEST_CASE("inconsistent demonstrations surface as an empty-set diagnostic") {
  const GridConfig c;
  const QTable q = value_iteration(c);

  Demonstration a;
  a.message = 3;
  a.actions = {Action::Right, Action::Right, Action::Right, Action::Right};
  a.terminated = true;  // goal must sit in column 4
  Demonstration b;
  b.message = 3;
  b.actions = {Action::Left, Action::Left, Action::Left, Action::Left};
  b.terminated = true;  // goal must sit in column 0

  const std::vector<Demonstration> demos = {a, b};
  const DecodeResult r = decode_dataset(demos, q, c);
  REQUIRE(r.goal_sets.count(3) == 1);
  CHECK(r.goal_sets.at(3).cells.empty());
  CHECK(r.empty_messages == std::vector<int>{3});
}

TEST_CASE("vacuous demos are counted and keep the full goal set") {
  const GridConfig c;
  const QTable q = value_iteration(c);
  Demonstration d;
  d.message = 0;
  d.terminated = false;  // no actions at all
  const std::vector<Demonstration> demos = {d};
  const DecodeResult r = decode_dataset(demos, q, c);
  CHECK(r.vacuous_demo_count == 1);
  CHECK(r.goal_sets.at(0).cells.size() == 25);
}
