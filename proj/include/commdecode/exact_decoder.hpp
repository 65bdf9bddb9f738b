#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "commdecode/env.hpp"
#include "commdecode/planner.hpp"

namespace commdecode {

/// One observed episode: the message plus the listener's action sequence.
/// The optional ground truth is evaluation-only bookkeeping; decoding never
/// reads it.
struct Demonstration {
  int message = 0;
  std::vector<Action> actions;
  bool terminated = false;
  std::optional<State> oracle;  // listener = start, goal = goal
};

/// All (start, goal) hypotheses under which the observed actions are
/// stepwise-greedy and meet the termination condition.
struct ConsistencySet {
  std::vector<std::pair<Cell, Cell>> pairs;  // (start, goal), canonical order
  bool vacuous = false;                      // empty action list: no evidence
};

struct GoalSet {
  std::vector<Cell> cells;  // sorted (y, x) ascending

  bool contains(const Cell& c) const;
};

struct DecodeResult {
  std::map<int, GoalSet> goal_sets;
  /// Messages whose per-demo goal sets intersect to nothing: evidence of an
  /// irrational demonstrator or a model mismatch.
  std::vector<int> empty_messages;
  std::size_t vacuous_demo_count = 0;
};

/// Enumerates every (start, goal) pair consistent with the action sequence:
/// start != goal, each action lies in the greedy set of the state it was
/// taken from, and the goal is reached exactly at the final step iff
/// `terminated` (and never earlier).
ConsistencySet consistent_pairs(std::span<const Action> actions, bool terminated,
                                const QTable& q, const GridConfig& config);

/// Per message, intersects the goal projections of consistent_pairs across
/// all demonstrations carrying that message.
DecodeResult decode_dataset(std::span<const Demonstration> demos, const QTable& q,
                            const GridConfig& config);

}  // namespace commdecode
