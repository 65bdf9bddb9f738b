#include "commdecode/exact_decoder.hpp"

#include <algorithm>
#include <set>

#include "commdecode/errors.hpp"

namespace commdecode {

bool GoalSet::contains(const Cell& c) const {
  return std::binary_search(cells.begin(), cells.end(), c,
                            [](const Cell& a, const Cell& b) {
                              return std::tie(a.y, a.x) < std::tie(b.y, b.x);
                            });
}

namespace {

bool replay_consistent(Cell start, Cell goal, std::span<const Action> actions,
                       bool terminated, const QTable& q, const GridConfig& config) {
  State s{start, goal};
  for (std::size_t t = 0; t < actions.size(); ++t) {
    if (s.listener == s.goal) return false;  // arrived before the actions ran out
    const auto greedy = greedy_action_set(q, s);
    if (std::find(greedy.begin(), greedy.end(), actions[t]) == greedy.end())
      return false;
    s = step(s, actions[t], config).next_state;
  }
  return terminated ? s.listener == s.goal : s.listener != s.goal;
}

}  // namespace

ConsistencySet consistent_pairs(std::span<const Action> actions, bool terminated,
                                const QTable& q, const GridConfig& config) {
  if (static_cast<int>(actions.size()) > config.horizon)
    throw DomainError("consistent_pairs: action list longer than horizon");

  ConsistencySet out;
  out.vacuous = actions.empty();
  for (int sy = 0; sy < config.height; ++sy)
    for (int sx = 0; sx < config.width; ++sx)
      for (int gy = 0; gy < config.height; ++gy)
        for (int gx = 0; gx < config.width; ++gx) {
          const Cell start{sx, sy}, goal{gx, gy};
          if (start == goal) continue;
          if (out.vacuous ||
              replay_consistent(start, goal, actions, terminated, q, config))
            out.pairs.emplace_back(start, goal);
        }
  return out;
}

DecodeResult decode_dataset(std::span<const Demonstration> demos, const QTable& q,
                            const GridConfig& config) {
  auto cell_less = [](const Cell& a, const Cell& b) {
    return std::tie(a.y, a.x) < std::tie(b.y, b.x);
  };

  DecodeResult result;
  std::map<int, std::set<Cell, decltype(cell_less)>> live;
  std::set<int> seen;

  for (const Demonstration& d : demos) {
    const ConsistencySet cs = consistent_pairs(d.actions, d.terminated, q, config);
    if (cs.vacuous) ++result.vacuous_demo_count;
    std::set<Cell, decltype(cell_less)> goals(cell_less);
    for (const auto& [start, goal] : cs.pairs) goals.insert(goal);

    auto [it, inserted] = live.try_emplace(d.message, goals);
    if (!inserted) {
      std::set<Cell, decltype(cell_less)> merged(cell_less);
      std::set_intersection(it->second.begin(), it->second.end(), goals.begin(),
                            goals.end(), std::inserter(merged, merged.begin()),
                            cell_less);
      it->second = std::move(merged);
    }
    seen.insert(d.message);
  }

  for (int m : seen) {
    GoalSet gs;
    gs.cells.assign(live[m].begin(), live[m].end());
    if (gs.cells.empty()) result.empty_messages.push_back(m);
    result.goal_sets.emplace(m, std::move(gs));
  }
  return result;
}

}  // namespace commdecode
