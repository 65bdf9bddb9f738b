#pragma once

#include <array>
#include <compare>
#include <span>
#include <vector>

#include "commdecode/rng.hpp"

namespace commdecode {

/// Grid geometry and episode parameters. Default-constructed values describe
/// the standard 5x5 game; use make() to get consistent derived defaults for
/// other sizes.
struct GridConfig {
  int width = 5;
  int height = 5;
  int horizon = 8;
  int message_alphabet_size = 25;

  static GridConfig make(int width, int height);

  void validate() const;  // throws DomainError

  int cells() const { return width * height; }
  /// Length of the joint feature vector: [goal_x | goal_y | listener_x | listener_y].
  int feature_size() const { return 2 * (width + height); }
};

/// Grid cell. (0,0) is the bottom-left corner; Up increments y.
struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

/// Joint state: listener position plus goal position. Also serves as the
/// joint observation (the speaker sees the goal, the listener its position).
struct State {
  Cell listener;
  Cell goal;
  auto operator<=>(const State&) const = default;
};

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr std::array<Action, 4> kAllActions = {Action::Up, Action::Down,
                                                      Action::Left, Action::Right};
inline constexpr std::array<int, 4> kActionDx = {0, 0, -1, 1};
inline constexpr std::array<int, 4> kActionDy = {1, -1, 0, 0};

const char* action_name(Action a);

struct StepOutcome {
  State next_state;
  int reward = -1;  // +1 on arrival, -1 otherwise
  bool terminated = false;
};

void validate_cell(const Cell& c, const GridConfig& config);
void validate_state(const State& s, const GridConfig& config);

/// One environment transition. Moves the listener one cell (a move into a
/// wall leaves it in place), rewards +1 and terminates iff the post-move
/// position equals the goal. The goal never moves.
StepOutcome step(const State& state, Action action, const GridConfig& config);

/// Uniform sample over all (listener, goal) pairs with listener != goal.
State sample_initial(const GridConfig& config, Rng& rng);

/// Concatenation of four one-hot factors:
/// [one_hot(goal.x, W), one_hot(goal.y, H), one_hot(listener.x, W), one_hot(listener.y, H)].
/// The speaker observation is the first W+H entries, the listener observation
/// the last W+H.
std::vector<double> encode_state_features(const State& state, const GridConfig& config);

/// Inverse of encode_state_features via per-factor argmax. Accepts relaxed
/// (non-one-hot) vectors.
State decode_state_features(std::span<const double> features, const GridConfig& config);

int manhattan_distance(const Cell& a, const Cell& b);

/// Binary rendering of a message symbol, defined iff the alphabet size is a
/// power of two (e.g. symbol 3 in a 16-symbol alphabet -> "0011").
std::string message_binary(int symbol, const GridConfig& config);

}  // namespace commdecode
