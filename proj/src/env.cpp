#include "commdecode/env.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "commdecode/errors.hpp"

namespace commdecode {

GridConfig GridConfig::make(int width, int height) {
  GridConfig c;
  c.width = width;
  c.height = height;
  c.horizon = std::max(1, width - 1 + height - 1);
  c.message_alphabet_size = width * height;
  c.validate();
  return c;
}

void GridConfig::validate() const {
  if (width < 1) throw DomainError("GridConfig: width must be >= 1");
  if (height < 1) throw DomainError("GridConfig: height must be >= 1");
  if (horizon < 1) throw DomainError("GridConfig: horizon must be >= 1");
  if (message_alphabet_size < 1)
    throw DomainError("GridConfig: message_alphabet_size must be >= 1");
}

const char* action_name(Action a) {
  switch (a) {
    case Action::Up: return "Up";
    case Action::Down: return "Down";
    case Action::Left: return "Left";
    case Action::Right: return "Right";
  }
  return "?";
}

void validate_cell(const Cell& c, const GridConfig& config) {
  if (c.x < 0 || c.x >= config.width || c.y < 0 || c.y >= config.height)
    throw DomainError("cell (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                      ") outside " + std::to_string(config.width) + "x" +
                      std::to_string(config.height) + " grid");
}

void validate_state(const State& s, const GridConfig& config) {
  validate_cell(s.listener, config);
  validate_cell(s.goal, config);
}

StepOutcome step(const State& state, Action action, const GridConfig& config) {
  validate_state(state, config);
  if (state.listener == state.goal)
    throw UsageError("step: episode already terminated (listener == goal)");

  const int ai = static_cast<int>(action);
  Cell moved{state.listener.x + kActionDx[ai], state.listener.y + kActionDy[ai]};
  // wall collision: remain in place
  moved.x = std::clamp(moved.x, 0, config.width - 1);
  moved.y = std::clamp(moved.y, 0, config.height - 1);

  StepOutcome out;
  out.next_state = State{moved, state.goal};
  out.terminated = (moved == state.goal);
  out.reward = out.terminated ? 1 : -1;
  return out;
}

State sample_initial(const GridConfig& config, Rng& rng) {
  config.validate();
  const std::uint64_t n = static_cast<std::uint64_t>(config.cells());
  if (n < 2)
    throw DomainError("sample_initial: grid has no (listener != goal) pair");
  const std::uint64_t idx = rng.uniform_below(n * (n - 1));
  const std::uint64_t listener = idx / (n - 1);
  std::uint64_t goal = idx % (n - 1);
  if (goal >= listener) ++goal;  // skip the listener's own cell

  auto to_cell = [&](std::uint64_t flat) {
    return Cell{static_cast<int>(flat % static_cast<std::uint64_t>(config.width)),
                static_cast<int>(flat / static_cast<std::uint64_t>(config.width))};
  };
  return State{to_cell(listener), to_cell(goal)};
}

std::vector<double> encode_state_features(const State& state, const GridConfig& config) {
  validate_state(state, config);
  const int w = config.width, h = config.height;
  std::vector<double> f(static_cast<std::size_t>(config.feature_size()), 0.0);
  f[static_cast<std::size_t>(state.goal.x)] = 1.0;
  f[static_cast<std::size_t>(w + state.goal.y)] = 1.0;
  f[static_cast<std::size_t>(w + h + state.listener.x)] = 1.0;
  f[static_cast<std::size_t>(w + h + w + state.listener.y)] = 1.0;
  return f;
}

namespace {
int argmax_range(std::span<const double> v, int begin, int len) {
  int best = 0;
  for (int i = 1; i < len; ++i)
    if (v[static_cast<std::size_t>(begin + i)] > v[static_cast<std::size_t>(begin + best)]) best = i;
  return best;
}
}  // namespace

State decode_state_features(std::span<const double> features, const GridConfig& config) {
  const int w = config.width, h = config.height;
  if (features.size() != static_cast<std::size_t>(config.feature_size()))
    throw DomainError("decode_state_features: feature length mismatch");
  State s;
  s.goal.x = argmax_range(features, 0, w);
  s.goal.y = argmax_range(features, w, h);
  s.listener.x = argmax_range(features, w + h, w);
  s.listener.y = argmax_range(features, w + h + w, h);
  return s;
}

int manhattan_distance(const Cell& a, const Cell& b) {
  return std::abs(a.x - b.x) + std::abs(a.y - b.y);
}

std::string message_binary(int symbol, const GridConfig& config) {
  const int n = config.message_alphabet_size;
  if (n < 2 || (n & (n - 1)) != 0)
    throw DomainError("message_binary: alphabet size " + std::to_string(n) +
                      " is not a power of two");
  if (symbol < 0 || symbol >= n)
    throw DomainError("message_binary: symbol out of range");
  int bits = 0;
  for (int v = n; v > 1; v >>= 1) ++bits;
  std::string out(static_cast<std::size_t>(bits), '0');
  for (int i = 0; i < bits; ++i)
    if (symbol & (1 << (bits - 1 - i))) out[static_cast<std::size_t>(i)] = '1';
  return out;
}

}  // namespace commdecode
