#pragma once

#include <array>
#include <string>
#include <vector>

#include "commdecode/env.hpp"
#include "commdecode/nn/models.hpp"
#include "commdecode/nn/params.hpp"
#include "commdecode/rng.hpp"

namespace commdecode {

/// Optimal action values for every (state, action) pair. Entries for
/// terminal states (listener == goal) are stored as zero.
class QTable {
 public:
  explicit QTable(GridConfig config);

  const GridConfig& config() const { return config_; }

  int state_index(const State& s) const;
  double q(const State& s, Action a) const;
  double& q_mut(const State& s, Action a);
  /// Greedy value max_a Q(s, a); requires listener != goal.
  double v(const State& s) const;

  int sweeps_to_converge() const { return sweeps_; }
  void set_sweeps(int n) { sweeps_ = n; }

  const std::vector<double>& raw() const { return values_; }

  void save_csv(const std::string& path) const;
  static QTable load_csv(const std::string& path);

 private:
  GridConfig config_;
  std::vector<double> values_;  // [state_index * 4 + action]
  int sweeps_ = 0;
};

/// Exact stationary value iteration from zero initial values. Deterministic.
QTable value_iteration(const GridConfig& config);

/// Runs exactly `sweeps` Jacobi sweeps (used to probe convergence speed).
QTable value_iteration_truncated(const GridConfig& config, int sweeps);

/// All actions within eps of max_a Q(state, a). Requires listener != goal.
std::vector<Action> greedy_action_set(const QTable& q, const State& state,
                                      double eps = 1e-6);

/// temperature == 0: uniform draw over the greedy set.
/// temperature t > 0: sample from softmax(Q(state,.)/t).
Action sample_action(const QTable& q, const State& state, double temperature, Rng& rng);

/// Small feed-forward policy mapping a (possibly relaxed) feature vector to
/// 4 action logits; distilled from a QTable so that its argmax agrees with
/// the greedy action set on every discrete state.
struct DifferentiablePolicy {
  GridConfig config;
  nn::ParamStore params;
  nn::MlpParams arch;

  std::array<double, 4> logits(std::span<const double> features) const;
  Action greedy_action(const State& s) const;
};

struct DistillConfig {
  int hidden = 64;         // two hidden layers of this width
  double lr = 3e-3;
  int batch = 200;
  int max_steps = 6000;
  int check_every = 50;
};

/// Cross-entropy fit of the network to the oracle's greedy distribution over
/// all states until the argmax lands in the greedy set for 100% of states.
/// Throws TrainingFailure (listing offending states) if the budget runs out.
DifferentiablePolicy distill_policy(const QTable& q, const DistillConfig& cfg, Rng& rng);

}  // namespace commdecode
