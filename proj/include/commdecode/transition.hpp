#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "commdecode/env.hpp"
#include "commdecode/nn/models.hpp"
#include "commdecode/planner.hpp"

namespace commdecode {

/// One recorded environment transition under the demonstrator policy.
struct TransitionSample {
  std::vector<double> state_features;      // length 2W+2H
  int action = 0;                          // Action index
  std::array<int, 4> next_factors{};       // goal_x, goal_y, listener_x, listener_y
};

/// Learned dynamics model: (state features ++ action one-hot) -> four logit
/// groups of widths W, H, W, H for the next-state factors. One feed-forward
/// head per factor; the heads share nothing, which keeps their margins
/// growing independently during training.
struct TransitionModel {
  GridConfig config;
  nn::ParamStore params;
  std::array<nn::MlpParams, 4> heads;

  /// Concatenated logits, length 2W+2H, grouped
  /// [goal_x | goal_y | listener_x | listener_y].
  std::vector<double> logits(std::span<const double> state_features, int action) const;
  /// Argmax-decoded next state.
  State predict(std::span<const double> state_features, int action) const;
};

/// Frozen-parameter graph forward over all four heads; input is the
/// concatenated (state ++ action one-hot) node.
nn::Var transition_logits_g(nn::Graph& g, const TransitionModel& model,
                            nn::Var state_action);

/// Greedy-demonstrator rollouts from sample_initial states; every step is
/// emitted as a sample. Deterministic given seed.
std::vector<TransitionSample> generate_transitions(const QTable& q,
                                                   const GridConfig& config,
                                                   std::size_t count,
                                                   std::uint64_t seed);

struct TransitionTrainConfig {
  int hidden = 64;   // two hidden layers per head
  double lr = 1e-3;
  int steps = 1000;
  /// Optimizer batch. 0 trains full-batch over the distinct (state, action)
  /// pairs in the dataset; duplicates are always collapsed first.
  int batch = 0;
  std::size_t dataset_size = 50000;
};

struct TransitionTrainResult {
  TransitionModel model;
  std::vector<double> loss_curve;     // per-step batch mean loss
  int first_step_below_1e3 = -1;      // first step whose batch loss < 1e-3
};

/// Minimises the summed per-factor cross-entropy against true next factors.
TransitionTrainResult train_transition(const std::vector<TransitionSample>& data,
                                       const GridConfig& config,
                                       const TransitionTrainConfig& cfg, Rng& rng);

/// Rolls the model forward on its own argmax-decoded predictions using the
/// ground-truth greedy actions and returns the fraction of exactly-matched
/// states across all episode steps.
double rollout_accuracy(const TransitionModel& model, const QTable& q,
                        const GridConfig& config, std::size_t episodes,
                        std::uint64_t seed);

void save_transitions_jsonl(const std::vector<TransitionSample>& data,
                            const std::string& path);
std::vector<TransitionSample> load_transitions_jsonl(const std::string& path);

}  // namespace commdecode
