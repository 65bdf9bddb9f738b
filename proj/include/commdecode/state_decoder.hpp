#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "commdecode/demos.hpp"
#include "commdecode/env.hpp"
#include "commdecode/exact_decoder.hpp"
#include "commdecode/nn/graph.hpp"
#include "commdecode/nn/models.hpp"
#include "commdecode/planner.hpp"
#include "commdecode/transition.hpp"

namespace commdecode {

/// Exponential temperature decay, piecewise-constant between updates:
/// tau(k) = start * (end/start)^(min(k, decay_steps)/decay_steps), held
/// constant within each update_every-step window.
struct TemperatureSchedule {
  double tau_start = 10.0;
  double tau_end = 0.5;
  int decay_steps = 15000;
  int update_every = 500;
  int total_steps = 20000;

  double tau_at(int step) const;
};

/// Learned state decoder: an actions-encoder recurrent cell, a speaker
/// observation generator (message -> goal factor logits) and a listener
/// observation generator (message + action embedding -> listener factor
/// logits).
struct DecoderParams {
  GridConfig config;
  int alphabet = 25;
  int gru_hidden = 64;
  nn::ParamStore params;
  nn::GruParams enc;
  nn::MlpParams gen_speaker;   // [alphabet, hidden, W+H]
  nn::MlpParams gen_listener;  // [alphabet + gru_hidden, hidden, hidden, W+H]
};

DecoderParams make_decoder(const GridConfig& config, int alphabet, Rng& rng,
                           int gru_hidden = 64, int gen_hidden = 64);

/// Relaxed state: concatenation of four probability simplices
/// (goal_x, goal_y, listener_x, listener_y).
struct RelaxedState {
  std::vector<double> values;  // length 2W+2H
};

std::vector<double> action_onehot(Action a);

/// --- graph-building pieces (gradients flow into `grads` when non-null) ---

/// Recurrent pass over one-hot action vectors; returns the final hidden state.
nn::Var encode_actions_g(nn::Graph& g, const DecoderParams& dec,
                         nn::GradBuffers* grads, std::span<const Action> actions);

/// Speaker logits from G^s(m) (goal factors), listener logits from
/// G^l(m, e_a); each factor sampled independently via Gumbel-Softmax at
/// temperature tau and concatenated.
nn::Var generate_initial_state_g(nn::Graph& g, const DecoderParams& dec,
                                 nn::GradBuffers* grads, int message, nn::Var e_a,
                                 double tau, Rng& rng);

struct RolloutVars {
  std::vector<nn::Var> states;         // s_1 .. s_L
  std::vector<nn::Var> action_logits;  // pi(s_0) .. pi(s_{L-1})
};

/// Simulates the game through the frozen joint policy and transition model,
/// conditioning each transition on the ground-truth action. Gradients reach
/// s0 (and through it the decoder parameters) but never the policy or
/// transition parameters.
RolloutVars simulated_rollout_g(nn::Graph& g, nn::Var s0,
                                std::span<const Action> actions,
                                const DifferentiablePolicy& policy,
                                const TransitionModel& model, double tau, Rng& rng);

/// Sum over steps of the cross-entropy between predicted action logits and
/// the demonstrator's actions.
nn::Var reconstruction_loss_g(nn::Graph& g, std::span<const nn::Var> action_logits,
                              std::span<const Action> actions);

/// --- plain (tape-free or scratch-tape) wrappers ---

std::vector<double> encode_actions(const DecoderParams& dec,
                                   std::span<const Action> actions);
RelaxedState generate_initial_state(const DecoderParams& dec, int message,
                                    std::span<const double> e_a, double tau, Rng& rng);

/// Deterministic evaluation-time goal prediction: argmax-decodes the speaker
/// generator's logits; no sampling. The action sequence is accepted for
/// interface parity but does not influence the output.
Cell predict_goal(const DecoderParams& dec, int message,
                  std::span<const Action> actions = {});

/// --- demonstration sources ---

class DemoSource {
 public:
  virtual ~DemoSource() = default;
  /// Returns up to n demonstrations; filtering may shrink a batch.
  virtual std::vector<Demonstration> next_batch(std::size_t n, Rng& rng) = 0;
};

/// Fresh filtered episodes per call: initial states from sample_initial
/// (immediate terminations are impossible by construction) and episodes that
/// hit the horizon without terminating are dropped from the batch.
class OnlineDemoSource : public DemoSource {
 public:
  OnlineDemoSource(const QTable& q, const MessageMapping& mapping,
                   GridConfig config, double temperature = 0.0);
  std::vector<Demonstration> next_batch(std::size_t n, Rng& rng) override;

 private:
  const QTable& q_;
  MessageMapping mapping_;
  GridConfig config_;
  double temperature_;
};

/// Replays a fixed corpus in order; throws when the corpus runs out.
class DatasetDemoSource : public DemoSource {
 public:
  explicit DatasetDemoSource(std::vector<Demonstration> demos);
  std::vector<Demonstration> next_batch(std::size_t n, Rng& rng) override;

 private:
  std::vector<Demonstration> demos_;
  std::size_t pos_ = 0;
};

/// --- training and evaluation ---

struct DecoderTrainConfig {
  TemperatureSchedule schedule;
  int batch = 512;
  double lr = 1e-3;
  int eval_every = 500;
  int gru_hidden = 64;
  int gen_hidden = 64;
};

struct TrainLogRow {
  int step;
  double loss;
  double tau;
  std::optional<double> eval_accuracy;
};

struct DecoderTrainResult {
  DecoderParams params;
  std::vector<TrainLogRow> log;
};

/// Runs schedule.total_steps optimizer steps; each step draws a fresh batch,
/// averages the reconstruction loss over it and updates only the decoder
/// parameters. eval_mapping, when given, scores per-message goal prediction
/// accuracy every eval_every steps.
DecoderTrainResult train_state_decoder(const DecoderTrainConfig& cfg,
                                       const DifferentiablePolicy& policy,
                                       const TransitionModel& model,
                                       DemoSource& source, std::uint64_t seed,
                                       const MessageMapping* eval_mapping);

struct HeatmapEntry {
  Cell true_goal;
  Cell predicted;
  double proportion;  // max-normalized within each true goal's heatmap
};

struct EvalMetrics {
  double accuracy = 0.0;                        // exact-match rate over demos
  std::map<int, std::size_t> manhattan_histogram;  // distance -> demo count
  std::vector<HeatmapEntry> heatmap;
  int worst_distance = 0;                        // over per-message predictions
  std::size_t message_count = 0;
  std::size_t miss_count = 0;                    // messages predicted wrong
  std::size_t misses_at_distance_1 = 0;
};

/// Scores a decoder on demonstrations that carry ground truth (throws
/// DomainError otherwise). Metrics are independent of demo ordering.
EvalMetrics evaluate(const DecoderParams& dec, std::span<const Demonstration> demos);

void save_heatmap_csv(const EvalMetrics& metrics, const std::string& path);
void save_training_log_csv(std::span<const TrainLogRow> log, const std::string& path);

}  // namespace commdecode
