#include "commdecode/state_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "commdecode/errors.hpp"
#include "commdecode/nn/adam.hpp"

namespace commdecode {

double TemperatureSchedule::tau_at(int step) const {
  const int held = (step / update_every) * update_every;
  const int k = std::min(held, decay_steps);
  const double frac = static_cast<double>(k) / static_cast<double>(decay_steps);
  return tau_start * std::pow(tau_end / tau_start, frac);
}

DecoderParams make_decoder(const GridConfig& config, int alphabet, Rng& rng,
                           int gru_hidden, int gen_hidden) {
  config.validate();
  if (alphabet < 1) throw DomainError("make_decoder: alphabet must be positive");
  DecoderParams d;
  d.config = config;
  d.alphabet = alphabet;
  d.gru_hidden = gru_hidden;
  d.enc = nn::make_gru(d.params, "enc", 4, gru_hidden, rng);
  const int wh = config.width + config.height;
  const std::array<int, 3> sw = {alphabet, gen_hidden, wh};
  d.gen_speaker = nn::make_mlp(d.params, "gen_s", sw, rng);
  const std::array<int, 4> lw = {alphabet + gru_hidden, gen_hidden, gen_hidden, wh};
  d.gen_listener = nn::make_mlp(d.params, "gen_l", lw, rng);
  return d;
}

std::vector<double> action_onehot(Action a) {
  std::vector<double> v(4, 0.0);
  v[static_cast<std::size_t>(a)] = 1.0;
  return v;
}

namespace {
std::vector<double> message_onehot(int message, int alphabet) {
  if (message < 0 || message >= alphabet)
    throw DomainError("unknown message symbol " + std::to_string(message));
  std::vector<double> v(static_cast<std::size_t>(alphabet), 0.0);
  v[static_cast<std::size_t>(message)] = 1.0;
  return v;
}
}  // namespace

nn::Var encode_actions_g(nn::Graph& g, const DecoderParams& dec,
                         nn::GradBuffers* grads, std::span<const Action> actions) {
  if (actions.empty()) throw DomainError("encode_actions: empty action list");
  std::vector<std::vector<double>> seq;
  seq.reserve(actions.size());
  for (Action a : actions) seq.push_back(action_onehot(a));
  return nn::gru_forward(g, dec.params, dec.enc, seq, grads);
}

nn::Var generate_initial_state_g(nn::Graph& g, const DecoderParams& dec,
                                 nn::GradBuffers* grads, int message, nn::Var e_a,
                                 double tau, Rng& rng) {
  if (!(tau > 0.0)) throw DomainError("generate_initial_state: tau must be positive");
  const int w = dec.config.width, h = dec.config.height;
  const nn::Var msg = g.input(message_onehot(message, dec.alphabet));
  const nn::Var speaker_logits = nn::mlp_forward(g, dec.params, dec.gen_speaker, msg, grads);
  const std::array<nn::Var, 2> listener_in = {msg, e_a};
  const nn::Var listener_logits = nn::mlp_forward(
      g, dec.params, dec.gen_listener, g.concat(listener_in), grads);

  const nn::Var gx = g.gumbel_softmax(g.slice(speaker_logits, 0, w), tau, rng);
  const nn::Var gy = g.gumbel_softmax(g.slice(speaker_logits, w, h), tau, rng);
  const nn::Var lx = g.gumbel_softmax(g.slice(listener_logits, 0, w), tau, rng);
  const nn::Var ly = g.gumbel_softmax(g.slice(listener_logits, w, h), tau, rng);
  const std::array<nn::Var, 4> parts = {gx, gy, lx, ly};
  return g.concat(parts);
}

RolloutVars simulated_rollout_g(nn::Graph& g, nn::Var s0,
                                std::span<const Action> actions,
                                const DifferentiablePolicy& policy,
                                const TransitionModel& model, double tau, Rng& rng) {
  const GridConfig& c = model.config;
  if (static_cast<int>(actions.size()) > c.horizon)
    throw DomainError("simulated_rollout: action list longer than horizon");
  const int w = c.width, h = c.height;

  RolloutVars out;
  nn::Var state = s0;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    out.action_logits.push_back(
        nn::mlp_forward(g, policy.params, policy.arch, state, nullptr));

    const nn::Var act = g.input(action_onehot(actions[t]));
    const std::array<nn::Var, 2> tin = {state, act};
    const nn::Var logits = transition_logits_g(g, model, g.concat(tin));
    const nn::Var gx = g.gumbel_softmax(g.slice(logits, 0, w), tau, rng);
    const nn::Var gy = g.gumbel_softmax(g.slice(logits, w, h), tau, rng);
    const nn::Var lx = g.gumbel_softmax(g.slice(logits, w + h, w), tau, rng);
    const nn::Var ly = g.gumbel_softmax(g.slice(logits, w + h + w, h), tau, rng);
    const std::array<nn::Var, 4> parts = {gx, gy, lx, ly};
    state = g.concat(parts);
    out.states.push_back(state);
  }
  return out;
}

nn::Var reconstruction_loss_g(nn::Graph& g, std::span<const nn::Var> action_logits,
                              std::span<const Action> actions) {
  if (action_logits.size() != actions.size())
    throw DomainError("reconstruction_loss: logits/action length mismatch");
  if (actions.empty()) throw DomainError("reconstruction_loss: empty sequence");
  nn::Var total = -1;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const nn::Var ce = g.cross_entropy(action_logits[t], static_cast<int>(actions[t]));
    total = total < 0 ? ce : g.add(total, ce);
  }
  return total;
}

std::vector<double> encode_actions(const DecoderParams& dec,
                                   std::span<const Action> actions) {
  nn::Graph g;
  const nn::Var h = encode_actions_g(g, dec, nullptr, actions);
  const auto v = g.value(h);
  return {v.begin(), v.end()};
}

RelaxedState generate_initial_state(const DecoderParams& dec, int message,
                                    std::span<const double> e_a, double tau, Rng& rng) {
  nn::Graph g;
  const nn::Var ev = g.input(e_a);
  const nn::Var s0 = generate_initial_state_g(g, dec, nullptr, message, ev, tau, rng);
  const auto v = g.value(s0);
  return RelaxedState{{v.begin(), v.end()}};
}

Cell predict_goal(const DecoderParams& dec, int message, std::span<const Action> actions) {
  (void)actions;  // the goal prediction reads only the speaker generator
  const auto logits =
      nn::mlp_eval(dec.params, dec.gen_speaker, message_onehot(message, dec.alphabet));
  const int w = dec.config.width, h = dec.config.height;
  Cell c;
  int best = 0;
  for (int i = 1; i < w; ++i)
    if (logits[static_cast<std::size_t>(i)] > logits[static_cast<std::size_t>(best)]) best = i;
  c.x = best;
  best = 0;
  for (int i = 1; i < h; ++i)
    if (logits[static_cast<std::size_t>(w + i)] > logits[static_cast<std::size_t>(w + best)]) best = i;
  c.y = best;
  return c;
}

OnlineDemoSource::OnlineDemoSource(const QTable& q, const MessageMapping& mapping,
                                   GridConfig config, double temperature)
    : q_(q), mapping_(mapping), config_(config), temperature_(temperature) {
  if (temperature < 0.0) throw DomainError("OnlineDemoSource: negative temperature");
}

std::vector<Demonstration> OnlineDemoSource::next_batch(std::size_t n, Rng& rng) {
  const Rng batch_base(rng.next_u64());
  std::vector<Demonstration> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng ep = batch_base.derive(i);
    State s = sample_initial(config_, ep);
    Demonstration d;
    d.message = mapping_.symbol_for(s.goal);
    d.oracle = s;
    bool terminated = false;
    for (int t = 0; t < config_.horizon && !terminated; ++t) {
      const Action a = sample_action(q_, s, temperature_, ep);
      d.actions.push_back(a);
      const StepOutcome o = step(s, a, config_);
      s = o.next_state;
      terminated = o.terminated;
    }
    d.terminated = terminated;
    if (terminated) out.push_back(std::move(d));  // non-ending episodes are dropped
  }
  return out;
}

DatasetDemoSource::DatasetDemoSource(std::vector<Demonstration> demos)
    : demos_(std::move(demos)) {}

std::vector<Demonstration> DatasetDemoSource::next_batch(std::size_t n, Rng& rng) {
  (void)rng;
  if (pos_ + n > demos_.size())
    throw std::runtime_error("DatasetDemoSource: demo source exhausted (" +
                             std::to_string(demos_.size() - pos_) + " left, " +
                             std::to_string(n) + " requested)");
  std::vector<Demonstration> out(demos_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 demos_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

DecoderTrainResult train_state_decoder(const DecoderTrainConfig& cfg,
                                       const DifferentiablePolicy& policy,
                                       const TransitionModel& model,
                                       DemoSource& source, std::uint64_t seed,
                                       const MessageMapping* eval_mapping) {
  const GridConfig& config = model.config;
  const Rng base(seed);
  Rng init_rng = base.derive(0xa11c);
  DecoderTrainResult result{
      make_decoder(config, config.message_alphabet_size, init_rng, cfg.gru_hidden,
                   cfg.gen_hidden),
      {}};
  DecoderParams& dec = result.params;

  nn::GradBuffers grads(dec.params);
  nn::Adam adam({.lr = cfg.lr}, dec.params);
  nn::Graph g;

  for (int step_i = 0; step_i < cfg.schedule.total_steps; ++step_i) {
    const double tau = cfg.schedule.tau_at(step_i);
    Rng step_rng = base.derive(static_cast<std::uint64_t>(step_i) + 1);
    Rng demo_rng = step_rng.derive(0);
    const auto batch = source.next_batch(static_cast<std::size_t>(cfg.batch), demo_rng);
    if (batch.empty())
      throw std::runtime_error("train_state_decoder: empty batch after filtering");

    g.reset();
    grads.zero();
    std::vector<nn::Var> losses;
    losses.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Demonstration& d = batch[i];
      Rng noise = step_rng.derive(i + 1);
      const nn::Var e_a = encode_actions_g(g, dec, &grads, d.actions);
      const nn::Var s0 =
          generate_initial_state_g(g, dec, &grads, d.message, e_a, tau, noise);
      const RolloutVars roll =
          simulated_rollout_g(g, s0, d.actions, policy, model, tau, noise);
      losses.push_back(reconstruction_loss_g(g, roll.action_logits, d.actions));
    }
    nn::Var total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i) total = g.add(total, losses[i]);
    const nn::Var mean = g.scale(total, 1.0 / static_cast<double>(losses.size()));
    const double loss = g.scalar_value(mean);
    g.backward(mean);
    adam.step(dec.params, grads);

    TrainLogRow row{step_i, loss, tau, std::nullopt};
    if (eval_mapping != nullptr && (step_i + 1) % cfg.eval_every == 0) {
      std::size_t hits = 0;
      for (const auto& [goal, symbol] : eval_mapping->map)
        if (predict_goal(dec, symbol) == goal) ++hits;
      row.eval_accuracy =
          static_cast<double>(hits) / static_cast<double>(eval_mapping->map.size());
    }
    result.log.push_back(row);
  }
  return result;
}

EvalMetrics evaluate(const DecoderParams& dec, std::span<const Demonstration> demos) {
  EvalMetrics m;
  if (demos.empty()) throw DomainError("evaluate: no demonstrations");

  // aggregate per true goal; predictions are deterministic per message
  std::map<Cell, std::map<Cell, std::size_t>> counts;  // true goal -> predicted -> n
  std::map<int, Cell> message_truth;
  std::size_t exact = 0;
  for (const Demonstration& d : demos) {
    if (!d.oracle) throw DomainError("evaluate: demonstration lacks ground truth");
    const Cell truth = d.oracle->goal;
    const Cell pred = predict_goal(dec, d.message, d.actions);
    counts[truth][pred]++;
    message_truth[d.message] = truth;
    const int dist = manhattan_distance(pred, truth);
    m.manhattan_histogram[dist]++;
    if (dist == 0) ++exact;
  }
  m.accuracy = static_cast<double>(exact) / static_cast<double>(demos.size());

  for (const auto& [truth, preds] : counts) {
    std::size_t total = 0, mx = 0;
    for (const auto& [pred, n] : preds) {
      total += n;
      mx = std::max(mx, n);
    }
    for (const auto& [pred, n] : preds)
      m.heatmap.push_back(HeatmapEntry{
          truth, pred, static_cast<double>(n) / static_cast<double>(mx)});
    (void)total;
  }

  m.message_count = message_truth.size();
  for (const auto& [symbol, truth] : message_truth) {
    const Cell pred = predict_goal(dec, symbol);
    const int dist = manhattan_distance(pred, truth);
    m.worst_distance = std::max(m.worst_distance, dist);
    if (dist > 0) {
      ++m.miss_count;
      if (dist == 1) ++m.misses_at_distance_1;
    }
  }
  return m;
}

void save_heatmap_csv(const EvalMetrics& metrics, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "true_gx,true_gy,pred_gx,pred_gy,proportion\n";
  char buf[64];
  for (const HeatmapEntry& e : metrics.heatmap) {
    std::snprintf(buf, sizeof buf, "%.17g", e.proportion);
    f << e.true_goal.x << ',' << e.true_goal.y << ',' << e.predicted.x << ','
      << e.predicted.y << ',' << buf << '\n';
  }
}

void save_training_log_csv(std::span<const TrainLogRow> log, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "step,loss,tau,eval_accuracy\n";
  char buf[64];
  for (const TrainLogRow& r : log) {
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    f << r.step << ',' << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.tau);
    f << buf << ',';
    if (r.eval_accuracy) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.eval_accuracy);
      f << buf;
    }
    f << '\n';
  }
}

}  // namespace commdecode
