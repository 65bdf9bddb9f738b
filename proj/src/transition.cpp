#include "commdecode/transition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>

#include "commdecode/errors.hpp"
#include "commdecode/nn/adam.hpp"
#include "commdecode/nn/graph.hpp"

namespace commdecode {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

std::vector<double> with_action_onehot(std::span<const double> features, int action) {
  std::vector<double> in(features.begin(), features.end());
  in.resize(features.size() + 4, 0.0);
  in[features.size() + static_cast<std::size_t>(action)] = 1.0;
  return in;
}

std::array<int, 4> state_factors(const State& s) {
  return {s.goal.x, s.goal.y, s.listener.x, s.listener.y};
}

}  // namespace

std::vector<double> TransitionModel::logits(std::span<const double> state_features,
                                            int action) const {
  if (action < 0 || action > 3) throw DomainError("TransitionModel: bad action index");
  const auto in = with_action_onehot(state_features, action);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(config.feature_size()));
  for (const auto& head : heads) {
    const auto part = nn::mlp_eval(params, head, in);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

State TransitionModel::predict(std::span<const double> state_features, int action) const {
  return decode_state_features(logits(state_features, action), config);
}

nn::Var transition_logits_g(nn::Graph& g, const TransitionModel& model,
                            nn::Var state_action) {
  std::array<nn::Var, 4> parts;
  for (std::size_t f = 0; f < 4; ++f)
    parts[f] = nn::mlp_forward(g, model.params, model.heads[f], state_action, nullptr);
  return g.concat(parts);
}

std::vector<TransitionSample> generate_transitions(const QTable& q,
                                                   const GridConfig& config,
                                                   std::size_t count,
                                                   std::uint64_t seed) {
  std::vector<TransitionSample> out;
  out.reserve(count);
  const Rng base(seed);
  std::uint64_t episode = 0;
  while (out.size() < count) {
    Rng ep = base.derive(episode++);
    State s = sample_initial(config, ep);
    bool terminated = false;
    for (int t = 0; t < config.horizon && !terminated && out.size() < count; ++t) {
      const Action a = sample_action(q, s, 0.0, ep);
      const StepOutcome o = step(s, a, config);
      TransitionSample sample;
      sample.state_features = encode_state_features(s, config);
      sample.action = static_cast<int>(a);
      sample.next_factors = state_factors(o.next_state);
      out.push_back(std::move(sample));
      s = o.next_state;
      terminated = o.terminated;
    }
  }
  return out;
}

TransitionTrainResult train_transition(const std::vector<TransitionSample>& data,
                                       const GridConfig& config,
                                       const TransitionTrainConfig& cfg, Rng& rng) {
  if (data.empty()) throw DomainError("train_transition: empty dataset");
  const int w = config.width, h = config.height;
  for (const auto& s : data)
    if (static_cast<int>(s.state_features.size()) != config.feature_size())
      throw DomainError("train_transition: sample feature length mismatch");

  // collapse duplicates: the deterministic dynamics make repeated pairs
  // pure reweighting, and uniform coverage trains the slowest pair fastest
  std::set<std::pair<std::vector<double>, int>> seen;
  std::vector<const TransitionSample*> distinct;
  for (const auto& s : data)
    if (seen.insert({s.state_features, s.action}).second) distinct.push_back(&s);

  TransitionTrainResult result;
  TransitionModel& model = result.model;
  model.config = config;

  const int in_width = config.feature_size() + 4;
  const std::array<int, 4> factor_width = {w, h, w, h};
  for (std::size_t f = 0; f < 4; ++f) {
    const std::array<int, 4> widths = {in_width, cfg.hidden, cfg.hidden, factor_width[f]};
    // He-uniform hidden layers and a zeroed output layer: margins must clear
    // the loss target inside the fixed step budget at the fixed learning rate
    model.heads[f] = nn::make_mlp(model.params, "head" + std::to_string(f), widths,
                                  rng, std::sqrt(6.0));
    auto& W = model.params.at(model.heads[f].w.back());
    auto& B = model.params.at(model.heads[f].b.back());
    std::fill(W.v.begin(), W.v.end(), 0.0);
    std::fill(B.v.begin(), B.v.end(), 0.0);
  }

  nn::GradBuffers grads(model.params);
  nn::Adam adam({.lr = cfg.lr}, model.params);
  nn::Graph g;

  const std::size_t batch =
      cfg.batch <= 0 ? distinct.size()
                     : std::min<std::size_t>(static_cast<std::size_t>(cfg.batch),
                                             distinct.size());
  std::vector<std::size_t> order(distinct.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t pos = order.size();

  for (int step_i = 0; step_i < cfg.steps; ++step_i) {
    g.reset();
    grads.zero();
    nn::Var total = -1;
    for (std::size_t k = 0; k < batch; ++k) {
      if (pos >= order.size()) {  // fresh epoch
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[rng.uniform_below(i)]);
        pos = 0;
      }
      const TransitionSample& s = *distinct[order[pos++]];
      const nn::Var x = g.input(with_action_onehot(s.state_features, s.action));
      for (std::size_t f = 0; f < 4; ++f) {
        const nn::Var logits = nn::mlp_forward(g, model.params, model.heads[f], x, &grads);
        const nn::Var ce = g.cross_entropy(logits, s.next_factors[f]);
        total = total < 0 ? ce : g.add(total, ce);
      }
    }
    const nn::Var mean = g.scale(total, 1.0 / static_cast<double>(batch));
    const double loss = g.scalar_value(mean);
    result.loss_curve.push_back(loss);
    if (result.first_step_below_1e3 < 0 && loss < 1e-3)
      result.first_step_below_1e3 = step_i;
    g.backward(mean);
    adam.step(model.params, grads);
  }
  return result;
}

double rollout_accuracy(const TransitionModel& model, const QTable& q,
                        const GridConfig& config, std::size_t episodes,
                        std::uint64_t seed) {
  const Rng base(seed);
  std::size_t matched = 0, total = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng ep = base.derive(e);
    State true_state = sample_initial(config, ep);
    State model_state = true_state;  // model starts from the true initial state
    bool terminated = false;
    for (int t = 0; t < config.horizon && !terminated; ++t) {
      const Action a = sample_action(q, true_state, 0.0, ep);
      const StepOutcome o = step(true_state, a, config);
      const State predicted = model.predict(
          encode_state_features(model_state, config), static_cast<int>(a));
      ++total;
      if (predicted == o.next_state) ++matched;
      true_state = o.next_state;
      model_state = predicted;  // recursive: feed its own prediction back
      terminated = o.terminated;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(matched) / static_cast<double>(total);
}

void save_transitions_jsonl(const std::vector<TransitionSample>& data,
                            const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const TransitionSample& s : data) {
    ojson j;
    j["s"] = s.state_features;
    j["a"] = s.action;
    j["next"] = s.next_factors;
    f << j.dump() << '\n';
  }
}

std::vector<TransitionSample> load_transitions_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  std::vector<TransitionSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    TransitionSample s;
    s.state_features = j.at("s").get<std::vector<double>>();
    s.action = j.at("a").get<int>();
    const auto& nf = j.at("next");
    for (std::size_t i = 0; i < 4; ++i) s.next_factors[i] = nf.at(i).get<int>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace commdecode
