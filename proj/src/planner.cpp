#include "commdecode/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "commdecode/errors.hpp"
#include "commdecode/nn/adam.hpp"
#include "commdecode/nn/graph.hpp"

namespace commdecode {

QTable::QTable(GridConfig config) : config_(config) {
  config_.validate();
  values_.assign(static_cast<std::size_t>(config_.cells()) * config_.cells() * 4, 0.0);
}

int QTable::state_index(const State& s) const {
  validate_state(s, config_);
  const int goal_flat = s.goal.y * config_.width + s.goal.x;
  const int listener_flat = s.listener.y * config_.width + s.listener.x;
  return goal_flat * config_.cells() + listener_flat;
}

double QTable::q(const State& s, Action a) const {
  return values_[static_cast<std::size_t>(state_index(s)) * 4 +
                 static_cast<std::size_t>(a)];
}

double& QTable::q_mut(const State& s, Action a) {
  return values_[static_cast<std::size_t>(state_index(s)) * 4 +
                 static_cast<std::size_t>(a)];
}

double QTable::v(const State& s) const {
  if (s.listener == s.goal) throw UsageError("QTable::v: terminal state");
  const std::size_t base = static_cast<std::size_t>(state_index(s)) * 4;
  double best = values_[base];
  for (int a = 1; a < 4; ++a) best = std::max(best, values_[base + static_cast<std::size_t>(a)]);
  return best;
}

namespace {
void for_each_state(const GridConfig& c, auto&& fn) {
  for (int gy = 0; gy < c.height; ++gy)
    for (int gx = 0; gx < c.width; ++gx)
      for (int ly = 0; ly < c.height; ++ly)
        for (int lx = 0; lx < c.width; ++lx)
          fn(State{Cell{lx, ly}, Cell{gx, gy}});
}
}  // namespace

namespace {
/// One Jacobi sweep; returns true if any entry changed.
bool vi_sweep(const GridConfig& config, const QTable& table, QTable& next) {
  bool changed = false;
  for_each_state(config, [&](const State& s) {
    if (s.listener == s.goal) return;  // terminal: Q stays zero
    for (Action a : kAllActions) {
      const StepOutcome out = step(s, a, config);
      const double q = out.terminated ? 1.0 : -1.0 + table.v(out.next_state);
      if (q != table.q(s, a)) changed = true;
      next.q_mut(s, a) = q;
    }
  });
  return changed;
}
}  // namespace

QTable value_iteration(const GridConfig& config) {
  QTable table(config);
  QTable next(config);
  const int max_sweeps = 4 * (config.width + config.height) + 8;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    const bool changed = vi_sweep(config, table, next);
    std::swap(table, next);
    if (!changed) break;
  }
  table.set_sweeps(sweep);
  return table;
}

QTable value_iteration_truncated(const GridConfig& config, int sweeps) {
  QTable table(config);
  QTable next(config);
  for (int i = 0; i < sweeps; ++i) {
    vi_sweep(config, table, next);
    std::swap(table, next);
  }
  table.set_sweeps(sweeps);
  return table;
}

std::vector<Action> greedy_action_set(const QTable& q, const State& state, double eps) {
  if (state.listener == state.goal)
    throw UsageError("greedy_action_set: terminal state");
  const double best = q.v(state);
  std::vector<Action> out;
  for (Action a : kAllActions)
    if (q.q(state, a) >= best - eps) out.push_back(a);
  return out;
}

Action sample_action(const QTable& q, const State& state, double temperature, Rng& rng) {
  if (temperature < 0.0) throw DomainError("sample_action: negative temperature");
  if (state.listener == state.goal)
    throw UsageError("sample_action: terminal state");
  if (temperature == 0.0) {
    const auto greedy = greedy_action_set(q, state);
    return greedy[rng.uniform_below(greedy.size())];
  }
  std::array<double, 4> z;
  double mx = -1e300;
  for (int a = 0; a < 4; ++a) {
    z[static_cast<std::size_t>(a)] = q.q(state, static_cast<Action>(a)) / temperature;
    mx = std::max(mx, z[static_cast<std::size_t>(a)]);
  }
  double sum = 0.0;
  for (double& x : z) {
    x = std::exp(x - mx);
    sum += x;
  }
  const double u = rng.uniform_open01() * sum;
  double acc = 0.0;
  for (int a = 0; a < 4; ++a) {
    acc += z[static_cast<std::size_t>(a)];
    if (u <= acc) return static_cast<Action>(a);
  }
  return Action::Right;
}

void QTable::save_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << "listener_x,listener_y,goal_x,goal_y,q_up,q_down,q_left,q_right\n";
  char buf[64];
  for_each_state(config_, [&](const State& s) {
    f << s.listener.x << ',' << s.listener.y << ',' << s.goal.x << ',' << s.goal.y;
    for (Action a : kAllActions) {
      std::snprintf(buf, sizeof buf, "%.17g", q(s, a));
      f << ',' << buf;
    }
    f << '\n';
  });
}

QTable QTable::load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingArtifact(path);
  std::string line;
  if (!std::getline(f, line)) throw ParseError(1, "empty q-table file");
  // infer the grid from the maximum coordinates
  struct Row {
    State s;
    std::array<double, 4> q;
  };
  std::vector<Row> rows;
  int w = 0, h = 0;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    Row r;
    std::istringstream ss(line);
    std::string tok;
    auto next_tok = [&]() {
      if (!std::getline(ss, tok, ',')) throw ParseError(lineno, "missing column");
      return tok;
    };
    try {
      r.s.listener.x = std::stoi(next_tok());
      r.s.listener.y = std::stoi(next_tok());
      r.s.goal.x = std::stoi(next_tok());
      r.s.goal.y = std::stoi(next_tok());
      for (int a = 0; a < 4; ++a) r.q[static_cast<std::size_t>(a)] = std::stod(next_tok());
    } catch (const std::invalid_argument&) {
      throw ParseError(lineno, "malformed number");
    }
    w = std::max({w, r.s.listener.x + 1, r.s.goal.x + 1});
    h = std::max({h, r.s.listener.y + 1, r.s.goal.y + 1});
    rows.push_back(r);
  }
  GridConfig config = GridConfig::make(w, h);
  QTable table(config);
  for (const Row& r : rows)
    for (int a = 0; a < 4; ++a)
      table.q_mut(r.s, static_cast<Action>(a)) = r.q[static_cast<std::size_t>(a)];
  return table;
}

std::array<double, 4> DifferentiablePolicy::logits(std::span<const double> features) const {
  const auto out = nn::mlp_eval(params, arch, features);
  return {out[0], out[1], out[2], out[3]};
}

Action DifferentiablePolicy::greedy_action(const State& s) const {
  const auto f = encode_state_features(s, config);
  const auto l = logits(f);
  int best = 0;
  for (int a = 1; a < 4; ++a)
    if (l[static_cast<std::size_t>(a)] > l[static_cast<std::size_t>(best)]) best = a;
  return static_cast<Action>(best);
}

namespace {

/// States with listener != goal, their features, and greedy target
/// distributions (uniform over the greedy set).
struct DistillDataset {
  std::vector<State> states;
  std::vector<std::vector<double>> features;
  std::vector<std::array<double, 4>> targets;
};

DistillDataset build_distill_dataset(const QTable& q) {
  DistillDataset d;
  const GridConfig& c = q.config();
  for_each_state(c, [&](const State& s) {
    if (s.listener == s.goal) return;
    d.states.push_back(s);
    d.features.push_back(encode_state_features(s, c));
    const auto greedy = greedy_action_set(q, s);
    std::array<double, 4> t{0.0, 0.0, 0.0, 0.0};
    for (Action a : greedy) t[static_cast<std::size_t>(a)] = 1.0 / static_cast<double>(greedy.size());
    d.targets.push_back(t);
  });
  return d;
}

std::vector<std::string> argmax_violations(const DifferentiablePolicy& pi,
                                           const QTable& q,
                                           const DistillDataset& d) {
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < d.states.size(); ++i) {
    const auto l = pi.logits(d.features[i]);
    int best = 0;
    for (int a = 1; a < 4; ++a)
      if (l[static_cast<std::size_t>(a)] > l[static_cast<std::size_t>(best)]) best = a;
    if (d.targets[i][static_cast<std::size_t>(best)] == 0.0) {
      const State& s = d.states[i];
      bad.push_back("listener(" + std::to_string(s.listener.x) + "," +
                    std::to_string(s.listener.y) + ") goal(" + std::to_string(s.goal.x) +
                    "," + std::to_string(s.goal.y) + ") argmax=" +
                    action_name(static_cast<Action>(best)));
    }
  }
  (void)q;
  return bad;
}

}  // namespace

DifferentiablePolicy distill_policy(const QTable& q, const DistillConfig& cfg, Rng& rng) {
  const GridConfig& c = q.config();
  DifferentiablePolicy pi;
  pi.config = c;
  const std::array<int, 4> widths = {c.feature_size(), cfg.hidden, cfg.hidden, 4};
  pi.arch = nn::make_mlp(pi.params, "policy", widths, rng);

  const DistillDataset data = build_distill_dataset(q);
  nn::GradBuffers grads(pi.params);
  nn::Adam adam({.lr = cfg.lr}, pi.params);
  nn::Graph g;

  const std::size_t n = data.states.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), n);
  for (int step_i = 0; step_i < cfg.max_steps; ++step_i) {
    g.reset();
    grads.zero();
    std::vector<nn::Var> losses;
    losses.reserve(batch);
    for (std::size_t k = 0; k < batch; ++k) {
      const std::size_t i = rng.uniform_below(n);
      const nn::Var x = g.input(data.features[i]);
      const nn::Var logits = nn::mlp_forward(g, pi.params, pi.arch, x, &grads);
      losses.push_back(g.cross_entropy_soft(logits, data.targets[i]));
    }
    nn::Var total = losses[0];
    for (std::size_t k = 1; k < losses.size(); ++k) total = g.add(total, losses[k]);
    const nn::Var mean = g.scale(total, 1.0 / static_cast<double>(losses.size()));
    g.backward(mean);
    adam.step(pi.params, grads);

    if ((step_i + 1) % cfg.check_every == 0 &&
        argmax_violations(pi, q, data).empty())
      return pi;
  }
  auto bad = argmax_violations(pi, q, data);
  if (bad.empty()) return pi;
  throw TrainingFailure("distill_policy: argmax consistency not reached within " +
                            std::to_string(cfg.max_steps) + " steps (" +
                            std::to_string(bad.size()) + " offending states)",
                        std::move(bad));
}

}  // namespace commdecode
