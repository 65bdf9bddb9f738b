#include "commdecode/nn/models.hpp"

#include "commdecode/errors.hpp"

namespace commdecode::nn {

MlpParams make_mlp(ParamStore& store, const std::string& prefix,
                   std::span<const int> widths, Rng& rng, double hidden_gain) {
  if (widths.size() < 2) throw DomainError("make_mlp: need at least input and output widths");
  MlpParams mlp;
  mlp.widths.assign(widths.begin(), widths.end());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string tag = prefix + ".l" + std::to_string(l);
    const int w_id = store.add_uniform(tag + ".w", widths[l + 1], widths[l], rng);
    if (l + 2 < widths.size() && hidden_gain != 1.0)
      for (double& x : store.at(w_id).v) x *= hidden_gain;
    mlp.w.push_back(w_id);
    mlp.b.push_back(store.add_uniform(tag + ".b", widths[l + 1], 0, rng, widths[l]));
  }
  return mlp;
}

Var mlp_forward(Graph& g, const ParamStore& store, const MlpParams& mlp, Var x,
                GradBuffers* grads) {
  Var h = x;
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    const Var w = g.param(store.at(mlp.w[l]), grads ? &grads->g[static_cast<std::size_t>(mlp.w[l])] : nullptr);
    const Var b = g.param(store.at(mlp.b[l]), grads ? &grads->g[static_cast<std::size_t>(mlp.b[l])] : nullptr);
    h = g.affine(w, h, b);
    if (l + 1 < mlp.w.size()) h = g.relu(h);
  }
  return h;
}

std::vector<double> mlp_eval(const ParamStore& store, const MlpParams& mlp,
                             std::span<const double> x) {
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < mlp.w.size(); ++l) {
    const ParamTensor& W = store.at(mlp.w[l]);
    const ParamTensor& B = store.at(mlp.b[l]);
    if (static_cast<int>(cur.size()) != W.cols)
      throw DomainError("mlp_eval: input width mismatch");
    next.assign(static_cast<std::size_t>(W.rows), 0.0);
    for (int i = 0; i < W.rows; ++i) {
      double acc = B.v[static_cast<std::size_t>(i)];
      const double* Wr = W.v.data() + static_cast<std::size_t>(i) * W.cols;
      for (int j = 0; j < W.cols; ++j) acc += Wr[j] * cur[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(i)] = acc;
    }
    if (l + 1 < mlp.w.size())
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    cur.swap(next);
  }
  return cur;
}

GruParams make_gru(ParamStore& store, const std::string& prefix, int input,
                   int hidden, Rng& rng) {
  if (input < 1 || hidden < 1) throw DomainError("make_gru: bad widths");
  GruParams p;
  p.input = input;
  p.hidden = hidden;
  p.wz = store.add_uniform(prefix + ".wz", hidden, input, rng);
  p.uz = store.add_uniform(prefix + ".uz", hidden, hidden, rng);
  p.bz = store.add_uniform(prefix + ".bz", hidden, 0, rng, hidden);
  p.wr = store.add_uniform(prefix + ".wr", hidden, input, rng);
  p.ur = store.add_uniform(prefix + ".ur", hidden, hidden, rng);
  p.br = store.add_uniform(prefix + ".br", hidden, 0, rng, hidden);
  p.wc = store.add_uniform(prefix + ".wc", hidden, input, rng);
  p.uc = store.add_uniform(prefix + ".uc", hidden, hidden, rng);
  p.bc = store.add_uniform(prefix + ".bc", hidden, 0, rng, hidden);
  return p;
}

Var gru_cell(Graph& g, const ParamStore& store, const GruParams& gru, Var x,
             Var h, GradBuffers* grads) {
  auto leaf = [&](int id) {
    return g.param(store.at(id), grads ? &grads->g[static_cast<std::size_t>(id)] : nullptr);
  };
  const Var z = g.sigmoid(g.affine2(leaf(gru.wz), x, leaf(gru.uz), h, leaf(gru.bz)));
  const Var r = g.sigmoid(g.affine2(leaf(gru.wr), x, leaf(gru.ur), h, leaf(gru.br)));
  const Var rh = g.mul(r, h);
  const Var c = g.tanh_act(g.affine2(leaf(gru.wc), x, leaf(gru.uc), rh, leaf(gru.bc)));
  return g.gate_mix(z, h, c);
}

Var gru_forward(Graph& g, const ParamStore& store, const GruParams& gru,
                std::span<const std::vector<double>> sequence, GradBuffers* grads) {
  if (sequence.empty()) throw DomainError("gru_forward: empty sequence");
  const std::vector<double> zeros(static_cast<std::size_t>(gru.hidden), 0.0);
  Var h = g.input(zeros);
  for (const auto& step : sequence) {
    if (static_cast<int>(step.size()) != gru.input)
      throw DomainError("gru_forward: input width mismatch");
    const Var x = g.input(step);
    h = gru_cell(g, store, gru, x, h, grads);
  }
  return h;
}

}  // namespace commdecode::nn
