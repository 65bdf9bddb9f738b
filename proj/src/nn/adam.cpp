#include "commdecode/nn/adam.hpp"

#include <cmath>

#include "commdecode/errors.hpp"

namespace commdecode::nn {

Adam::Adam(AdamConfig cfg, const ParamStore& store) : cfg_(cfg) {
  m_.resize(store.count());
  v_.resize(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    m_[i].assign(store.at(static_cast<int>(i)).size(), 0.0);
    v_[i].assign(store.at(static_cast<int>(i)).size(), 0.0);
  }
}

void Adam::step(ParamStore& store, const GradBuffers& grads) {
  if (grads.g.size() != m_.size()) throw UsageError("Adam::step: layout mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    auto& p = store.at(static_cast<int>(i)).v;
    const auto& g = grads.g[i];
    if (g.size() != p.size()) throw UsageError("Adam::step: tensor size mismatch");
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      if (!std::isfinite(gj))
        throw NumericError("adam", "non-finite gradient for " + store.at(static_cast<int>(i)).name);
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace commdecode::nn
