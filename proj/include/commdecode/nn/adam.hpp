#pragma once

#include <vector>

#include "commdecode/nn/params.hpp"

namespace commdecode::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam optimizer state: per-parameter first/second moment accumulators and
/// a step counter, with bias-corrected updates.
class Adam {
 public:
  Adam(AdamConfig cfg, const ParamStore& store);

  /// Applies one update from the given gradients (same layout as the store).
  void step(ParamStore& store, const GradBuffers& grads);

  long steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace commdecode::nn
