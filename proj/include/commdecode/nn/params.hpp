#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "commdecode/rng.hpp"

namespace commdecode::nn {

/// One named parameter tensor. cols == 0 denotes a vector of length rows,
/// otherwise a rows x cols matrix stored row-major.
struct ParamTensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  std::size_t size() const { return v.size(); }
};

/// Flat collection of parameter tensors owned by one model.
class ParamStore {
 public:
  int add_zeros(std::string name, int rows, int cols = 0);
  /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, fan_in = cols for
  /// matrices (explicit fan_in for vectors).
  int add_uniform(std::string name, int rows, int cols, Rng& rng, int fan_in = 0);

  ParamTensor& at(int id) { return tensors_.at(static_cast<std::size_t>(id)); }
  const ParamTensor& at(int id) const { return tensors_.at(static_cast<std::size_t>(id)); }

  std::size_t count() const { return tensors_.size(); }
  std::size_t total_size() const;

  std::vector<ParamTensor>& tensors() { return tensors_; }
  const std::vector<ParamTensor>& tensors() const { return tensors_; }

 private:
  std::vector<ParamTensor> tensors_;
};

/// Per-tensor gradient accumulators matching a ParamStore's layout.
struct GradBuffers {
  std::vector<std::vector<double>> g;

  explicit GradBuffers(const ParamStore& store);
  GradBuffers() = default;

  void match(const ParamStore& store);
  void zero();
  void scale(double s);
  /// Sum of another accumulator (same layout) into this one.
  void accumulate(const GradBuffers& other);
};

}  // namespace commdecode::nn
