#include "commdecode/nn/params.hpp"

#include <cmath>

#include "commdecode/errors.hpp"

namespace commdecode::nn {

int ParamStore::add_zeros(std::string name, int rows, int cols) {
  if (rows < 1 || cols < 0) throw DomainError("ParamStore: bad shape for " + name);
  ParamTensor t;
  t.name = std::move(name);
  t.rows = rows;
  t.cols = cols;
  t.v.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols == 0 ? 1 : cols), 0.0);
  tensors_.push_back(std::move(t));
  return static_cast<int>(tensors_.size()) - 1;
}

int ParamStore::add_uniform(std::string name, int rows, int cols, Rng& rng, int fan_in) {
  const int id = add_zeros(std::move(name), rows, cols);
  ParamTensor& t = tensors_.back();
  const int fi = fan_in > 0 ? fan_in : (cols > 0 ? cols : rows);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fi));
  for (double& x : t.v) x = (2.0 * rng.uniform_open01() - 1.0) * bound;
  return id;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

GradBuffers::GradBuffers(const ParamStore& store) { match(store); }

void GradBuffers::match(const ParamStore& store) {
  g.resize(store.count());
  for (std::size_t i = 0; i < store.count(); ++i)
    g[i].assign(store.at(static_cast<int>(i)).size(), 0.0);
}

void GradBuffers::zero() {
  for (auto& t : g)
    for (double& x : t) x = 0.0;
}

void GradBuffers::scale(double s) {
  for (auto& t : g)
    for (double& x : t) x *= s;
}

void GradBuffers::accumulate(const GradBuffers& other) {
  if (other.g.size() != g.size()) throw UsageError("GradBuffers: layout mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (other.g[i].size() != g[i].size()) throw UsageError("GradBuffers: layout mismatch");
    for (std::size_t j = 0; j < g[i].size(); ++j) g[i][j] += other.g[i][j];
  }
}

}  // namespace commdecode::nn
