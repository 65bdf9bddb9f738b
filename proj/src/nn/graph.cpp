#include "commdecode/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "commdecode/errors.hpp"

namespace commdecode::nn {

namespace {
bool all_finite(const double* p, int n) {
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}
}  // namespace

const char* Graph::op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Param: return "param";
    case Op::Affine: return "affine";
    case Op::Affine2: return "affine2";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::GateMix: return "gate_mix";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Sum: return "sum";
    case Op::Softmax: return "softmax";
    case Op::GumbelSoftmax: return "gumbel_softmax";
    case Op::CrossEntropy: return "cross_entropy";
    case Op::CrossEntropySoft: return "cross_entropy_soft";
  }
  return "?";
}

Var Graph::push(Node n) {
  if (n.pt == nullptr) {
    n.off = static_cast<int>(val_.size());
    val_.resize(val_.size() + static_cast<std::size_t>(n.len), 0.0);
  }
  if (n.requires_grad) {
    n.goff = static_cast<int>(grad_.size());
    grad_.resize(grad_.size() + static_cast<std::size_t>(n.len), 0.0);
  }
  nodes_.push_back(n);
  return static_cast<Var>(nodes_.size()) - 1;
}

int Graph::alloc_aux(int len) {
  const int off = static_cast<int>(aux_.size());
  aux_.resize(aux_.size() + static_cast<std::size_t>(len), 0.0);
  return off;
}

void Graph::reset() {
  nodes_.clear();
  val_.clear();
  grad_.clear();
  aux_.clear();
  param_cache_.clear();
}

std::span<const double> Graph::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v));
  return {vptr(n), static_cast<std::size_t>(n.len)};
}

std::span<const double> Graph::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v));
  if (n.goff < 0) throw UsageError("grad: node does not keep a gradient");
  return {grad_.data() + n.goff, static_cast<std::size_t>(n.len)};
}

void Graph::check_finite_value(const Node& n) {
  if (!all_finite(vptr(n), n.len))
    throw NumericError(op_name(n.op), "non-finite value in forward pass");
}

void Graph::check_finite_grad(const Node& n) {
  if (n.goff >= 0 && !all_finite(grad_.data() + n.goff, n.len))
    throw NumericError(op_name(n.op), "non-finite gradient in backward pass");
}

Var Graph::input(std::span<const double> data, bool requires_grad) {
  Node n;
  n.op = Op::Input;
  n.len = static_cast<int>(data.size());
  n.requires_grad = requires_grad;
  const Var v = push(n);
  std::copy(data.begin(), data.end(), val_.begin() + nodes_.back().off);
  check_finite_value(nodes_.back());
  return v;
}

Var Graph::param(const ParamTensor& t, std::vector<double>* grad_sink) {
  auto it = param_cache_.find(&t);
  if (it != param_cache_.end()) {
    if (nodes_[static_cast<std::size_t>(it->second)].sink != grad_sink)
      throw UsageError("param: tensor " + t.name +
                       " already bound with a different gradient sink");
    return it->second;
  }
  Node n;
  n.op = Op::Param;
  n.pt = &t;
  n.sink = grad_sink;
  n.len = static_cast<int>(t.size());
  n.rows = t.rows;
  n.cols = t.cols;
  n.requires_grad = grad_sink != nullptr;
  if (grad_sink != nullptr && grad_sink->size() != t.size())
    throw UsageError("param: gradient sink size mismatch for " + t.name);
  const Var v = push(n);
  param_cache_.emplace(&t, v);
  return v;
}

Var Graph::affine(Var w, Var x, Var b) {
  const Node& wn = nodes_.at(static_cast<std::size_t>(w));
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  if (wn.pt == nullptr || wn.cols == 0) throw UsageError("affine: W must be a matrix leaf");
  if (xn.len != wn.cols) throw DomainError("affine: input width mismatch");
  if (b >= 0 && nodes_.at(static_cast<std::size_t>(b)).len != wn.rows)
    throw DomainError("affine: bias length mismatch");
  const int rows = wn.rows, cols = wn.cols;

  Node n;
  n.op = Op::Affine;
  n.in = {w, x, b, -1, -1};
  n.n_in = 3;
  n.len = rows;
  n.requires_grad = wn.requires_grad || xn.requires_grad ||
                    (b >= 0 && nodes_[static_cast<std::size_t>(b)].requires_grad);
  const Var v = push(n);

  const Node& out = nodes_.back();
  const double* W = vptr(nodes_[static_cast<std::size_t>(w)]);
  const double* X = vptr(nodes_[static_cast<std::size_t>(x)]);
  double* Y = val_.data() + out.off;
  if (b >= 0) {
    const double* B = vptr(nodes_[static_cast<std::size_t>(b)]);
    for (int i = 0; i < rows; ++i) {
      double acc = B[i];
      const double* Wr = W + static_cast<std::size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) acc += Wr[j] * X[j];
      Y[i] = acc;
    }
  } else {
    for (int i = 0; i < rows; ++i) {
      double acc = 0.0;
      const double* Wr = W + static_cast<std::size_t>(i) * cols;
      for (int j = 0; j < cols; ++j) acc += Wr[j] * X[j];
      Y[i] = acc;
    }
  }
  check_finite_value(out);
  return v;
}

Var Graph::affine2(Var w, Var x, Var u, Var h, Var b) {
  const Node& wn = nodes_.at(static_cast<std::size_t>(w));
  const Node& un = nodes_.at(static_cast<std::size_t>(u));
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  const Node& hn = nodes_.at(static_cast<std::size_t>(h));
  const Node& bn = nodes_.at(static_cast<std::size_t>(b));
  if (wn.pt == nullptr || un.pt == nullptr) throw UsageError("affine2: W,U must be matrix leaves");
  if (wn.rows != un.rows || xn.len != wn.cols || hn.len != un.cols || bn.len != wn.rows)
    throw DomainError("affine2: shape mismatch");
  const int rows = wn.rows, xc = wn.cols, hc = un.cols;

  Node n;
  n.op = Op::Affine2;
  n.in = {w, x, u, h, b};
  n.n_in = 5;
  n.len = rows;
  n.requires_grad = wn.requires_grad || xn.requires_grad || un.requires_grad ||
                    hn.requires_grad || bn.requires_grad;
  const Var v = push(n);

  const Node& out = nodes_.back();
  const double* W = vptr(nodes_[static_cast<std::size_t>(w)]);
  const double* X = vptr(nodes_[static_cast<std::size_t>(x)]);
  const double* U = vptr(nodes_[static_cast<std::size_t>(u)]);
  const double* H = vptr(nodes_[static_cast<std::size_t>(h)]);
  const double* B = vptr(nodes_[static_cast<std::size_t>(b)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < rows; ++i) {
    double acc = B[i];
    const double* Wr = W + static_cast<std::size_t>(i) * xc;
    for (int j = 0; j < xc; ++j) acc += Wr[j] * X[j];
    const double* Ur = U + static_cast<std::size_t>(i) * hc;
    for (int j = 0; j < hc; ++j) acc += Ur[j] * H[j];
    Y[i] = acc;
  }
  check_finite_value(out);
  return v;
}

Var Graph::relu(Var x) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  Node n;
  n.op = Op::Relu;
  n.in[0] = x;
  n.n_in = 1;
  n.len = xn.len;
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(x)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) Y[i] = X[i] > 0.0 ? X[i] : 0.0;
  check_finite_value(out);
  return v;
}

Var Graph::sigmoid(Var x) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  Node n;
  n.op = Op::Sigmoid;
  n.in[0] = x;
  n.n_in = 1;
  n.len = xn.len;
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(x)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) {
    const double z = X[i];
    Y[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
  }
  check_finite_value(out);
  return v;
}

Var Graph::tanh_act(Var x) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  Node n;
  n.op = Op::Tanh;
  n.in[0] = x;
  n.n_in = 1;
  n.len = xn.len;
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(x)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) Y[i] = std::tanh(X[i]);
  check_finite_value(out);
  return v;
}

Var Graph::add(Var a, Var b) {
  const Node& an = nodes_.at(static_cast<std::size_t>(a));
  const Node& bn = nodes_.at(static_cast<std::size_t>(b));
  if (an.len != bn.len) throw DomainError("add: length mismatch");
  Node n;
  n.op = Op::Add;
  n.in = {a, b, -1, -1, -1};
  n.n_in = 2;
  n.len = an.len;
  n.requires_grad = an.requires_grad || bn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* A = vptr(nodes_[static_cast<std::size_t>(a)]);
  const double* B = vptr(nodes_[static_cast<std::size_t>(b)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) Y[i] = A[i] + B[i];
  check_finite_value(out);
  return v;
}

Var Graph::mul(Var a, Var b) {
  const Node& an = nodes_.at(static_cast<std::size_t>(a));
  const Node& bn = nodes_.at(static_cast<std::size_t>(b));
  if (an.len != bn.len) throw DomainError("mul: length mismatch");
  Node n;
  n.op = Op::Mul;
  n.in = {a, b, -1, -1, -1};
  n.n_in = 2;
  n.len = an.len;
  n.requires_grad = an.requires_grad || bn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* A = vptr(nodes_[static_cast<std::size_t>(a)]);
  const double* B = vptr(nodes_[static_cast<std::size_t>(b)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) Y[i] = A[i] * B[i];
  check_finite_value(out);
  return v;
}

Var Graph::scale(Var x, double s) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  Node n;
  n.op = Op::Scale;
  n.in[0] = x;
  n.n_in = 1;
  n.len = xn.len;
  n.scalar = s;
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(x)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) Y[i] = s * X[i];
  check_finite_value(out);
  return v;
}

Var Graph::gate_mix(Var z, Var h, Var hc) {
  const Node& zn = nodes_.at(static_cast<std::size_t>(z));
  const Node& hn = nodes_.at(static_cast<std::size_t>(h));
  const Node& cn = nodes_.at(static_cast<std::size_t>(hc));
  if (zn.len != hn.len || zn.len != cn.len) throw DomainError("gate_mix: length mismatch");
  Node n;
  n.op = Op::GateMix;
  n.in = {z, h, hc, -1, -1};
  n.n_in = 3;
  n.len = zn.len;
  n.requires_grad = zn.requires_grad || hn.requires_grad || cn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* Z = vptr(nodes_[static_cast<std::size_t>(z)]);
  const double* H = vptr(nodes_[static_cast<std::size_t>(h)]);
  const double* C = vptr(nodes_[static_cast<std::size_t>(hc)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) Y[i] = (1.0 - Z[i]) * H[i] + Z[i] * C[i];
  check_finite_value(out);
  return v;
}

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty() || parts.size() > 5) throw UsageError("concat: need 1..5 parts");
  Node n;
  n.op = Op::Concat;
  n.n_in = static_cast<int>(parts.size());
  int len = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Node& pn = nodes_.at(static_cast<std::size_t>(parts[i]));
    n.in[i] = parts[i];
    len += pn.len;
    n.requires_grad = n.requires_grad || pn.requires_grad;
  }
  n.len = len;
  const Var v = push(n);
  const Node& out = nodes_.back();
  double* Y = val_.data() + out.off;
  int pos = 0;
  for (int i = 0; i < out.n_in; ++i) {
    const Node& pn = nodes_[static_cast<std::size_t>(out.in[static_cast<std::size_t>(i)])];
    std::memcpy(Y + pos, vptr(pn), static_cast<std::size_t>(pn.len) * sizeof(double));
    pos += pn.len;
  }
  return v;
}

Var Graph::slice(Var x, int offset, int len) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  if (offset < 0 || len < 1 || offset + len > xn.len)
    throw DomainError("slice: range out of bounds");
  Node n;
  n.op = Op::Slice;
  n.in[0] = x;
  n.n_in = 1;
  n.len = len;
  n.target = offset;  // reuse the int payload for the slice origin
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  std::memcpy(val_.data() + out.off,
              vptr(nodes_[static_cast<std::size_t>(x)]) + offset,
              static_cast<std::size_t>(len) * sizeof(double));
  return v;
}

Var Graph::sum(Var x) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(x));
  Node n;
  n.op = Op::Sum;
  n.in[0] = x;
  n.n_in = 1;
  n.len = 1;
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(x)]);
  const int len = nodes_[static_cast<std::size_t>(x)].len;
  double acc = 0.0;
  for (int i = 0; i < len; ++i) acc += X[i];
  val_[static_cast<std::size_t>(out.off)] = acc;
  check_finite_value(out);
  return v;
}

Var Graph::softmax(Var logits) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(logits));
  Node n;
  n.op = Op::Softmax;
  n.in[0] = logits;
  n.n_in = 1;
  n.len = xn.len;
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(logits)]);
  double* Y = val_.data() + out.off;
  double mx = X[0];
  for (int i = 1; i < out.len; ++i) mx = std::max(mx, X[i]);
  double sum = 0.0;
  for (int i = 0; i < out.len; ++i) {
    Y[i] = std::exp(X[i] - mx);
    sum += Y[i];
  }
  for (int i = 0; i < out.len; ++i) Y[i] /= sum;
  check_finite_value(out);
  return v;
}

Var Graph::gumbel_softmax(Var logits, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw DomainError("gumbel_softmax: temperature must be positive");
  const Node& xn = nodes_.at(static_cast<std::size_t>(logits));
  Node n;
  n.op = Op::GumbelSoftmax;
  n.in[0] = logits;
  n.n_in = 1;
  n.len = xn.len;
  n.scalar = tau;
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(logits)]);
  double* Y = val_.data() + out.off;
  for (int i = 0; i < out.len; ++i) Y[i] = (X[i] + rng.gumbel()) / tau;
  double mx = Y[0];
  for (int i = 1; i < out.len; ++i) mx = std::max(mx, Y[i]);
  double sum = 0.0;
  for (int i = 0; i < out.len; ++i) {
    Y[i] = std::exp(Y[i] - mx);
    sum += Y[i];
  }
  for (int i = 0; i < out.len; ++i) Y[i] /= sum;
  check_finite_value(out);
  return v;
}

Var Graph::cross_entropy(Var logits, int target) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(logits));
  if (target < 0 || target >= xn.len) throw DomainError("cross_entropy: target out of range");
  Node n;
  n.op = Op::CrossEntropy;
  n.in[0] = logits;
  n.n_in = 1;
  n.len = 1;
  n.target = target;
  n.aux_len = xn.len;
  n.aux_off = alloc_aux(xn.len);
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(logits)]);
  double* probs = aux_.data() + out.aux_off;
  double mx = X[0];
  for (int i = 0; i < out.aux_len; ++i) mx = std::max(mx, X[i]);
  double sum = 0.0;
  for (int i = 0; i < out.aux_len; ++i) {
    probs[i] = std::exp(X[i] - mx);
    sum += probs[i];
  }
  for (int i = 0; i < out.aux_len; ++i) probs[i] /= sum;
  val_[static_cast<std::size_t>(out.off)] = std::log(sum) + mx - X[target];
  check_finite_value(out);
  return v;
}

Var Graph::cross_entropy_soft(Var logits, std::span<const double> target) {
  const Node& xn = nodes_.at(static_cast<std::size_t>(logits));
  if (static_cast<int>(target.size()) != xn.len)
    throw DomainError("cross_entropy_soft: target length mismatch");
  Node n;
  n.op = Op::CrossEntropySoft;
  n.in[0] = logits;
  n.n_in = 1;
  n.len = 1;
  n.aux_len = 2 * xn.len;  // [probs | target]
  n.aux_off = alloc_aux(2 * xn.len);
  n.requires_grad = xn.requires_grad;
  const Var v = push(n);
  const Node& out = nodes_.back();
  const double* X = vptr(nodes_[static_cast<std::size_t>(logits)]);
  const int k = xn.len;
  double* probs = aux_.data() + out.aux_off;
  double* tgt = probs + k;
  std::copy(target.begin(), target.end(), tgt);
  double mx = X[0];
  for (int i = 0; i < k; ++i) mx = std::max(mx, X[i]);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    probs[i] = std::exp(X[i] - mx);
    sum += probs[i];
  }
  double dot = 0.0;
  for (int i = 0; i < k; ++i) {
    probs[i] /= sum;
    dot += tgt[i] * X[i];
  }
  val_[static_cast<std::size_t>(out.off)] = std::log(sum) + mx - dot;
  check_finite_value(out);
  return v;
}

void Graph::backward(Var loss) {
  Node& ln = nodes_.at(static_cast<std::size_t>(loss));
  if (ln.len != 1) throw UsageError("backward: loss must be scalar");
  if (!ln.requires_grad)
    throw UsageError("backward: loss does not depend on any trainable leaf");
  grad_[static_cast<std::size_t>(ln.goff)] = 1.0;
  ln.touched = true;

  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.touched) continue;
    check_finite_grad(n);
    backward_node(n);
  }
}

void Graph::backward_node(Node& n) {
  const double* gy = grad_.data() + n.goff;
  auto in_node = [&](int k) -> Node& {
    return nodes_[static_cast<std::size_t>(n.in[static_cast<std::size_t>(k)])];
  };
  auto want = [&](int k) {
    return n.in[static_cast<std::size_t>(k)] >= 0 && in_node(k).requires_grad;
  };
  auto gin = [&](int k) -> double* {
    Node& m = in_node(k);
    m.touched = true;
    return grad_.data() + m.goff;
  };

  switch (n.op) {
    case Op::Input:
      return;
    case Op::Param:
      if (n.sink != nullptr) {
        double* dst = n.sink->data();
        for (int i = 0; i < n.len; ++i) dst[i] += gy[i];
      }
      return;
    case Op::Affine: {
      const Node& wn = in_node(0);
      const Node& xn = in_node(1);
      const double* W = vptr(wn);
      const double* X = vptr(xn);
      const int rows = wn.rows, cols = wn.cols;
      if (want(1)) {
        double* gx = gin(1);
        for (int i = 0; i < rows; ++i) {
          const double g = gy[i];
          if (g == 0.0) continue;
          const double* Wr = W + static_cast<std::size_t>(i) * cols;
          for (int j = 0; j < cols; ++j) gx[j] += Wr[j] * g;
        }
      }
      if (want(0)) {
        double* gw = gin(0);
        for (int i = 0; i < rows; ++i) {
          const double g = gy[i];
          if (g == 0.0) continue;
          double* Gr = gw + static_cast<std::size_t>(i) * cols;
          for (int j = 0; j < cols; ++j) Gr[j] += g * X[j];
        }
      }
      if (n.in[2] >= 0 && want(2)) {
        double* gb = gin(2);
        for (int i = 0; i < rows; ++i) gb[i] += gy[i];
      }
      return;
    }
    case Op::Affine2: {
      const Node& wn = in_node(0);
      const Node& xn = in_node(1);
      const Node& un = in_node(2);
      const Node& hn = in_node(3);
      const double* W = vptr(wn);
      const double* X = vptr(xn);
      const double* U = vptr(un);
      const double* H = vptr(hn);
      const int rows = wn.rows, xc = wn.cols, hc = un.cols;
      if (want(1)) {
        double* gx = gin(1);
        for (int i = 0; i < rows; ++i) {
          const double g = gy[i];
          if (g == 0.0) continue;
          const double* Wr = W + static_cast<std::size_t>(i) * xc;
          for (int j = 0; j < xc; ++j) gx[j] += Wr[j] * g;
        }
      }
      if (want(3)) {
        double* gh = gin(3);
        for (int i = 0; i < rows; ++i) {
          const double g = gy[i];
          if (g == 0.0) continue;
          const double* Ur = U + static_cast<std::size_t>(i) * hc;
          for (int j = 0; j < hc; ++j) gh[j] += Ur[j] * g;
        }
      }
      if (want(0)) {
        double* gw = gin(0);
        for (int i = 0; i < rows; ++i) {
          const double g = gy[i];
          if (g == 0.0) continue;
          double* Gr = gw + static_cast<std::size_t>(i) * xc;
          for (int j = 0; j < xc; ++j) Gr[j] += g * X[j];
        }
      }
      if (want(2)) {
        double* gu = gin(2);
        for (int i = 0; i < rows; ++i) {
          const double g = gy[i];
          if (g == 0.0) continue;
          double* Gr = gu + static_cast<std::size_t>(i) * hc;
          for (int j = 0; j < hc; ++j) Gr[j] += g * H[j];
        }
      }
      if (want(4)) {
        double* gb = gin(4);
        for (int i = 0; i < rows; ++i) gb[i] += gy[i];
      }
      return;
    }
    case Op::Relu: {
      if (!want(0)) return;
      const double* Y = vptr(n);
      double* gx = gin(0);
      for (int i = 0; i < n.len; ++i)
        if (Y[i] > 0.0) gx[i] += gy[i];
      return;
    }
    case Op::Sigmoid: {
      if (!want(0)) return;
      const double* Y = vptr(n);
      double* gx = gin(0);
      for (int i = 0; i < n.len; ++i) gx[i] += gy[i] * Y[i] * (1.0 - Y[i]);
      return;
    }
    case Op::Tanh: {
      if (!want(0)) return;
      const double* Y = vptr(n);
      double* gx = gin(0);
      for (int i = 0; i < n.len; ++i) gx[i] += gy[i] * (1.0 - Y[i] * Y[i]);
      return;
    }
    case Op::Add: {
      for (int k = 0; k < 2; ++k) {
        if (!want(k)) continue;
        double* g = gin(k);
        for (int i = 0; i < n.len; ++i) g[i] += gy[i];
      }
      return;
    }
    case Op::Mul: {
      const double* A = vptr(in_node(0));
      const double* B = vptr(in_node(1));
      if (want(0)) {
        double* ga = gin(0);
        for (int i = 0; i < n.len; ++i) ga[i] += gy[i] * B[i];
      }
      if (want(1)) {
        double* gb = gin(1);
        for (int i = 0; i < n.len; ++i) gb[i] += gy[i] * A[i];
      }
      return;
    }
    case Op::Scale: {
      if (!want(0)) return;
      double* gx = gin(0);
      for (int i = 0; i < n.len; ++i) gx[i] += n.scalar * gy[i];
      return;
    }
    case Op::GateMix: {
      const double* Z = vptr(in_node(0));
      const double* H = vptr(in_node(1));
      const double* C = vptr(in_node(2));
      if (want(0)) {
        double* gz = gin(0);
        for (int i = 0; i < n.len; ++i) gz[i] += gy[i] * (C[i] - H[i]);
      }
      if (want(1)) {
        double* gh = gin(1);
        for (int i = 0; i < n.len; ++i) gh[i] += gy[i] * (1.0 - Z[i]);
      }
      if (want(2)) {
        double* gc = gin(2);
        for (int i = 0; i < n.len; ++i) gc[i] += gy[i] * Z[i];
      }
      return;
    }
    case Op::Concat: {
      int pos = 0;
      for (int k = 0; k < n.n_in; ++k) {
        const Node& pn = in_node(k);
        if (want(k)) {
          double* g = gin(k);
          for (int i = 0; i < pn.len; ++i) g[i] += gy[pos + i];
        }
        pos += pn.len;
      }
      return;
    }
    case Op::Slice: {
      if (!want(0)) return;
      double* gx = gin(0);
      for (int i = 0; i < n.len; ++i) gx[n.target + i] += gy[i];
      return;
    }
    case Op::Sum: {
      if (!want(0)) return;
      const int len = in_node(0).len;
      double* gx = gin(0);
      for (int i = 0; i < len; ++i) gx[i] += gy[0];
      return;
    }
    case Op::Softmax: {
      if (!want(0)) return;
      const double* Y = vptr(n);
      double dot = 0.0;
      for (int i = 0; i < n.len; ++i) dot += gy[i] * Y[i];
      double* gx = gin(0);
      for (int i = 0; i < n.len; ++i) gx[i] += Y[i] * (gy[i] - dot);
      return;
    }
    case Op::GumbelSoftmax: {
      if (!want(0)) return;
      const double* Y = vptr(n);
      double dot = 0.0;
      for (int i = 0; i < n.len; ++i) dot += gy[i] * Y[i];
      double* gx = gin(0);
      const double inv_tau = 1.0 / n.scalar;
      for (int i = 0; i < n.len; ++i) gx[i] += inv_tau * Y[i] * (gy[i] - dot);
      return;
    }
    case Op::CrossEntropy: {
      if (!want(0)) return;
      const double* probs = aux_.data() + n.aux_off;
      const double g = gy[0];
      double* gx = gin(0);
      for (int i = 0; i < n.aux_len; ++i)
        gx[i] += g * (probs[i] - (i == n.target ? 1.0 : 0.0));
      return;
    }
    case Op::CrossEntropySoft: {
      if (!want(0)) return;
      const int k = n.aux_len / 2;
      const double* probs = aux_.data() + n.aux_off;
      const double* tgt = probs + k;
      const double g = gy[0];
      double* gx = gin(0);
      for (int i = 0; i < k; ++i) gx[i] += g * (probs[i] - tgt[i]);
      return;
    }
  }
}

}  // namespace commdecode::nn
