#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "commdecode/nn/params.hpp"
#include "commdecode/rng.hpp"

namespace commdecode::nn {

/// Handle to a node in a Graph.
using Var = int;

/// Record of one forward pass over small dense vectors, replayable in
/// reverse for gradients. Values and gradients live in contiguous arenas;
/// reset() keeps the capacity so a graph can be reused across many passes.
///
/// Nodes are appended in evaluation order, which is already a topological
/// order, so backward() is a single reverse sweep. Gradients accumulate
/// additively across fan-out. Non-finite values or gradients raise
/// NumericError naming the op.
class Graph {
 public:
  /// Leaf holding a copy of external data. requires_grad makes its gradient
  /// readable after backward (used by tests probing input sensitivities).
  Var input(std::span<const double> data, bool requires_grad = false);

  /// Leaf bound to a parameter tensor. grad_sink, when non-null, receives
  /// the accumulated gradient at the end of backward(); a null sink marks
  /// the parameter as frozen and its gradient work is skipped.
  Var param(const ParamTensor& t, std::vector<double>* grad_sink);

  /// y = W x + b. W must be a matrix leaf; pass b = -1 for no bias.
  Var affine(Var w, Var x, Var b);
  /// y = W x + U h + b (fused for recurrent cells).
  Var affine2(Var w, Var x, Var u, Var h, Var b);

  Var relu(Var x);
  Var sigmoid(Var x);
  Var tanh_act(Var x);
  Var add(Var a, Var b);          // elementwise, equal lengths
  Var mul(Var a, Var b);          // elementwise, equal lengths
  Var scale(Var x, double s);
  /// y = (1 - z) * h + z * hc, elementwise.
  Var gate_mix(Var z, Var h, Var hc);
  Var concat(std::span<const Var> parts);
  Var slice(Var x, int offset, int len);

  /// Scalar sum of all entries.
  Var sum(Var x);

  Var softmax(Var logits);
  /// Soft relaxed categorical sample: softmax((logits + g) / tau) with
  /// g_i = -log(-log u_i). Gradient flows to logits through the softmax.
  Var gumbel_softmax(Var logits, double tau, Rng& rng);

  /// -log softmax(logits)[target], max-stabilised. Scalar output.
  Var cross_entropy(Var logits, int target);
  /// Cross-entropy against a full target distribution. Scalar output.
  Var cross_entropy_soft(Var logits, std::span<const double> target);

  void backward(Var loss);

  int size(Var v) const { return nodes_[static_cast<std::size_t>(v)].len; }
  std::span<const double> value(Var v) const;
  /// Gradient of the last backward()'s loss w.r.t. this node.
  std::span<const double> grad(Var v) const;

  double scalar_value(Var v) const { return value(v)[0]; }

  /// Drops all nodes, keeping arena capacity.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    Input, Param, Affine, Affine2, Relu, Sigmoid, Tanh, Add, Mul, Scale,
    GateMix, Concat, Slice, Sum, Softmax, GumbelSoftmax, CrossEntropy,
    CrossEntropySoft,
  };

  struct Node {
    Op op;
    bool requires_grad = false;
    bool touched = false;
    std::array<Var, 5> in{-1, -1, -1, -1, -1};
    int n_in = 0;
    int off = -1;      // value arena offset (-1 for param leaves: values live in the tensor)
    int goff = -1;     // grad arena offset (-1 when no gradient is kept)
    int len = 0;
    int aux_off = 0;   // op scratch recorded during forward (CE probs, soft targets)
    int aux_len = 0;
    int rows = 0, cols = 0;          // matrix leaf shape
    const ParamTensor* pt = nullptr; // param leaf binding
    std::vector<double>* sink = nullptr;
    int target = -1;                 // cross-entropy class
    double scalar = 0.0;             // tau / scale factor
  };

  Var push(Node n);
  const double* vptr(const Node& n) const {
    return n.pt != nullptr ? n.pt->v.data() : val_.data() + n.off;
  }
  double* gptr(const Node& n) { return grad_.data() + n.goff; }
  int alloc_aux(int len);
  void check_finite_value(const Node& n);
  void check_finite_grad(const Node& n);
  static const char* op_name(Op op);
  void backward_node(Node& n);

  std::vector<Node> nodes_;
  std::vector<double> val_;
  std::vector<double> grad_;
  std::vector<double> aux_;
  std::unordered_map<const ParamTensor*, Var> param_cache_;
};

}  // namespace commdecode::nn
