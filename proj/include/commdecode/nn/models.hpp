#pragma once

#include <span>
#include <string>
#include <vector>

#include "commdecode/nn/graph.hpp"
#include "commdecode/nn/params.hpp"

namespace commdecode::nn {

/// Dense feed-forward net: affine layers with rectified-linear activations
/// between them, final layer linear.
struct MlpParams {
  std::vector<int> widths;  // input, hidden..., output
  std::vector<int> w;       // per layer: weight tensor id
  std::vector<int> b;       // per layer: bias tensor id
};

/// hidden_gain scales the uniform fan-in bound of every non-final weight
/// matrix (sqrt(6) gives He-uniform init for rectifier layers).
MlpParams make_mlp(ParamStore& store, const std::string& prefix,
                   std::span<const int> widths, Rng& rng, double hidden_gain = 1.0);

/// Forward pass on a graph. grads == nullptr freezes the parameters.
Var mlp_forward(Graph& g, const ParamStore& store, const MlpParams& mlp, Var x,
                GradBuffers* grads);

/// Plain forward evaluation without a tape.
std::vector<double> mlp_eval(const ParamStore& store, const MlpParams& mlp,
                             std::span<const double> x);

/// Gated recurrent cell (update gate z, reset gate r):
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   c = tanh(Wc x + Uc (r*h) + bc)
///   h' = (1-z)*h + z*c
struct GruParams {
  int input = 0, hidden = 0;
  int wz, uz, bz;
  int wr, ur, br;
  int wc, uc, bc;
};

GruParams make_gru(ParamStore& store, const std::string& prefix, int input,
                   int hidden, Rng& rng);

/// One cell application.
Var gru_cell(Graph& g, const ParamStore& store, const GruParams& gru, Var x,
             Var h, GradBuffers* grads);

/// Runs the cell over a sequence from a zero initial hidden state and
/// returns the final hidden state. The sequence must be nonempty.
Var gru_forward(Graph& g, const ParamStore& store, const GruParams& gru,
                std::span<const std::vector<double>> sequence, GradBuffers* grads);

}  // namespace commdecode::nn
