#pragma once

#include <random>
#include <string>
#include <vector>

#include "qedgix/nn/ops.hpp"

namespace qedgix::nn {

using Rng = std::mt19937_64;
using ParameterList = std::vector<Parameter*>;

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

/// y = x W + b with W stored as in x out.
struct Linear {
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var forward(Tape& tape, Var x);
  void collect(ParameterList& out);
  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }

  Parameter weight;
  Parameter bias;
};

/// Linear -> ReLU -> Linear.
struct Mlp2 {
  Mlp2() = default;
  Mlp2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

  Var forward(Tape& tape, Var x);
  void collect(ParameterList& out);

  Linear first;
  Linear second;
};

/// Gated recurrent unit:
///   z  = sigmoid([x,h] Wz + bz)
///   r  = sigmoid([x,h] Wr + br)
///   n  = tanh([x, r*h] Wn + bn)
///   h' = (1 - z) * n + z * h
struct GruCell {
  GruCell() = default;
  GruCell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  Var forward(Tape& tape, Var x, Var h);
  void collect(ParameterList& out);
  std::size_t input_width() const { return w_z.value.rows() - hidden_width(); }
  std::size_t hidden_width() const { return w_z.value.cols(); }

  Parameter w_z, w_r, w_n;
  Parameter b_z, b_r, b_n;
};

void zero_grads(const ParameterList& params);
/// Copies values (not gradients) parameter by parameter; ids and shapes must match.
void copy_values(const ParameterList& from, const ParameterList& to);
std::size_t parameter_count(const ParameterList& params);

}  // namespace qedgix::nn
