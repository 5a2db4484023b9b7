#include "qedgix/nn/layers.hpp"

#include <cmath>

#include "qedgix/error.hpp"

namespace qedgix::nn {

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + "/weight", fan_in_uniform({in, out}, in, rng)),
      bias(name + "/bias", fan_in_uniform({1, out}, in, rng)) {}

Var Linear::forward(Tape& tape, Var x) {
  return linear(x, tape.parameter(weight), tape.parameter(bias));
}

void Linear::collect(ParameterList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Mlp2::Mlp2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
    : first(name + "/fc1", in, hidden, rng), second(name + "/fc2", hidden, out, rng) {}

Var Mlp2::forward(Tape& tape, Var x) { return second.forward(tape, relu(first.forward(tape, x))); }

void Mlp2::collect(ParameterList& out) {
  first.collect(out);
  second.collect(out);
}

GruCell::GruCell(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : w_z(name + "/w_z", fan_in_uniform({in + hidden, hidden}, in + hidden, rng)),
      w_r(name + "/w_r", fan_in_uniform({in + hidden, hidden}, in + hidden, rng)),
      w_n(name + "/w_n", fan_in_uniform({in + hidden, hidden}, in + hidden, rng)),
      b_z(name + "/b_z", fan_in_uniform({1, hidden}, in + hidden, rng)),
      b_r(name + "/b_r", fan_in_uniform({1, hidden}, in + hidden, rng)),
      b_n(name + "/b_n", fan_in_uniform({1, hidden}, in + hidden, rng)) {}

Var GruCell::forward(Tape& tape, Var x, Var h) {
  require(x.cols() == input_width(), [&] { return "gru: input width " + std::to_string(x.cols()) + ", expected " +
                                         std::to_string(input_width()); });
  require(h.cols() == hidden_width() && h.rows() == x.rows(), "gru: hidden state shape mismatch");
  const Var xh = concat_cols({x, h});
  const Var z = sigmoid(linear(xh, tape.parameter(w_z), tape.parameter(b_z)));
  const Var r = sigmoid(linear(xh, tape.parameter(w_r), tape.parameter(b_r)));
  const Var n = tanh(linear(concat_cols({x, mul(r, h)}), tape.parameter(w_n), tape.parameter(b_n)));
  return add(n, mul(z, sub(h, n)));
}

void GruCell::collect(ParameterList& out) {
  for (Parameter* p : {&w_z, &w_r, &w_n, &b_z, &b_r, &b_n}) out.push_back(p);
}

void zero_grads(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

void copy_values(const ParameterList& from, const ParameterList& to) {
  require(from.size() == to.size(), "copy_values: parameter lists differ in length");
  for (std::size_t i = 0; i < from.size(); ++i) {
    require(from[i]->id == to[i]->id && from[i]->value.shape() == to[i]->value.shape(), [&] { return
            "copy_values: parameter '" + from[i]->id + "' does not match '" + to[i]->id + "'"; });
    to[i]->value = from[i]->value;
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

}  // namespace qedgix::nn
