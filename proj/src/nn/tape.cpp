#include "qedgix/nn/tape.hpp"

#include <algorithm>

#include "qedgix/error.hpp"

namespace qedgix::nn {

Parameter::Parameter(std::string id_, Tensor value_)
    : id(std::move(id_)), value(std::move(value_)), grad(value.shape()) {}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, {}, false});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter& param) {
  nodes_.push_back(Node{param.value, {}, grad_enabled_ ? &param : nullptr, {}, grad_enabled_});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      require(in.tape == this, "operation mixes values from different tapes");
      needs = needs || nodes_[in.id].requires_grad;
    }
  }
  Node node{std::move(value), {}, nullptr, {}, needs};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_slot(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::accumulate(Var v, const Tensor& delta) {
  if (!nodes_[v.id].requires_grad) return;
  Tensor& g = grad_slot(v);
  require(g.size() == delta.size(), "gradient shape mismatch during backward");
  double* out = g.data();
  const double* in = delta.data();
  for (std::size_t i = 0; i < g.size(); ++i) out[i] += in[i];
}

void Tape::backward(Var loss) {
  require(loss.tape == this, "loss belongs to a different tape");
  require(grad_enabled_, "backward on a tape recorded without gradients");
  const Tensor& lv = nodes_[loss.id].value;
  require(lv.size() == 1, [&] { return "backward requires a scalar loss, got shape " + shape_string(lv.shape()); });
  if (!nodes_[loss.id].requires_grad) return;
  grad_slot(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.param != nullptr) {
      Tensor& pg = node.param->grad;
      if (pg.shape() != node.value.shape()) pg = Tensor(node.value.shape());
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += node.grad[k];
    } else if (node.backward) {
      // The closure may append gradients to earlier nodes only.
      Tensor g = std::move(node.grad);
      node.backward(*this, g);
    }
  }
}

}  // namespace qedgix::nn
