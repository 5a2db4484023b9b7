#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qedgix/nn/tensor.hpp"

namespace qedgix::nn {

/// Trainable tensor plus its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string id, Tensor value);

  std::string id;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Per-forward-pass operation record for reverse-mode differentiation.
/// A tape built with gradients disabled only evaluates values; it is used for
/// action selection and for target networks.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Tensor value);
  Var parameter(Parameter& param);

  /// Records an operation result. `inputs` decide whether the node needs a
  /// gradient; `backward` receives d(loss)/d(output) and pushes into inputs.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Adds `delta` into the gradient slot of `v`; no-op for constants.
  void accumulate(Var v, const Tensor& delta);
  /// Mutable gradient slot (allocated on demand); only valid if requires_grad.
  Tensor& grad_slot(Var v);

  /// Seeds d(loss)/d(loss) = 1 and runs the recorded backward closures in
  /// reverse order. Parameter leaves add their gradient into Parameter::grad.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    Backward backward;
    bool requires_grad = false;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

}  // namespace qedgix::nn
