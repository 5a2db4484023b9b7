#pragma once

#include <functional>
#include <string>

#include "qedgix/nn/layers.hpp"

namespace qedgix::nn {

/// Central finite differences of `loss` with respect to every entry of
/// `values`, which is perturbed in place and restored.
Tensor numeric_gradient(const std::function<double()>& loss, Tensor& values, double step = 1e-5);

/// ||a - n||_2 / max(||a||_2 + ||n||_2, 1e-12).
double relative_error(const Tensor& analytic, const Tensor& numeric);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

/// Builds the scalar loss on a fresh tape, backpropagates, and compares each
/// parameter's gradient with central finite differences of the same loss.
GradCheckReport check_gradients(const std::function<Var(Tape&)>& build_loss, const ParameterList& params,
                                double step = 1e-5);

}  // namespace qedgix::nn
