#include "qedgix/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace qedgix::nn {

Tensor numeric_gradient(const std::function<double()>& loss, Tensor& values, double step) {
  Tensor grad(values.shape());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss();
    values[i] = saved - step;
    const double down = loss();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(const Tensor& analytic, const Tensor& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-12);
}

GradCheckReport check_gradients(const std::function<Var(Tape&)>& build_loss, const ParameterList& params,
                                double step) {
  zero_grads(params);
  {
    Tape tape;
    tape.backward(build_loss(tape));
  }
  const auto evaluate = [&] {
    Tape tape(false);
    return build_loss(tape).value()[0];
  };
  GradCheckReport report;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    const Tensor numeric = numeric_gradient(evaluate, p->value, step);
    const double err = relative_error(analytic, numeric);
    if (err >= report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_parameter = p->id;
    }
  }
  zero_grads(params);
  return report;
}

}  // namespace qedgix::nn
