#include "qedgix/nn/adam.hpp"

#include <cmath>

#include "qedgix/error.hpp"

namespace qedgix::nn {

AdamState::AdamState(const ParameterList& params, AdamConfig config_) : config(config_) {
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Parameter* p : params) {
    first_moment.emplace_back(p->value.shape());
    second_moment.emplace_back(p->value.shape());
  }
}

void adam_step(const ParameterList& params, AdamState& state) {
  require(params.size() == state.first_moment.size(), "adam_step: parameter list does not match optimizer state");
  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    require(m.size() == p.value.size(), [&] { return "adam_step: moment shape mismatch for '" + p.id + "'"; });
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    p.zero_grad();
  }
}

double clip_grad_norm(const ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.values()) g *= factor;
  }
  return norm;
}

}  // namespace qedgix::nn
