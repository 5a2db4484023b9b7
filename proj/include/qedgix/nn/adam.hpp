#pragma once

#include <cstdint>
#include <vector>

#include "qedgix/nn/layers.hpp"

namespace qedgix::nn {

struct AdamConfig {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  explicit AdamState(const ParameterList& params, AdamConfig config = {});

  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over `params` (same order as at state
/// construction). Gradients are cleared afterwards.
void adam_step(const ParameterList& params, AdamState& state);

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(const ParameterList& params, double max_norm);

}  // namespace qedgix::nn
