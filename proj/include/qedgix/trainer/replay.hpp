#pragma once

#include <memory>
#include <random>
#include <vector>

#include "qedgix/env/world.hpp"

namespace qedgix::trainer {

/// One slot of experience, with the recurrent hidden states the policy held
/// before (hidden) and after (next_hidden) its forward pass at that slot.
struct Transition {
  std::shared_ptr<const env::ObservationSet> observation;
  std::shared_ptr<const env::ObservationSet> next_observation;
  nn::Tensor hidden;       // M x h
  nn::Tensor next_hidden;  // M x h
  std::vector<std::uint8_t> actions;
  double reward = 0.0;     // raw environment reward
  nn::Tensor state;        // 1 x S
  nn::Tensor next_state;   // 1 x S
  bool terminal = false;
};

/// Fixed-capacity ring buffer; the oldest transition is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000);

  void push(Transition transition);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Index 0 is the oldest stored transition.
  const Transition& operator[](std::size_t i) const;

  /// Uniform sample of `count` distinct transitions.
  std::vector<const Transition*> sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
};

}  // namespace qedgix::trainer
