#include "qedgix/trainer/replay.hpp"

#include <numeric>

#include "qedgix/error.hpp"

namespace qedgix::trainer {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "replay capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(Transition transition) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(transition));
    return;
  }
  items_[head_] = std::move(transition);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  require(i < items_.size(), "replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  require(count <= items_.size(), "cannot sample more transitions than stored");
  std::vector<std::size_t> index(items_.size());
  std::iota(index.begin(), index.end(), 0);
  std::vector<const Transition*> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, index.size() - 1);
    std::swap(index[k], index[pick(rng)]);
    out.push_back(&items_[index[k]]);
  }
  return out;
}

}  // namespace qedgix::trainer
