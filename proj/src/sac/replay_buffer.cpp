#include "aptc/sac/replay_buffer.hpp"

#include <cmath>

#include "aptc/errors.hpp"

namespace aptc::sac {

namespace {

template <std::size_t N>
bool all_finite(const std::array<double, N>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity) {
  if (capacity == 0) throw InputError("ReplayBuffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (!all_finite(t.observation) || !all_finite(t.next_observation) || !all_finite(t.raw_action) ||
      !std::isfinite(t.reward)) {
    throw InputError("ReplayBuffer::push: non-finite transition");
  }
  for (double a : t.raw_action) {
    if (a < -1.0 || a > 1.0) throw InputError("ReplayBuffer::push: action outside [-1, 1]");
  }
  storage_[head_] = t;
  head_ = (head_ + 1) % storage_.size();
  if (size_ < storage_.size()) ++size_;
}

const Transition& ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw InputError("ReplayBuffer::at: index out of range");
  const std::size_t oldest = (head_ + storage_.size() - size_) % storage_.size();
  return storage_[(oldest + index) % storage_.size()];
}

void ReplayBuffer::clear() {
  head_ = 0;
  size_ = 0;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::mt19937_64& rng, std::size_t batch_size) const {
  if (size_ < batch_size || batch_size == 0) {
    throw UsageError("ReplayBuffer::sample: " + std::to_string(size_) + " stored, " + std::to_string(batch_size) +
                     " requested");
  }
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> indices(batch_size);
  for (std::size_t& i : indices) i = pick(rng);
  return indices;
}

Batch ReplayBuffer::sample(std::mt19937_64& rng, std::size_t batch_size) const {
  return gather(sample_indices(rng, batch_size));
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& indices) const {
  const std::size_t n = indices.size();
  Batch batch{neuro::Matrix(n, env::kObservationDim), neuro::Matrix(n, env::kActionDim), std::vector<double>(n),
              neuro::Matrix(n, env::kObservationDim), std::vector<double>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    const Transition& t = at(indices[r]);
    for (std::size_t c = 0; c < env::kObservationDim; ++c) {
      batch.observations(r, c) = t.observation[c];
      batch.next_observations(r, c) = t.next_observation[c];
    }
    for (std::size_t c = 0; c < env::kActionDim; ++c) batch.actions(r, c) = t.raw_action[c];
    batch.rewards[r] = t.reward;
    batch.terminals[r] = t.terminal ? 1.0 : 0.0;
  }
  return batch;
}

}  // namespace aptc::sac
