#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "aptc/environment.hpp"
#include "aptc/neuro/matrix.hpp"

namespace aptc::sac {

using ObservationVec = std::array<double, env::kObservationDim>;

struct Transition {
  ObservationVec observation{};
  env::RawAction raw_action{};
  double reward = 0.0;
  ObservationVec next_observation{};
  bool terminal = false;  // limit reached; truncation is never terminal
};

struct Batch {
  neuro::Matrix observations;       // [B x obs]
  neuro::Matrix actions;            // [B x act]
  std::vector<double> rewards;      // [B]
  neuro::Matrix next_observations;  // [B x obs]
  std::vector<double> terminals;    // [B], 1.0 for terminal
  std::size_t size() const { return rewards.size(); }
};

// Fixed-capacity ring; the oldest transition is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  /// Throws InputError on non-finite values or an action outside [-1, 1].
  void push(const Transition& t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return storage_.size(); }
  /// Index 0 is the oldest stored transition.
  const Transition& at(std::size_t index) const;
  void clear();

  /// Uniform with replacement. Throws UsageError if size() < batch_size.
  std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t batch_size) const;
  Batch sample(std::mt19937_64& rng, std::size_t batch_size) const;
  Batch gather(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<Transition> storage_;
  std::size_t head_ = 0;  // next slot to write
  std::size_t size_ = 0;
};

}  // namespace aptc::sac
