#pragma once

// Soft Actor-Critic with a tanh-squashed Gaussian actor, twin critics with
// Polyak-averaged targets and automatic entropy-coefficient tuning.

#include <cstdint>
#include <random>
#include <vector>

#include "aptc/neuro/adam.hpp"
#include "aptc/neuro/mlp.hpp"
#include "aptc/sac/replay_buffer.hpp"

namespace aptc::sac {

struct SacConfig {
  double gamma = 0.99;
  double tau = 0.005;
  std::size_t batch_size = 256;
  double lr = 3e-4;
  std::uint64_t learning_starts = 100;
  double entropy_target = -static_cast<double>(env::kActionDim);
  bool auto_entropy = true;
  double initial_alpha = 1.0;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  std::size_t buffer_capacity = 100000;
  std::vector<std::size_t> hidden{64, 64};
  std::uint64_t seed = 0;

  void validate() const;
};

struct AgentNetworks {
  neuro::Mlp actor;  // obs -> [means..., log_stds...]
  neuro::Mlp critic1;
  neuro::Mlp critic2;
  neuro::Mlp target1;
  neuro::Mlp target2;
  neuro::AdamState actor_opt;
  neuro::AdamState critic1_opt;
  neuro::AdamState critic2_opt;
  double log_alpha = 0.0;
  neuro::AdamState alpha_opt;

  static AgentNetworks create(const SacConfig& config);
  double alpha() const;
};

// Actor evaluation on a batch with externally supplied standard-normal noise,
// so the stochastic path is a deterministic function of (params, obs, noise).
struct PolicyBatch {
  neuro::Mlp::Cache cache;
  neuro::Matrix mean;     // [B x act]
  neuro::Matrix log_std;  // clamped
  neuro::Matrix noise;
  neuro::Matrix pre_tanh;  // u = mean + std * noise
  neuro::Matrix actions;   // tanh(u)
  std::vector<double> log_prob;
  std::vector<unsigned char> log_std_active;  // 1 where the clamp passes gradient
};

PolicyBatch evaluate_policy(const neuro::Mlp& actor, const neuro::Matrix& observations, const neuro::Matrix& noise,
                            const SacConfig& config);

neuro::Matrix draw_noise(std::mt19937_64& rng, std::size_t rows, std::size_t cols);

/// log N(u; mean, std) - sum 2 (ln 2 - u - softplus(-2u)) for one sample.
double squashed_log_prob(std::span<const double> mean, std::span<const double> log_std, std::span<const double> u);

struct ActionSample {
  env::RawAction action{};
  double log_prob = 0.0;
};

/// Stochastic draw from the policy, or tanh(mean) when `deterministic`.
ActionSample sample_action(const neuro::Mlp& actor, const ObservationVec& observation, std::mt19937_64& rng,
                           const SacConfig& config, bool deterministic = false);

neuro::Matrix critic_input(const neuro::Matrix& observations, const neuro::Matrix& actions);

struct LossAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Bellman targets r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a'|s')).
std::vector<double> critic_target(const Batch& batch, const AgentNetworks& nets, const neuro::Matrix& next_noise,
                                  double alpha, const SacConfig& config);

/// 0.5 * mean over the batch of (Q(s, a) - y)^2, with its parameter gradient.
LossAndGrad critic_loss(const neuro::Mlp& critic, const neuro::Matrix& inputs, std::span<const double> targets);

/// mean(alpha log pi(a|s) - min(Q1, Q2)(s, a)) with a = tanh(mean + std noise).
LossAndGrad actor_loss(const neuro::Mlp& actor, const neuro::Mlp& q1, const neuro::Mlp& q2,
                       const neuro::Matrix& observations, const neuro::Matrix& noise, double alpha,
                       const SacConfig& config);
LossAndGrad actor_loss(const PolicyBatch& policy, const neuro::Mlp& actor, const neuro::Mlp& q1, const neuro::Mlp& q2,
                       double alpha);

/// -mean(log_alpha * (log_prob + target)); the gradient has one entry.
LossAndGrad alpha_loss(double log_alpha, std::span<const double> log_prob, double entropy_target);

/// target = (1 - tau) target + tau online. Throws InputError on shape mismatch.
void soft_update(neuro::Mlp& target, const neuro::Mlp& online, double tau);

struct UpdateReport {
  bool skipped = true;
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
};

/// One gradient step on both critics, the actor and log_alpha, then the target
/// update. Skips (no parameter change) when the buffer holds fewer than
/// batch_size transitions or total_steps < learning_starts.
UpdateReport update(AgentNetworks& nets, const ReplayBuffer& buffer, const SacConfig& config, std::mt19937_64& rng,
                    std::uint64_t total_steps);

}  // namespace aptc::sac
