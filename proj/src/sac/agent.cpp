#include "aptc/sac/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aptc/errors.hpp"

namespace aptc::sac {

using neuro::Matrix;
using neuro::Mlp;

namespace {

constexpr std::size_t kObs = env::kObservationDim;
constexpr std::size_t kAct = env::kActionDim;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// ln(1 - tanh(u)^2) written without cancellation.
double log_tanh_jacobian(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

std::vector<std::size_t> with_hidden(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

// Row-wise min of two critics evaluated on the same inputs; `pick_first` marks
// rows where Q1 was used (ties go to Q1).
std::vector<double> min_q(const Matrix& q1, const Matrix& q2, std::vector<unsigned char>* pick_first = nullptr) {
  std::vector<double> out(q1.rows());
  if (pick_first) pick_first->resize(q1.rows());
  for (std::size_t r = 0; r < q1.rows(); ++r) {
    const bool first = q1(r, 0) <= q2(r, 0);
    out[r] = first ? q1(r, 0) : q2(r, 0);
    if (pick_first) (*pick_first)[r] = first ? 1 : 0;
  }
  return out;
}

}  // namespace

void SacConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("sac.gamma must be in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("sac.tau must be in (0, 1]");
  if (batch_size < 1) throw ConfigError("sac.batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("sac.lr must be > 0");
  if (!(log_std_min < log_std_max)) throw ConfigError("sac.log_std_min must be < sac.log_std_max");
  if (!(initial_alpha > 0.0)) throw ConfigError("sac.initial_alpha must be > 0");
  if (buffer_capacity < 1) throw ConfigError("sac.buffer_capacity must be >= 1");
  if (!std::isfinite(entropy_target)) throw ConfigError("sac.entropy_target must be finite");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("sac.hidden widths must be positive");
  }
}

AgentNetworks AgentNetworks::create(const SacConfig& config) {
  config.validate();
  // Distinct deterministic streams per network.
  const std::uint64_t s = config.seed * 0x9E3779B97F4A7C15ull;
  AgentNetworks nets;
  nets.actor = Mlp(with_hidden(kObs, config.hidden, 2 * kAct), s + 1);
  nets.critic1 = Mlp(with_hidden(kObs + kAct, config.hidden, 1), s + 2);
  nets.critic2 = Mlp(with_hidden(kObs + kAct, config.hidden, 1), s + 3);
  nets.target1 = nets.critic1;
  nets.target2 = nets.critic2;
  const neuro::AdamConfig adam{config.lr};
  nets.actor_opt = neuro::AdamState(nets.actor.parameter_count(), adam);
  nets.critic1_opt = neuro::AdamState(nets.critic1.parameter_count(), adam);
  nets.critic2_opt = neuro::AdamState(nets.critic2.parameter_count(), adam);
  nets.log_alpha = std::log(config.initial_alpha);
  nets.alpha_opt = neuro::AdamState(1, adam);
  return nets;
}

double AgentNetworks::alpha() const { return std::exp(log_alpha); }

double squashed_log_prob(std::span<const double> mean, std::span<const double> log_std, std::span<const double> u) {
  double lp = 0.0;
  for (std::size_t d = 0; d < u.size(); ++d) {
    const double z = (u[d] - mean[d]) / std::exp(log_std[d]);
    lp += -0.5 * z * z - log_std[d] - kHalfLog2Pi - log_tanh_jacobian(u[d]);
  }
  return lp;
}

PolicyBatch evaluate_policy(const Mlp& actor, const Matrix& observations, const Matrix& noise,
                            const SacConfig& config) {
  const std::size_t n = observations.rows();
  if (noise.rows() != n || noise.cols() != kAct) throw InputError("evaluate_policy: noise shape mismatch");
  PolicyBatch p;
  const Matrix out = actor.forward(observations, p.cache);
  p.mean = Matrix(n, kAct);
  p.log_std = Matrix(n, kAct);
  p.noise = noise;
  p.pre_tanh = Matrix(n, kAct);
  p.actions = Matrix(n, kAct);
  p.log_prob.assign(n, 0.0);
  p.log_std_active.assign(n * kAct, 1);
  for (std::size_t r = 0; r < n; ++r) {
    double lp = 0.0;
    for (std::size_t d = 0; d < kAct; ++d) {
      const double raw_ls = out(r, kAct + d);
      const double ls = std::clamp(raw_ls, config.log_std_min, config.log_std_max);
      p.log_std_active[r * kAct + d] = (raw_ls >= config.log_std_min && raw_ls <= config.log_std_max) ? 1 : 0;
      const double mu = out(r, d);
      const double eps = noise(r, d);
      const double u = mu + std::exp(ls) * eps;
      p.mean(r, d) = mu;
      p.log_std(r, d) = ls;
      p.pre_tanh(r, d) = u;
      p.actions(r, d) = std::tanh(u);
      // (u - mean) / std == eps exactly under the reparameterization.
      lp += -0.5 * eps * eps - ls - kHalfLog2Pi - log_tanh_jacobian(u);
    }
    p.log_prob[r] = lp;
  }
  return p;
}

Matrix draw_noise(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = normal(rng);
  return m;
}

ActionSample sample_action(const Mlp& actor, const ObservationVec& observation, std::mt19937_64& rng,
                           const SacConfig& config, bool deterministic) {
  for (double v : observation) {
    if (!std::isfinite(v)) throw InputError("sample_action: non-finite observation");
  }
  Matrix obs(1, kObs);
  std::copy(observation.begin(), observation.end(), obs.row(0).begin());
  const Matrix noise = deterministic ? Matrix(1, kAct, 0.0) : draw_noise(rng, 1, kAct);
  const PolicyBatch p = evaluate_policy(actor, obs, noise, config);
  ActionSample s;
  for (std::size_t d = 0; d < kAct; ++d) s.action[d] = std::clamp(p.actions(0, d), -1.0, 1.0);
  s.log_prob = p.log_prob[0];
  return s;
}

Matrix critic_input(const Matrix& observations, const Matrix& actions) {
  if (observations.rows() != actions.rows()) throw InputError("critic_input: row mismatch");
  const std::size_t n = observations.rows();
  const std::size_t no = observations.cols();
  const std::size_t na = actions.cols();
  Matrix in(n, no + na);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(observations.row(r).begin(), no, in.row(r).begin());
    std::copy_n(actions.row(r).begin(), na, in.row(r).begin() + static_cast<std::ptrdiff_t>(no));
  }
  return in;
}

std::vector<double> critic_target(const Batch& batch, const AgentNetworks& nets, const Matrix& next_noise,
                                  double alpha, const SacConfig& config) {
  const PolicyBatch next = evaluate_policy(nets.actor, batch.next_observations, next_noise, config);
  const Matrix in = critic_input(batch.next_observations, next.actions);
  const std::vector<double> q = min_q(nets.target1.forward(in), nets.target2.forward(in));
  std::vector<double> y(batch.size());
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double bootstrap = q[r] - alpha * next.log_prob[r];
    y[r] = batch.rewards[r] + config.gamma * (1.0 - batch.terminals[r]) * bootstrap;
  }
  return y;
}

LossAndGrad critic_loss(const Mlp& critic, const Matrix& inputs, std::span<const double> targets) {
  const std::size_t n = inputs.rows();
  if (targets.size() != n) throw InputError("critic_loss: target count mismatch");
  Mlp::Cache cache;
  const Matrix q = critic.forward(inputs, cache);
  Matrix dq(n, 1);
  LossAndGrad out;
  for (std::size_t r = 0; r < n; ++r) {
    const double diff = q(r, 0) - targets[r];
    out.value += diff * diff;
    dq(r, 0) = diff / static_cast<double>(n);
  }
  out.value *= 0.5 / static_cast<double>(n);
  out.grad = critic.backward(cache, dq, true, false).params;
  return out;
}

LossAndGrad actor_loss(const PolicyBatch& policy, const Mlp& actor, const Mlp& q1, const Mlp& q2, double alpha) {
  const std::size_t n = policy.actions.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix obs = policy.cache.inputs.at(0);
  const Matrix in = critic_input(obs, policy.actions);

  Mlp::Cache c1, c2;
  const Matrix v1 = q1.forward(in, c1);
  const Matrix v2 = q2.forward(in, c2);
  std::vector<unsigned char> pick_first;
  const std::vector<double> q = min_q(v1, v2, &pick_first);

  LossAndGrad out;
  Matrix g1(n, 1), g2(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    out.value += (alpha * policy.log_prob[r] - q[r]) * inv_n;
    (pick_first[r] ? g1 : g2)(r, 0) = 1.0;
  }
  // dQ/da through whichever critic supplied the minimum.
  const Matrix dq1 = q1.backward(c1, g1, false, true).input;
  const Matrix dq2 = q2.backward(c2, g2, false, true).input;

  Matrix d_out(n, 2 * kAct);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t d = 0; d < kAct; ++d) {
      const double a = policy.actions(r, d);
      const double dq_da = dq1(r, kObs + d) + dq2(r, kObs + d);
      const double dl_du = inv_n * (alpha * 2.0 * a - dq_da * (1.0 - a * a));
      d_out(r, d) = dl_du;
      const double sigma = std::exp(policy.log_std(r, d));
      const double dl_dls = dl_du * sigma * policy.noise(r, d) - inv_n * alpha;
      d_out(r, kAct + d) = policy.log_std_active[r * kAct + d] ? dl_dls : 0.0;
    }
  }
  out.grad = actor.backward(policy.cache, d_out, true, false).params;
  return out;
}

LossAndGrad actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2, const Matrix& observations,
                       const Matrix& noise, double alpha, const SacConfig& config) {
  return actor_loss(evaluate_policy(actor, observations, noise, config), actor, q1, q2, alpha);
}

LossAndGrad alpha_loss(double log_alpha, std::span<const double> log_prob, double entropy_target) {
  double mean_term = 0.0;
  for (double lp : log_prob) mean_term += lp + entropy_target;
  mean_term /= static_cast<double>(log_prob.size());
  return LossAndGrad{-log_alpha * mean_term, {-mean_term}};
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layer_sizes() != online.layer_sizes()) throw InputError("soft_update: shape mismatch");
  neuro::kernels::parallel::polyak_mix(target.mutable_parameters(), online.parameters(), tau);
}

UpdateReport update(AgentNetworks& nets, const ReplayBuffer& buffer, const SacConfig& config, std::mt19937_64& rng,
                    std::uint64_t total_steps) {
  UpdateReport report;
  report.alpha = nets.alpha();
  if (buffer.size() < config.batch_size || total_steps < config.learning_starts) return report;
  report.skipped = false;

  const Batch batch = buffer.sample(rng, config.batch_size);
  const std::size_t n = batch.size();

  // Entropy coefficient: the value before this step weights every loss below.
  const PolicyBatch policy = evaluate_policy(nets.actor, batch.observations, draw_noise(rng, n, kAct), config);
  const double alpha = nets.alpha();
  if (config.auto_entropy) {
    const LossAndGrad la = alpha_loss(nets.log_alpha, policy.log_prob, config.entropy_target);
    report.alpha_loss = la.value;
    std::span<double> p(&nets.log_alpha, 1);
    neuro::adam_step(p, la.grad, nets.alpha_opt);
  }

  const std::vector<double> y = critic_target(batch, nets, draw_noise(rng, n, kAct), alpha, config);
  const Matrix in = critic_input(batch.observations, batch.actions);
  const LossAndGrad l1 = critic_loss(nets.critic1, in, y);
  const LossAndGrad l2 = critic_loss(nets.critic2, in, y);
  neuro::adam_step(nets.critic1.mutable_parameters(), l1.grad, nets.critic1_opt);
  neuro::adam_step(nets.critic2.mutable_parameters(), l2.grad, nets.critic2_opt);
  report.critic1_loss = l1.value;
  report.critic2_loss = l2.value;

  // Actor against the freshly updated critics, reusing the sampled actions.
  const LossAndGrad la = actor_loss(policy, nets.actor, nets.critic1, nets.critic2, alpha);
  neuro::adam_step(nets.actor.mutable_parameters(), la.grad, nets.actor_opt);
  report.actor_loss = la.value;

  soft_update(nets.target1, nets.critic1, config.tau);
  soft_update(nets.target2, nets.critic2, config.tau);
  report.alpha = nets.alpha();
  return report;
}

}  // namespace aptc::sac
