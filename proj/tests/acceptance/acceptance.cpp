// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   acceptance --work-dir DIR [--only 1,2,5] [--known-red 6] [-v]
//
// Criteria listed in --known-red still print FAIL when they fail, but do not
// change the exit status.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "../support/mock_sysfs.hpp"
#include "aptc/environment.hpp"
#include "aptc/errors.hpp"
#include "aptc/harness/checkpoint.hpp"
#include "aptc/harness/config.hpp"
#include "aptc/harness/metrics.hpp"
#include "aptc/harness/runner.hpp"
#include "aptc/neuro/gradient_check.hpp"
#include "aptc/plant.hpp"
#include "aptc/sac/agent.hpp"
#include "aptc/sysboard/safety_guard.hpp"

using namespace aptc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_err(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::int64_t median_length(std::vector<harness::EpisodeSummary>::const_iterator first,
                           std::vector<harness::EpisodeSummary>::const_iterator last) {
  std::vector<double> v;
  for (auto it = first; it != last; ++it) v.push_back(static_cast<double>(it->length));
  return static_cast<std::int64_t>(harness::median(v));
}

// ---------------------------------------------------------------- 1, 2

Outcome equations() {
  const env::EnvConfig cfg;
  const int n = cfg.n_cpus;
  double worst = 0.0;
  int partitions = 0;
  for (int high = 0; high <= n; ++high) {
    for (int low = 0; high + low <= n; ++low) {
      const int off = n - high - low;
      const env::BoardState b{n, high, low, off};
      ++partitions;
      const env::CpuState s = env::compute_cpu_state(b);
      const int raw = high * 2 + low * 1 + off * 0;
      if (s.raw_power != raw) return {false, fmt::format("S mismatch at ({}, {}, {})", high, low, off)};
      worst = std::max(worst, rel_err(s.p_norm, static_cast<double>(raw) / (2.0 * n)));
      const double reward =
          env::compute_reward(b, env::ActionCommand{high + low, high}, cfg, false);
      const double want = (high * cfg.c_high + low * cfg.c_low + off * cfg.c_off) / n;
      worst = std::max(worst, want == 0.0 ? std::abs(reward) : rel_err(reward, want));
      if (env::compute_reward(b, {}, cfg, true) != cfg.terminal_penalty) return {false, "terminal penalty"};
    }
  }
  // 33 power sums x ~30 virtual times spanning one to several thousand steps.
  int points = 0;
  for (int k = 0; k < 1000; ++k) {
    const int raw = k % 33;
    const double x = 0.5 + 0.01 * std::pow(1.03, k / 33) * (1 + k / 33);
    const long double want = 46.0L + (2.0L + raw / 8.0L) * std::log(2.0L * static_cast<long double>(x));
    const double got = plant::log_temperature(46.0, raw, x);
    worst = std::max(worst, want == 46.0L ? std::abs(got - 46.0) : rel_err(got, static_cast<double>(want)));
    ++points;
  }
  return {partitions == 153 && points == 1000 && worst <= 1e-12,
          fmt::format("{} partitions, {} grid points, worst relative error {:.2e} (tol 1e-12)", partitions, points,
                      worst)};
}

Outcome figure_tick() {
  const double t = plant::log_temperature(46.0, 16, 1.0);
  return {std::abs(t - 48.772588722) <= 1e-6, fmt::format("T(46, S=16, x=1) = {:.9f} (want 48.772588722 +- 1e-6)", t)};
}

// ---------------------------------------------------------------- 3

neuro::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  neuro::Matrix m(rows, cols);
  for (double& v : m.flat()) v = d(rng);
  return m;
}

Outcome gradients() {
  double worst_mlp = 0.0, worst_critic = 0.0, worst_actor = 0.0, worst_alpha = 0.0;
  bool ok = true;
  const neuro::GradientCheckOptions opt{1e-4, 1e-5};
  constexpr int kSeeds = 10;
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    for (const std::vector<std::size_t>& shape : {std::vector<std::size_t>{3, 16, 16, 4}, {5, 16, 16, 1}}) {
      neuro::Mlp net(shape, seed);
      const neuro::Matrix x = random_matrix(rng, 6, shape.front());
      const neuro::Matrix t = random_matrix(rng, 6, shape.back());
      const auto r = neuro::gradient_check(
          net,
          [&](const neuro::Mlp& m) {
            neuro::Mlp::Cache cache;
            const neuro::Matrix y = m.forward(x, cache);
            neuro::Matrix dy(y.rows(), y.cols());
            double loss = 0.0;
            for (std::size_t k = 0; k < y.size(); ++k) {
              const double d = y.flat()[k] - t.flat()[k];
              loss += 0.5 * d * d;
              dy.flat()[k] = d;
            }
            return std::make_pair(loss, m.backward(cache, dy).params);
          },
          opt);
      ok &= r.passed;
      worst_mlp = std::max(worst_mlp, r.max_relative_error);
    }

    sac::SacConfig c;
    c.hidden = {16, 16};
    c.batch_size = 8;
    c.seed = static_cast<std::uint64_t>(seed);
    sac::AgentNetworks nets = sac::AgentNetworks::create(c);
    const neuro::Matrix obs = random_matrix(rng, 8, 3);
    const neuro::Matrix in = random_matrix(rng, 8, 5);
    const neuro::Matrix noise = sac::draw_noise(rng, 8, 2);
    std::vector<double> targets(8);
    for (double& v : targets) v = std::normal_distribution<double>(0.0, 2.0)(rng);
    const auto critic = neuro::gradient_check(
        nets.critic1,
        [&](const neuro::Mlp& q) {
          const auto l = sac::critic_loss(q, in, targets);
          return std::make_pair(l.value, l.grad);
        },
        opt);
    const double alpha = 0.05 + 0.1 * seed;
    const auto actor = neuro::gradient_check(
        nets.actor,
        [&](const neuro::Mlp& a) {
          const auto l = sac::actor_loss(a, nets.critic1, nets.critic2, obs, noise, alpha, c);
          return std::make_pair(l.value, l.grad);
        },
        opt);
    const std::vector<double> logp = sac::evaluate_policy(nets.actor, obs, noise, c).log_prob;
    double log_alpha = 0.2 * seed - 1.0;
    const auto la = sac::alpha_loss(log_alpha, logp, c.entropy_target);
    const auto alpha_r = neuro::gradient_check(
        std::span<double>(&log_alpha, 1), [&] { return sac::alpha_loss(log_alpha, logp, c.entropy_target).value; },
        la.grad, opt);
    ok &= critic.passed && actor.passed && alpha_r.passed;
    worst_critic = std::max(worst_critic, critic.max_relative_error);
    worst_actor = std::max(worst_actor, actor.max_relative_error);
    worst_alpha = std::max(worst_alpha, alpha_r.max_relative_error);
  }
  return {ok, fmt::format("{} seeds; worst relative error mlp {:.1e}, critic {:.1e}, actor {:.1e}, alpha {:.1e} (tol 1e-4)",
                          kSeeds, worst_mlp, worst_critic, worst_actor, worst_alpha)};
}

// ---------------------------------------------------------------- 4, 6, 8

struct TrainingRuns {
  std::vector<harness::TrainResult> scratch;
  std::vector<harness::TrainResult> pretrained;
  std::vector<harness::TrainResult> adapted;
  std::vector<fs::path> metrics;
  double seconds = 0.0;
};

constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr int kBudget = 60;

harness::RunConfig cooling_config(const fs::path& out, std::uint64_t seed) {
  harness::RunConfig c;
  c.plant = harness::PlantKind::cooling;
  c.seed = seed;
  c.sac.seed = seed;
  c.episodes = kBudget;
  c.out_dir = out;
  return c;
}

// Episodes (counted from the start of the run) until the first 5000-step
// episode, or budget + 1 when none is reached.
std::int64_t first_full_episode(const harness::TrainResult& r, int max_steps) {
  for (std::size_t i = 0; i < r.episodes.size(); ++i) {
    if (r.episodes[i].length == max_steps && r.episodes[i].end_event == env::StepEvent::truncated) {
      return static_cast<std::int64_t>(i) + 1;
    }
  }
  return kBudget + 1;
}

void progress(const std::string& label, const harness::EpisodeSummary& s) {
  if (s.episode % 10 == 0 || s.length >= 5000) {
    spdlog::info("{} episode {:3d} length {:5d} ({})", label, s.episode, s.length, env::to_string(s.end_event));
  }
}

TrainingRuns& training_runs(const fs::path& work) {
  static std::optional<TrainingRuns> runs;
  if (runs) return *runs;
  runs.emplace();
  const auto t0 = Clock::now();
  for (std::uint64_t seed : kSeeds) {
    const auto ts = Clock::now();
    harness::TrainOptions o;
    const std::string label = fmt::format("scratch seed {}", seed);
    o.on_episode = [&](const harness::EpisodeSummary& s) {
      progress(label, s);
      return true;
    };
    runs->scratch.push_back(harness::train(cooling_config(work / fmt::format("scratch_{}", seed), seed), std::move(o)));
    runs->metrics.push_back(runs->scratch.back().metrics_path);
    spdlog::info("{} done in {:.0f} s", label, seconds_since(ts));
  }
  for (std::uint64_t seed : kSeeds) {
    const auto ts = Clock::now();
    harness::RunConfig pre = cooling_config(work / fmt::format("pretrain_{}", seed), seed);
    pre.plant = harness::PlantKind::log;
    runs->pretrained.push_back(harness::train(pre));
    runs->metrics.push_back(runs->pretrained.back().metrics_path);

    harness::TrainOptions o;
    o.resume = runs->pretrained.back().checkpoint_path;
    const std::string label = fmt::format("adapted seed {}", seed);
    const int max_steps = pre.env.max_steps;
    o.on_episode = [&, max_steps](const harness::EpisodeSummary& s) {
      progress(label, s);
      return !(s.length == max_steps && s.end_event == env::StepEvent::truncated);
    };
    runs->adapted.push_back(
        harness::train(cooling_config(work / fmt::format("adapted_{}", seed), seed), std::move(o)));
    runs->metrics.push_back(runs->adapted.back().metrics_path);
    spdlog::info("pretrain + {} done in {:.0f} s", label, seconds_since(ts));
  }
  runs->seconds = seconds_since(t0);
  return *runs;
}

Outcome learning_curve(const fs::path& work) {
  const TrainingRuns& runs = training_runs(work);
  bool any_full = false;
  bool all_ratio = true;
  std::string detail;
  for (std::size_t i = 0; i < runs.scratch.size(); ++i) {
    const auto& eps = runs.scratch[i].episodes;
    if (eps.size() < 20) return {false, "run ended early"};
    const std::int64_t first = first_full_episode(runs.scratch[i], 5000);
    any_full |= first <= kBudget;
    const std::int64_t head = median_length(eps.begin(), eps.begin() + 10);
    const std::int64_t tail = median_length(eps.end() - 10, eps.end());
    all_ratio &= tail > 10 * head;
    detail += fmt::format("seed {}: first 5000-step episode {}, median first/last 10 = {}/{}; ", kSeeds[i],
                          first <= kBudget ? std::to_string(first) : "none", head, tail);
  }
  return {any_full && all_ratio, detail + fmt::format("training total {:.0f} s", runs.seconds)};
}

Outcome transfer(const fs::path& work) {
  const TrainingRuns& runs = training_runs(work);
  std::vector<double> scratch, adapted;
  for (std::size_t i = 0; i < runs.scratch.size(); ++i) {
    scratch.push_back(static_cast<double>(first_full_episode(runs.scratch[i], 5000)));
    adapted.push_back(static_cast<double>(first_full_episode(runs.adapted[i], 5000)));
  }
  const double ms = harness::median(scratch);
  const double ma = harness::median(adapted);
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += fmt::format("{}{}", s.empty() ? "" : ",", x > kBudget ? std::string("none") : fmt::format("{}", x));
    return s;
  };
  return {ma < ms, fmt::format("episodes to first 5000-step episode: pretrained+adapted [{}] median {} vs scratch [{}] "
                               "median {} (need fewer)",
                               list(adapted), ma, list(scratch), ms)};
}

Outcome termination(const fs::path& work) {
  const TrainingRuns& runs = training_runs(work);
  std::size_t terminated = 0, truncated = 0, bad = 0, files = 0;
  for (const fs::path& p : runs.metrics) {
    ++files;
    for (const harness::EpisodeStats& e : harness::summarize_episodes(harness::read_metrics(p))) {
      if (e.end_event == env::StepEvent::terminated) {
        ++terminated;
        bad += e.final_temperature >= 55.0 ? 0 : 1;
      } else if (e.end_event == env::StepEvent::truncated) {
        ++truncated;
        bad += e.final_step == 5000 && e.final_temperature < 55.0 ? 0 : 1;
      } else {
        ++bad;
      }
    }
  }
  return {bad == 0 && terminated + truncated > 0,
          fmt::format("{} metrics files, {} terminated and {} truncated episodes, {} violations", files, terminated,
                      truncated, bad)};
}

// ---------------------------------------------------------------- 5

Outcome scripted(const fs::path& work) {
  harness::RunConfig c;
  c.out_dir = work / "scripted";
  const plant::CoolingParams p = c.cooling;
  harness::EvalOptions off;
  off.episodes = 3;
  const auto s_off = harness::evaluate(c, harness::scripted_policy(harness::ScriptedPolicy::all_off), std::move(off));
  harness::EvalOptions high;
  high.episodes = 3;
  const auto s_high =
      harness::evaluate(c, harness::scripted_policy(harness::ScriptedPolicy::all_high), std::move(high));
  bool ok = p.equilibrium(0) < 55.0 && p.equilibrium(32) > 55.0;
  for (const auto& e : s_off.episodes) ok &= e.length == 5000 && e.end_event == env::StepEvent::truncated;
  for (const auto& e : s_high.episodes) ok &= e.length < 5000 && e.end_event == env::StepEvent::terminated;
  return {ok, fmt::format("equilibria {} / {} C; all-off lengths max {} (truncated), all-high lengths max {} "
                          "(terminated)",
                          p.equilibrium(0), p.equilibrium(32), s_off.max_length, s_high.max_length)};
}

// ---------------------------------------------------------------- 7

bool board_is_safe(aptc::testing::MockSysfs& m, int n) {
  if (m.max_freq_raw(0) != "1000000\n") return false;
  for (int cpu = 1; cpu < n; ++cpu) {
    if (m.online_raw(cpu) != "0\n") return false;
  }
  return true;
}

Outcome safety() {
  constexpr int n = 16;
  aptc::testing::MockSysfs m(n);
  sysboard::SysfsBoard board(m.layout(), n);
  sysboard::SafetyConfig cfg;
  cfg.poll_interval = 0.2;
  std::string detail;
  bool ok = true;

  // Scripted trace, one poll per sample.
  sysboard::SafetyGuard g(board, cfg);
  const env::ActionCommand all_high{n, n};
  m.set_temperature(58.0);
  ok &= g.poll() == sysboard::GuardState::armed;
  g.submit(all_high);
  m.set_temperature(60.5);
  ok &= g.poll() == sysboard::GuardState::tripped && board_is_safe(m, n);
  bool rejected = true;
  for (double t : {60.5, 58.0, 56.0, 55.1}) {
    m.set_temperature(t);
    ok &= g.poll() == sysboard::GuardState::tripped;
    try {
      g.submit(all_high);
      rejected = false;
    } catch (const SafetyTripped&) {
    }
    ok &= board_is_safe(m, n);
  }
  ok &= rejected;
  m.set_temperature(54.9);
  ok &= g.poll() == sysboard::GuardState::armed;
  g.submit(all_high);
  ok &= m.online_raw(n - 1) == "1\n";
  detail += fmt::format("scripted trace {}; ", ok ? "latched 60.5..55.1, unlatched at 54.9" : "FAILED");

  // Background thread latency.
  m.set_temperature(50.0);
  sysboard::SafetyGuard live(board, cfg);
  live.start();
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  m.set_temperature(62.0);
  const auto t0 = Clock::now();
  while (!live.tripped() && seconds_since(t0) < 5.0) std::this_thread::sleep_for(std::chrono::microseconds(200));
  const double latency = seconds_since(t0);
  live.stop();
  // One interval plus the time one poll takes to read and actuate.
  const double allowed = cfg.poll_interval + 0.02;
  ok &= live.tripped() && latency <= allowed && board_is_safe(m, n);
  detail += fmt::format("background trip after {:.3f} s (poll interval {} s, allowed {:.2f} s)", latency,
                        cfg.poll_interval, allowed);
  return {ok, detail};
}

// ---------------------------------------------------------------- 9

Outcome reproducibility(const fs::path& work) {
  harness::RunConfig c;
  c.seed = 11;
  c.sac.seed = 11;
  c.episodes = 12;
  c.out_dir = work / "repro";
  fs::remove_all(c.out_dir);
  const harness::TrainResult a = harness::train(c);
  const std::string metrics = slurp(a.metrics_path);
  const std::string ckpt = slurp(a.checkpoint_path);
  fs::remove_all(work / "repro_first");
  fs::rename(c.out_dir, work / "repro_first");
  const harness::TrainResult b = harness::train(c);
  const bool same_metrics = !metrics.empty() && slurp(b.metrics_path) == metrics;
  const bool same_ckpt = slurp(b.checkpoint_path) == ckpt;

  const harness::Checkpoint loaded = harness::load_checkpoint(b.checkpoint_path);
  const sac::AgentNetworks nets = harness::restore_agent(loaded);
  const fs::path again = work / "repro_roundtrip.aptc";
  harness::save_checkpoint(again, harness::make_checkpoint(harness::parse_config_text(loaded.config.dump()), nets,
                                                           loaded.total_steps, loaded.episodes));
  const bool round_trip = slurp(again) == ckpt;
  return {same_metrics && same_ckpt && round_trip,
          fmt::format("{} steps; metrics identical: {}, checkpoints identical: {}, save(load(x)) == x: {}",
                      a.total_steps, same_metrics, same_ckpt, round_trip)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  std::string work_dir = "acceptance_runs";
  std::vector<int> only;
  std::vector<int> known_red;
  bool verbose = false;
  app.add_option("--work-dir", work_dir, "scratch directory for training runs");
  app.add_option("--only", only, "criteria to run")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--known-red", known_red, "criteria documented as unattainable")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_flag("-v,--verbose", verbose, "log training progress");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);
  spdlog::set_pattern("  [%H:%M:%S] %v");

  const fs::path work = fs::absolute(work_dir);
  fs::create_directories(work);
  for (const char* d : {"scratch_1", "scratch_2", "scratch_3", "pretrain_1", "pretrain_2", "pretrain_3", "adapted_1",
                        "adapted_2", "adapted_3"}) {
    fs::remove_all(work / d);
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"equation exactness", equations},
      {"log plant curve tick", figure_tick},
      {"gradient checks", gradients},
      {"learning curve on cooling plant", [&] { return learning_curve(work); }},
      {"scripted policies on cooling plant", [&] { return scripted(work); }},
      {"pre-training transfer", [&] { return transfer(work); }},
      {"safety guard", safety},
      {"termination semantics", [&] { return termination(work); }},
      {"reproducibility", [&] { return reproducibility(work); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> red(known_red.begin(), known_red.end());
  int failures = 0;
  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    unexpected += o.pass || red.contains(id) ? 0 : 1;
    fmt::print("criterion {} {} {}{} [{:.1f} s] {}\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first,
               red.contains(id) ? " (known red)" : "", seconds_since(t0), o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria failed, {} not listed as known red\n", failures,
             selected.empty() ? criteria.size() : selected.size(), unexpected);
  return unexpected == 0 ? 0 : 1;
}
