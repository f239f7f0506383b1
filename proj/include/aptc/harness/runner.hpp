#pragma once

// Training and evaluation loops over any plant.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "aptc/environment.hpp"
#include "aptc/harness/checkpoint.hpp"
#include "aptc/harness/config.hpp"
#include "aptc/harness/metrics.hpp"
#include "aptc/harness/sysfs_plant.hpp"

namespace aptc::harness {

struct EpisodeSummary {
  std::int64_t episode = 0;
  std::int64_t length = 0;
  double total_reward = 0.0;
  env::StepEvent end_event = env::StepEvent::none;
  double final_temperature = 0.0;
  std::uint64_t total_steps = 0;
  double alpha = 0.0;
};

/// Called after every episode; returning false ends the run early.
using EpisodeCallback = std::function<bool(const EpisodeSummary&)>;

/// Simulated plant for the configured (or overridden) kind. Throws UsageError
/// for sysfs, which needs a LiveSession.
std::unique_ptr<env::Plant> make_simulated_plant(const RunConfig& config);
std::unique_ptr<env::Plant> make_simulated_plant(const RunConfig& config, PlantKind kind);

/// Replay entry for one step. Only reaching the limit is terminal; a
/// truncated step still bootstraps.
sac::Transition make_transition(const env::Observation& observation, const env::RawAction& action,
                                const env::StepResult& result);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  EpisodeCallback on_episode;
  // Plant override, e.g. a scripted or live plant. Defaults to make_simulated_plant.
  std::unique_ptr<env::Plant> plant;
  LiveSession* live = nullptr;
};

struct TrainResult {
  std::vector<EpisodeSummary> episodes;
  std::uint64_t total_steps = 0;
  std::uint64_t episodes_completed = 0;  // including any resumed from
  std::uint64_t safety_trips = 0;
  std::filesystem::path metrics_path;
  std::filesystem::path checkpoint_path;  // written on exit
};

/// Runs config.episodes episodes with one SAC update per environment step.
/// Writes <out_dir>/metrics.csv (appended to when resuming into the same
/// directory), <out_dir>/config.json and <out_dir>/checkpoints/.
TrainResult train(const RunConfig& config, TrainOptions options = {});

using Policy = std::function<env::RawAction(const env::Observation&)>;

enum class ScriptedPolicy { all_off, all_high };
Policy scripted_policy(ScriptedPolicy kind);
/// tanh(mean) when deterministic, otherwise a draw from `rng`, which must
/// outlive the policy.
Policy agent_policy(const sac::AgentNetworks& nets, const sac::SacConfig& config, bool deterministic,
                    std::mt19937_64& rng);

struct EvalSummary {
  std::vector<EpisodeSummary> episodes;
  double mean_length = 0.0;
  double median_length = 0.0;
  std::int64_t max_length = 0;
  double mean_reward = 0.0;
  std::uint64_t safety_trips = 0;
};

struct EvalOptions {
  int episodes = 5;
  std::optional<std::filesystem::path> metrics_path;
  std::unique_ptr<env::Plant> plant;  // defaults to make_simulated_plant(config)
  LiveSession* live = nullptr;
};

/// Runs the policy without learning.
EvalSummary evaluate(const RunConfig& config, const Policy& policy, EvalOptions options);
/// Loads the checkpoint (LoadError if corrupt) and evaluates its actor.
EvalSummary evaluate_checkpoint(const RunConfig& config, const std::filesystem::path& checkpoint, bool deterministic,
                                EvalOptions options);

double median(std::vector<double> values);

/// Checkpoint files in `dir`, oldest first.
std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path& dir);

}  // namespace aptc::harness
