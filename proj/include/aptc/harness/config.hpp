#pragma once

// Run configuration: one structured document covering every module. Absent
// keys take their defaults; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "aptc/environment.hpp"
#include "aptc/plant.hpp"
#include "aptc/sac/agent.hpp"
#include "aptc/sysboard/safety_guard.hpp"
#include "aptc/sysboard/sysfs_board.hpp"

namespace aptc::harness {

enum class PlantKind { log, cooling, sysfs };

std::string to_string(PlantKind kind);
/// Throws ConfigError for anything but log, cooling or sysfs.
PlantKind plant_kind_from_string(const std::string& text);

struct LogPlantConfig {
  double t_init = plant::kDefaultInitialTemperature;
  double dx = plant::kDefaultLogStep;
};

struct SysfsConfig {
  sysboard::SysfsLayout layout;
  // Between episodes the board idles at one low CPU until it has cooled below
  // this temperature.
  double reset_below = 50.0;
  double reset_timeout_seconds = 1800.0;
};

struct RunConfig {
  PlantKind plant = PlantKind::cooling;
  std::uint64_t seed = 0;
  int episodes = 60;  // budget for one invocation
  int eval_every = 0;  // episodes between evaluations, 0 disables
  int eval_episodes = 5;
  int checkpoint_every = 10;
  int keep_checkpoints = 2;
  std::filesystem::path out_dir = "runs";
  double step_interval_seconds = 5.0;  // sysfs control period

  env::EnvConfig env;
  sac::SacConfig sac;
  plant::CoolingParams cooling;
  LogPlantConfig log;
  sysboard::SafetyConfig safety;
  SysfsConfig sysfs;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses a JSON document. Empty or whitespace-only text is the default config.
/// Throws ConfigError with the key path on type, range or unknown-key errors.
RunConfig parse_config_text(const std::string& text);
/// Throws ConfigError if the file cannot be read.
RunConfig parse_config(const std::filesystem::path& path);

/// Complete snapshot including every default; parse_config_text(dump) round-trips.
nlohmann::json to_json(const RunConfig& config);

}  // namespace aptc::harness
