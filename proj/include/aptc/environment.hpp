#pragma once

// Episodic control environment: continuous two-dimensional action in [-1, 1]^2
// mapped to CPU counts, a normalized (P, margin, slope) observation, and the
// per-step reward.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "aptc/plant.hpp"

namespace aptc::env {

inline constexpr int kDefaultCpuCount = 16;
inline constexpr std::size_t kObservationDim = 3;
inline constexpr std::size_t kActionDim = 2;

using RawAction = std::array<double, kActionDim>;

struct BoardState {
  int n_cpus = kDefaultCpuCount;
  int cpus_high = 0;
  int cpus_low = 0;
  int cpus_off = kDefaultCpuCount;

  static BoardState all_high(int n_cpus);
  static BoardState all_off(int n_cpus);
  int cpus_on() const { return cpus_high + cpus_low; }
  bool valid() const;
  bool operator==(const BoardState&) const = default;
};

struct ActionCommand {
  int k_on = 0;
  int k_high = 0;

  BoardState to_board(int n_cpus) const;
  bool operator==(const ActionCommand&) const = default;
};

struct Observation {
  double p_norm = 0.0;
  double margin_norm = 0.0;
  double slope_norm = 0.0;

  std::array<double, kObservationDim> as_array() const { return {p_norm, margin_norm, slope_norm}; }
};

struct EnvConfig {
  int n_cpus = kDefaultCpuCount;
  double t_limit = 55.0;
  int max_steps = 5000;
  double c_high = 1.0;
  double c_low = 0.5;
  double c_off = 0.0;
  double terminal_penalty = -10.0;
  double switch_penalty_lambda = 0.0;
  double margin_scale = 20.0;
  double slope_scale = 1.0;

  void validate() const;
};

struct CpuState {
  int raw_power = 0;  // S
  double p_norm = 0.0;
};

enum class StepEvent { none, terminated, truncated, safety_trip };
std::string to_string(StepEvent event);
std::optional<StepEvent> step_event_from_string(const std::string& text);

struct StepInfo {
  double temperature = 0.0;
  int raw_power = 0;
  int step_index = 0;
  double slope = 0.0;
  ActionCommand command;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepInfo info;
};

/// S = 2 high + 1 low; P = S / (2n).
CpuState compute_cpu_state(const BoardState& board);

/// Affine map of each component to [0, 1], then half-up rounding to counts.
/// Throws InputError on non-finite components.
ActionCommand quantize_action(const RawAction& raw, int n_cpus);

double compute_reward(const BoardState& board, const ActionCommand& previous, const EnvConfig& config,
                      bool limit_reached);

/// Secant slope (t_now - t_prev) / dt. Returns 0 when there is no previous
/// sample. Throws InputError for dt <= 0.
double compute_slope(double t_now, std::optional<double> t_prev, double dt);

Observation make_observation(const BoardState& board, double temperature, double slope, const EnvConfig& config);

// What the environment needs from a thermal plant: reset to the start state and
// apply a command for one control interval.
class Plant {
 public:
  struct Outcome {
    double temperature = 0.0;
    BoardState applied;  // what actually ended up on the board
  };

  virtual ~Plant() = default;
  virtual double reset() = 0;
  virtual Outcome advance(const ActionCommand& command, int n_cpus) = 0;
  /// Seconds represented by one control interval (used for metrics timestamps).
  virtual double step_seconds() const = 0;
  virtual std::string name() const = 0;
};

class LogPlant final : public Plant {
 public:
  explicit LogPlant(double t_init = plant::kDefaultInitialTemperature, double dx = plant::kDefaultLogStep,
                    double step_seconds = 5.0);
  double reset() override;
  Outcome advance(const ActionCommand& command, int n_cpus) override;
  double step_seconds() const override { return step_seconds_; }
  std::string name() const override { return "log"; }
  const plant::PlantState& state() const { return state_; }

 private:
  double t_init_;
  double dx_;
  double step_seconds_;
  plant::PlantState state_;
};

class CoolingPlant final : public Plant {
 public:
  explicit CoolingPlant(plant::CoolingParams params = {});
  double reset() override;
  Outcome advance(const ActionCommand& command, int n_cpus) override;
  double step_seconds() const override { return params_.dt; }
  std::string name() const override { return "cooling"; }
  double temperature() const { return temperature_; }

 private:
  plant::CoolingParams params_;
  double temperature_;
};

class Environment {
 public:
  Environment(EnvConfig config, std::unique_ptr<Plant> plant);

  Observation reset();
  /// Throws UsageError if the episode has already ended or reset() was never called.
  StepResult step(const RawAction& raw_action);

  const EnvConfig& config() const { return config_; }
  const BoardState& board() const { return board_; }
  double temperature() const { return temperature_; }
  int step_index() const { return step_index_; }
  bool active() const { return active_; }
  Plant& plant() { return *plant_; }
  const Plant& plant() const { return *plant_; }

 private:
  EnvConfig config_;
  std::unique_ptr<Plant> plant_;
  BoardState board_;
  ActionCommand last_command_;
  double temperature_ = 0.0;
  int step_index_ = 0;
  bool active_ = false;
};

}  // namespace aptc::env
