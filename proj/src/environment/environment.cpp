#include "aptc/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "aptc/errors.hpp"

namespace aptc::env {

BoardState BoardState::all_high(int n_cpus) { return BoardState{n_cpus, n_cpus, 0, 0}; }

BoardState BoardState::all_off(int n_cpus) { return BoardState{n_cpus, 0, 0, n_cpus}; }

bool BoardState::valid() const {
  return n_cpus >= 1 && cpus_high >= 0 && cpus_low >= 0 && cpus_off >= 0 &&
         cpus_high + cpus_low + cpus_off == n_cpus;
}

BoardState ActionCommand::to_board(int n_cpus) const {
  return BoardState{n_cpus, k_high, k_on - k_high, n_cpus - k_on};
}

void EnvConfig::validate() const {
  if (n_cpus < 1) throw ConfigError("env.n_cpus must be >= 1");
  if (!std::isfinite(t_limit)) throw ConfigError("env.t_limit must be finite");
  if (max_steps < 1) throw ConfigError("env.max_steps must be >= 1");
  if (!(c_high >= c_low && c_low >= c_off)) throw ConfigError("env reward weights must satisfy c_high >= c_low >= c_off");
  if (!(margin_scale > 0.0)) throw ConfigError("env.margin_scale must be > 0");
  if (!(slope_scale > 0.0)) throw ConfigError("env.slope_scale must be > 0");
  if (!std::isfinite(terminal_penalty)) throw ConfigError("env.terminal_penalty must be finite");
  if (!(switch_penalty_lambda >= 0.0)) throw ConfigError("env.switch_penalty_lambda must be >= 0");
}

std::string to_string(StepEvent event) {
  switch (event) {
    case StepEvent::none: return "none";
    case StepEvent::terminated: return "terminated";
    case StepEvent::truncated: return "truncated";
    case StepEvent::safety_trip: return "safety_trip";
  }
  return "none";
}

std::optional<StepEvent> step_event_from_string(const std::string& text) {
  if (text == "none") return StepEvent::none;
  if (text == "terminated") return StepEvent::terminated;
  if (text == "truncated") return StepEvent::truncated;
  if (text == "safety_trip") return StepEvent::safety_trip;
  return std::nullopt;
}

CpuState compute_cpu_state(const BoardState& board) {
  const int s = 2 * board.cpus_high + board.cpus_low;
  return CpuState{s, static_cast<double>(s) / (2.0 * board.n_cpus)};
}

namespace {

int round_half_up(double value) { return static_cast<int>(std::floor(value + 0.5)); }

double to_fraction(double raw) { return std::clamp((raw + 1.0) / 2.0, 0.0, 1.0); }

}  // namespace

ActionCommand quantize_action(const RawAction& raw, int n_cpus) {
  if (!std::isfinite(raw[0]) || !std::isfinite(raw[1])) {
    throw InputError("quantize_action: non-finite action component");
  }
  ActionCommand cmd;
  cmd.k_on = std::clamp(round_half_up(to_fraction(raw[0]) * n_cpus), 0, n_cpus);
  cmd.k_high = std::clamp(round_half_up(to_fraction(raw[1]) * cmd.k_on), 0, cmd.k_on);
  return cmd;
}

double compute_reward(const BoardState& board, const ActionCommand& previous, const EnvConfig& config,
                      bool limit_reached) {
  if (limit_reached) return config.terminal_penalty;
  const double n = board.n_cpus;
  double reward = (board.cpus_high * config.c_high + board.cpus_low * config.c_low + board.cpus_off * config.c_off) / n;
  if (config.switch_penalty_lambda != 0.0) {
    const int changes = std::abs(board.cpus_on() - previous.k_on) + std::abs(board.cpus_high - previous.k_high);
    reward -= config.switch_penalty_lambda * changes / n;
  }
  return reward;
}

double compute_slope(double t_now, std::optional<double> t_prev, double dt) {
  if (!(dt > 0.0)) throw InputError("compute_slope: dt must be > 0");
  if (!t_prev) return 0.0;
  return (t_now - *t_prev) / dt;
}

Observation make_observation(const BoardState& board, double temperature, double slope, const EnvConfig& config) {
  Observation obs;
  obs.p_norm = std::clamp(compute_cpu_state(board).p_norm, 0.0, 1.0);
  obs.margin_norm = std::clamp((config.t_limit - temperature) / config.margin_scale, -1.0, 1.0);
  obs.slope_norm = std::clamp(slope / config.slope_scale, -1.0, 1.0);
  return obs;
}

LogPlant::LogPlant(double t_init, double dx, double step_seconds)
    : t_init_(t_init), dx_(dx), step_seconds_(step_seconds), state_(plant::PlantState::at_origin(t_init)) {
  if (!(dx_ > 0.0)) throw ConfigError("log_plant.dx must be > 0");
  if (!std::isfinite(t_init_)) throw ConfigError("log_plant.t_init must be finite");
}

double LogPlant::reset() {
  state_ = plant::PlantState::at_origin(t_init_);
  return state_.temperature;
}

Plant::Outcome LogPlant::advance(const ActionCommand& command, int n_cpus) {
  const BoardState board = command.to_board(n_cpus);
  state_ = plant::log_plant_step(state_, compute_cpu_state(board).raw_power, dx_);
  return Outcome{state_.temperature, board};
}

CoolingPlant::CoolingPlant(plant::CoolingParams params) : params_(params), temperature_(params.t_ambient) {
  params_.validate();
}

double CoolingPlant::reset() {
  temperature_ = params_.t_ambient;
  return temperature_;
}

Plant::Outcome CoolingPlant::advance(const ActionCommand& command, int n_cpus) {
  const BoardState board = command.to_board(n_cpus);
  temperature_ = plant::cooling_plant_step(temperature_, compute_cpu_state(board).raw_power, params_);
  return Outcome{temperature_, board};
}

Environment::Environment(EnvConfig config, std::unique_ptr<Plant> plant)
    : config_(config), plant_(std::move(plant)), board_(BoardState::all_high(config.n_cpus)) {
  config_.validate();
  if (!plant_) throw InputError("Environment requires a plant");
}

Observation Environment::reset() {
  temperature_ = plant_->reset();
  board_ = BoardState::all_high(config_.n_cpus);
  last_command_ = ActionCommand{config_.n_cpus, config_.n_cpus};
  step_index_ = 0;
  active_ = true;
  // The reset sample has no predecessor, so its slope is 0.
  return make_observation(board_, temperature_, compute_slope(temperature_, std::nullopt, 1.0), config_);
}

StepResult Environment::step(const RawAction& raw_action) {
  if (!active_) throw UsageError("Environment::step called on a finished or unstarted episode");
  const ActionCommand command = quantize_action(raw_action, config_.n_cpus);
  const double t_prev = temperature_;
  const Plant::Outcome outcome = plant_->advance(command, config_.n_cpus);
  board_ = outcome.applied;
  temperature_ = outcome.temperature;
  ++step_index_;

  StepResult result;
  result.info.slope = compute_slope(temperature_, t_prev, 1.0);
  result.observation = make_observation(board_, temperature_, result.info.slope, config_);
  result.terminated = temperature_ >= config_.t_limit;
  result.truncated = !result.terminated && step_index_ >= config_.max_steps;
  result.reward = compute_reward(board_, last_command_, config_, result.terminated);
  result.info.temperature = temperature_;
  result.info.raw_power = compute_cpu_state(board_).raw_power;
  result.info.step_index = step_index_;
  result.info.command = ActionCommand{board_.cpus_on(), board_.cpus_high};

  last_command_ = result.info.command;
  if (result.terminated || result.truncated) active_ = false;
  return result;
}

}  // namespace aptc::env
