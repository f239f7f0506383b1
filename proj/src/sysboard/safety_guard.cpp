#include "aptc/sysboard/safety_guard.hpp"

#include <spdlog/spdlog.h>

#include <chrono>

#include "aptc/errors.hpp"

namespace aptc::sysboard {

void SafetyConfig::validate(double t_limit) const {
  if (!(hard_limit > t_limit)) throw ConfigError("safety.hard_limit must exceed env.t_limit");
  if (!(hysteresis > 0.0)) throw ConfigError("safety.hysteresis must be > 0");
  if (!(poll_interval > 0.0)) throw ConfigError("safety.poll_interval must be > 0");
}

SafetyGuard::SafetyGuard(SysfsBoard& board, SafetyConfig config, LoadController* load)
    : board_(board), config_(std::move(config)), load_(load) {}

SafetyGuard::~SafetyGuard() { stop(); }

GuardState SafetyGuard::poll() {
  double temperature = 0.0;
  bool readable = true;
  try {
    temperature = board_.read_temperature().aggregate;
    last_temperature_.store(temperature);
  } catch (const SensorError& e) {
    readable = false;  // blind: treat as over the limit
    spdlog::error("safety guard: {}", e.what());
  }

  const bool over = !readable || temperature >= config_.hard_limit;
  if (over && state_.load() == GuardState::armed) {
    std::lock_guard lock(gate_);
    spdlog::warn("safety guard tripped at {:.3f} C (hard limit {:.1f} C)", temperature, config_.hard_limit);
    state_.store(GuardState::tripped);
    ++trips_;
    if (load_) load_->stop();
    ApplyReport report;
    try {
      report = board_.apply_command(env::ActionCommand{1, 0});
    } catch (const Error& e) {
      throw SafetyFatal(std::string("safety guard could not force safe state: ") + e.what());
    }
    if (!report.failures.empty()) {
      throw SafetyFatal("safety guard could not force safe state: " + report.failures.front());
    }
  } else if (readable && state_.load() == GuardState::tripped &&
             temperature <= config_.hard_limit - config_.hysteresis) {
    std::lock_guard lock(gate_);
    state_.store(GuardState::armed);
    spdlog::info("safety guard unlatched at {:.3f} C", temperature);
  }
  return state_.load();
}

ApplyReport SafetyGuard::submit(const env::ActionCommand& command) {
  std::lock_guard lock(gate_);
  if (state_.load() == GuardState::tripped) throw SafetyTripped("actuation rejected: safety guard latched");
  return board_.apply_command(command);
}

void SafetyGuard::start() {
  if (thread_.joinable()) return;
  {
    std::lock_guard lock(wake_mutex_);
    stop_requested_ = false;
  }
  thread_ = std::thread([this] { loop(); });
}

void SafetyGuard::stop() {
  {
    std::lock_guard lock(wake_mutex_);
    stop_requested_ = true;
  }
  wake_.notify_all();
  if (thread_.joinable()) thread_.join();
}

std::optional<std::string> SafetyGuard::fatal_error() const {
  std::lock_guard lock(fatal_mutex_);
  return fatal_;
}

void SafetyGuard::loop() {
  const auto interval = std::chrono::duration<double>(config_.poll_interval);
  for (;;) {
    try {
      poll();
    } catch (const SafetyFatal& e) {
      spdlog::critical("{}", e.what());
      std::lock_guard lock(fatal_mutex_);
      fatal_ = e.what();
      return;
    }
    std::unique_lock lock(wake_mutex_);
    if (wake_.wait_for(lock, interval, [this] { return stop_requested_; })) return;
  }
}

}  // namespace aptc::sysboard
