#include "aptc/harness/sysfs_plant.hpp"

#include <spdlog/spdlog.h>

#include <thread>

#include "aptc/errors.hpp"

namespace aptc::harness {

namespace {

void real_sleep(double seconds) { std::this_thread::sleep_for(std::chrono::duration<double>(seconds)); }

}  // namespace

SysfsPlant::SysfsPlant(sysboard::SysfsBoard& board, sysboard::SafetyGuard& guard, double step_seconds,
                       SysfsConfig reset, Sleeper sleep)
    : board_(board), guard_(guard), step_seconds_(step_seconds), reset_(std::move(reset)),
      sleep_(sleep ? std::move(sleep) : Sleeper(real_sleep)) {
  if (!(step_seconds_ > 0.0)) throw ConfigError("step_interval_seconds must be > 0");
}

void SysfsPlant::check_guard() const {
  if (const auto fatal = guard_.fatal_error()) throw SafetyFatal(*fatal);
}

double SysfsPlant::reset() {
  check_guard();
  double waited = 0.0;
  for (;;) {
    if (!guard_.tripped()) {
      guard_.submit(env::ActionCommand{1, 0});
      const double t = board_.read_temperature().aggregate;
      if (t < reset_.reset_below) break;
    }
    if (waited >= reset_.reset_timeout_seconds) {
      throw HardwareError("board did not cool below " + std::to_string(reset_.reset_below) + " C within the reset timeout");
    }
    sleep_(step_seconds_);
    waited += step_seconds_;
    check_guard();
  }
  // Episodes start from the all-high board, like the simulated plants.
  guard_.submit(env::ActionCommand{board_.n_cpus(), board_.n_cpus()});
  return board_.read_temperature().aggregate;
}

env::Plant::Outcome SysfsPlant::advance(const env::ActionCommand& command, int n_cpus) {
  check_guard();
  if (n_cpus != board_.n_cpus()) throw InputError("sysfs plant: CPU count mismatch");
  const sysboard::ApplyReport report = guard_.submit(command);
  sleep_(step_seconds_);
  check_guard();
  if (guard_.tripped()) throw SafetyTripped("safety guard tripped during the control interval");
  return {board_.read_temperature().aggregate, report.applied};
}

LiveSession::LiveSession(const RunConfig& config) : config_(config) {
  sysboard::SysfsLayout layout = sysboard::SysfsLayout::from_environment(config.sysfs.layout);
  board_ = std::make_unique<sysboard::SysfsBoard>(layout, config.env.n_cpus);
  if (board_->initialize_governor() == 0) spdlog::warn("no CPU accepted the performance governor");
  load_ = std::make_unique<sysboard::LoadController>(config.safety.load_command);
  guard_ = std::make_unique<sysboard::SafetyGuard>(*board_, config.safety, load_.get());
  guard_->poll();
  guard_->start();
  ensure_load();
}

LiveSession::~LiveSession() {
  guard_->stop();
  load_->stop();
  try {
    board_->apply_command(env::ActionCommand{1, 0});
  } catch (const Error& e) {
    spdlog::error("could not leave the board in the safe state: {}", e.what());
  }
}

void LiveSession::ensure_load() {
  if (!guard_->tripped() && !load_->running()) load_->start();
}

std::unique_ptr<env::Plant> LiveSession::make_plant(Sleeper sleep) {
  return std::make_unique<SysfsPlant>(*board_, *guard_, config_.step_interval_seconds, config_.sysfs,
                                      std::move(sleep));
}

}  // namespace aptc::harness
