#pragma once

// Live hardware as an environment plant, plus the session object that owns the
// board, the load generator and the safety guard for the length of a run.

#include <chrono>
#include <functional>
#include <memory>

#include "aptc/environment.hpp"
#include "aptc/harness/config.hpp"
#include "aptc/sysboard/load_controller.hpp"
#include "aptc/sysboard/safety_guard.hpp"
#include "aptc/sysboard/sysfs_board.hpp"

namespace aptc::harness {

using Sleeper = std::function<void(double seconds)>;

class SysfsPlant final : public env::Plant {
 public:
  SysfsPlant(sysboard::SysfsBoard& board, sysboard::SafetyGuard& guard, double step_seconds, SysfsConfig reset,
             Sleeper sleep = {});

  /// Idles at one low CPU until cooled below the reset threshold, then returns
  /// the temperature. Throws HardwareError on timeout and SafetyFatal if the
  /// guard thread died.
  double reset() override;
  /// Submits through the guard, waits one control period, reads the sensors.
  /// Throws SafetyTripped while the guard is latched.
  Outcome advance(const env::ActionCommand& command, int n_cpus) override;
  double step_seconds() const override { return step_seconds_; }
  std::string name() const override { return "sysfs"; }

 private:
  void check_guard() const;

  sysboard::SysfsBoard& board_;
  sysboard::SafetyGuard& guard_;
  double step_seconds_;
  SysfsConfig reset_;
  Sleeper sleep_;
};

// Board + load + guard, started on construction and torn down in reverse.
class LiveSession {
 public:
  explicit LiveSession(const RunConfig& config);
  ~LiveSession();
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  std::unique_ptr<env::Plant> make_plant(Sleeper sleep = {});
  sysboard::SysfsBoard& board() { return *board_; }
  sysboard::SafetyGuard& guard() { return *guard_; }
  sysboard::LoadController& load() { return *load_; }
  /// Restarts the load generator if the guard stopped it and has since unlatched.
  void ensure_load();

 private:
  RunConfig config_;
  std::unique_ptr<sysboard::SysfsBoard> board_;
  std::unique_ptr<sysboard::LoadController> load_;
  std::unique_ptr<sysboard::SafetyGuard> guard_;
};

}  // namespace aptc::harness
