#pragma once

// Rigid thermal protection that runs beside the learning agent. Above the hard
// limit it removes the load, forces the board to a single low-frequency CPU and
// latches; it unlatches once the temperature has fallen by the hysteresis.
// Agent and guard actuation share one exclusive gate.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "aptc/sysboard/load_controller.hpp"
#include "aptc/sysboard/sysfs_board.hpp"

namespace aptc::sysboard {

struct SafetyConfig {
  double hard_limit = 60.0;
  double hysteresis = 5.0;
  double poll_interval = 1.0;  // seconds
  std::vector<std::string> load_command{"stress-ng", "--cpu", "0"};

  /// Throws ConfigError unless hard_limit > t_limit, hysteresis > 0 and poll_interval > 0.
  void validate(double t_limit) const;
};

enum class GuardState { armed, tripped };

class SafetyGuard {
 public:
  SafetyGuard(SysfsBoard& board, SafetyConfig config, LoadController* load = nullptr);
  ~SafetyGuard();
  SafetyGuard(const SafetyGuard&) = delete;
  SafetyGuard& operator=(const SafetyGuard&) = delete;

  /// One evaluation of the trip/unlatch rule. Throws SafetyFatal when the safe
  /// state cannot be forced.
  GuardState poll();

  /// Agent actuation path. Throws SafetyTripped while latched.
  ApplyReport submit(const env::ActionCommand& command);

  /// Periodic polling on a background thread.
  void start();
  void stop();
  bool running() const { return thread_.joinable(); }

  GuardState state() const { return state_.load(); }
  bool tripped() const { return state() == GuardState::tripped; }
  std::uint64_t trip_count() const { return trips_.load(); }
  double last_temperature() const { return last_temperature_.load(); }
  /// Set when the background thread hit a fatal error and stopped.
  std::optional<std::string> fatal_error() const;
  const SafetyConfig& config() const { return config_; }

 private:
  void loop();

  SysfsBoard& board_;
  SafetyConfig config_;
  LoadController* load_;
  std::mutex gate_;
  std::atomic<GuardState> state_{GuardState::armed};
  std::atomic<std::uint64_t> trips_{0};
  std::atomic<double> last_temperature_{0.0};

  std::thread thread_;
  std::mutex wake_mutex_;
  std::condition_variable wake_;
  bool stop_requested_ = false;
  mutable std::mutex fatal_mutex_;
  std::optional<std::string> fatal_;
};

}  // namespace aptc::sysboard
