#pragma once

#include <sys/types.h>

#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace aptc::sysboard {

// Owns one external load-generator process (by default a stress workload).
class LoadController {
 public:
  explicit LoadController(std::vector<std::string> argv);
  ~LoadController();
  LoadController(const LoadController&) = delete;
  LoadController& operator=(const LoadController&) = delete;

  /// Throws UsageError if already running, EnvironmentError if spawning fails.
  void start();
  /// SIGTERM, then SIGKILL after `grace_seconds`. No-op when nothing runs.
  void stop(double grace_seconds = 2.0);
  bool running();
  std::optional<pid_t> pid() const;
  const std::vector<std::string>& command() const { return argv_; }

 private:
  bool reap_locked(bool block);

  std::vector<std::string> argv_;
  mutable std::mutex mutex_;
  std::optional<pid_t> pid_;
};

}  // namespace aptc::sysboard
