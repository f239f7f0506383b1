#include "aptc/sysboard/load_controller.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>

#include <chrono>
#include <cstring>
#include <thread>

#include "aptc/errors.hpp"

extern char** environ;

namespace aptc::sysboard {

LoadController::LoadController(std::vector<std::string> argv) : argv_(std::move(argv)) {}

LoadController::~LoadController() { stop(0.5); }

void LoadController::start() {
  std::lock_guard lock(mutex_);
  if (pid_ && !reap_locked(false)) throw UsageError("load process already running");
  if (argv_.empty()) throw EnvironmentError("load command is empty");
  std::vector<char*> args;
  for (std::string& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);
  pid_t child = 0;
  const int rc = posix_spawnp(&child, args[0], nullptr, nullptr, args.data(), environ);
  if (rc != 0) throw EnvironmentError("cannot start '" + argv_[0] + "': " + std::strerror(rc));
  pid_ = child;
}

bool LoadController::reap_locked(bool block) {
  if (!pid_) return true;
  int status = 0;
  const pid_t r = waitpid(*pid_, &status, block ? 0 : WNOHANG);
  if (r == *pid_ || (r < 0 && errno == ECHILD)) {
    pid_.reset();
    return true;
  }
  return false;
}

void LoadController::stop(double grace_seconds) {
  std::lock_guard lock(mutex_);
  if (!pid_ || reap_locked(false)) return;
  kill(*pid_, SIGTERM);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(grace_seconds);
  while (std::chrono::steady_clock::now() < deadline) {
    if (reap_locked(false)) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  kill(*pid_, SIGKILL);
  reap_locked(true);
}

bool LoadController::running() {
  std::lock_guard lock(mutex_);
  return pid_ && !reap_locked(false);
}

std::optional<pid_t> LoadController::pid() const {
  std::lock_guard lock(mutex_);
  return pid_;
}

}  // namespace aptc::sysboard
