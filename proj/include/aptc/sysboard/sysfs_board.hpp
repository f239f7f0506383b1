#pragma once

// Linux backend: CPU hotplug and frequency pinning through sysfs, plus thermal
// zone readout. Every path is resolved under a configurable root so the whole
// backend runs against a mock directory tree in tests.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aptc/environment.hpp"

namespace aptc::sysboard {

inline constexpr const char* kRootEnvVar = "APTC_SYS_ROOT";

struct SysfsLayout {
  std::filesystem::path root{"/"};
  // "{N}" is replaced by the CPU index.
  std::string cpu_online_template = "sys/devices/system/cpu/cpu{N}/online";
  std::string cpufreq_template = "sys/devices/system/cpu/cpu{N}/cpufreq";
  // Sensor directories relative to root, each holding a millidegree `temp`
  // file. Empty means: every sys/class/thermal/thermal_zone* under root.
  std::vector<std::string> sensors;

  /// `base` with root replaced by $APTC_SYS_ROOT when that is set.
  static SysfsLayout from_environment(SysfsLayout base);
  static SysfsLayout from_environment();

  std::filesystem::path cpu_online(std::size_t cpu) const;
  std::filesystem::path cpufreq(std::size_t cpu) const;
  /// Throws ConfigError if root is missing or no sensor can be found.
  std::vector<std::filesystem::path> sensor_paths() const;
};

enum class FreqLevel { low, high };

struct TemperatureReading {
  double aggregate = 0.0;                      // max over readable sensors
  std::vector<std::optional<double>> sensors;  // per sensor, nullopt if unreadable
};

struct ApplyReport {
  env::BoardState applied;
  env::ActionCommand effective;  // after the CPU0 clamp
  bool clamped = false;
  std::vector<std::string> failures;  // one message per CPU that could not be set
};

class SysfsBoard {
 public:
  SysfsBoard(SysfsLayout layout, int n_cpus);

  const SysfsLayout& layout() const { return layout_; }
  int n_cpus() const { return n_cpus_; }

  /// Writes the governor to every CPU that exposes cpufreq. Returns the number
  /// of CPUs that accepted it.
  int initialize_governor(const std::string& governor = "performance");

  /// Throws PolicyError for offlining CPU0, ActuationError on write failure and
  /// HardwareError when the read-back disagrees.
  bool set_cpu_online(int cpu, bool online);
  bool is_online(int cpu) const;

  /// Pins scaling_max_freq to the lowest or highest advertised frequency.
  /// Throws UsageError for an offline CPU.
  FreqLevel set_cpu_freq_level(int cpu, FreqLevel level);
  std::vector<long> available_frequencies(int cpu) const;

  /// Throws SensorError when no sensor is readable.
  TemperatureReading read_temperature() const;

  /// Online CPUs 0..k_on-1 (at least CPU0), high frequency on 0..k_high-1,
  /// low on the remaining online ones. Continues past per-CPU failures.
  ApplyReport apply_command(const env::ActionCommand& command);

 private:
  void check_index(int cpu) const;

  SysfsLayout layout_;
  int n_cpus_;
  std::vector<std::filesystem::path> sensors_;
};

/// Reads a sysfs file and strips trailing whitespace.
std::optional<std::string> read_sysfs(const std::filesystem::path& path);
/// Writes `value` followed by a single newline. Returns false on failure.
bool write_sysfs(const std::filesystem::path& path, const std::string& value);

}  // namespace aptc::sysboard
