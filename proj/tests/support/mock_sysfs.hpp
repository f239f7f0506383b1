#pragma once

// Throwaway sysfs tree under a temp directory: n CPUs with hotplug and cpufreq
// attributes, plus thermal zones whose temp files the test rewrites.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "aptc/sysboard/sysfs_board.hpp"

namespace aptc::testing {

class MockSysfs {
 public:
  explicit MockSysfs(int n_cpus = 16, int n_zones = 1, std::string freqs = "1000000 2000000")
      : n_cpus_(n_cpus), n_zones_(n_zones) {
    std::random_device rd;
    root_ = std::filesystem::temp_directory_path() / ("aptc_sysfs_" + std::to_string(rd()) + std::to_string(rd()));
    for (int cpu = 0; cpu < n_cpus; ++cpu) {
      const auto dir = cpu_dir(cpu);
      std::filesystem::create_directories(dir / "cpufreq");
      put(dir / "online", "1\n");
      put(dir / "cpufreq/scaling_available_frequencies", freqs + " \n");
      put(dir / "cpufreq/scaling_max_freq", "2000000\n");
      put(dir / "cpufreq/scaling_governor", "schedutil\n");
    }
    for (int z = 0; z < n_zones; ++z) {
      std::filesystem::create_directories(zone_dir(z));
      set_temperature_milli(z, 40000);
    }
  }
  ~MockSysfs() {
    std::error_code ec;
    std::filesystem::remove_all(root_, ec);
  }
  MockSysfs(const MockSysfs&) = delete;
  MockSysfs& operator=(const MockSysfs&) = delete;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path cpu_dir(int cpu) const {
    return root_ / "sys/devices/system/cpu" / ("cpu" + std::to_string(cpu));
  }
  std::filesystem::path zone_dir(int zone) const {
    return root_ / "sys/class/thermal" / ("thermal_zone" + std::to_string(zone));
  }
  aptc::sysboard::SysfsLayout layout() const {
    aptc::sysboard::SysfsLayout l;
    l.root = root_;
    return l;
  }

  void set_temperature_milli(int zone, long milli) { put(zone_dir(zone) / "temp", std::to_string(milli) + "\n"); }
  void set_temperature(double celsius, int zone = 0) {
    set_temperature_milli(zone, static_cast<long>(std::llround(celsius * 1000.0)));
  }

  std::string raw(const std::filesystem::path& p) const {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }
  std::string online_raw(int cpu) const { return raw(cpu_dir(cpu) / "online"); }
  std::string max_freq_raw(int cpu) const { return raw(cpu_dir(cpu) / "cpufreq/scaling_max_freq"); }

  static void put(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
  }

 private:
  int n_cpus_;
  int n_zones_;
  std::filesystem::path root_;
};

}  // namespace aptc::testing
