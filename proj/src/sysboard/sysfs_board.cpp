#include "aptc/sysboard/sysfs_board.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aptc/errors.hpp"

namespace fs = std::filesystem;

namespace aptc::sysboard {

namespace {

std::string expand(const std::string& tmpl, std::size_t cpu) {
  std::string out = tmpl;
  const std::string key = "{N}";
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos)) {
    out.replace(pos, key.size(), std::to_string(cpu));
  }
  return out;
}

std::optional<long> parse_long(const std::string& text) {
  long value = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

}  // namespace

std::optional<std::string> read_sysfs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  return text;
}

bool write_sysfs(const fs::path& path, const std::string& value) {
  // sysfs attributes must already exist; never create them.
  if (!fs::exists(path)) return false;
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) return false;
  out << value << '\n';
  out.flush();
  return static_cast<bool>(out);
}

SysfsLayout SysfsLayout::from_environment(SysfsLayout base) {
  if (const char* root = std::getenv(kRootEnvVar); root != nullptr && *root != '\0') base.root = root;
  return base;
}

SysfsLayout SysfsLayout::from_environment() { return from_environment(SysfsLayout{}); }

fs::path SysfsLayout::cpu_online(std::size_t cpu) const { return root / expand(cpu_online_template, cpu); }

fs::path SysfsLayout::cpufreq(std::size_t cpu) const { return root / expand(cpufreq_template, cpu); }

std::vector<fs::path> SysfsLayout::sensor_paths() const {
  if (!fs::is_directory(root)) throw ConfigError("sysfs root does not exist: " + root.string());
  std::vector<fs::path> out;
  if (!sensors.empty()) {
    for (const std::string& s : sensors) out.push_back(root / s);
  } else {
    const fs::path thermal = root / "sys/class/thermal";
    if (fs::is_directory(thermal)) {
      for (const auto& entry : fs::directory_iterator(thermal)) {
        if (entry.path().filename().string().rfind("thermal_zone", 0) == 0) out.push_back(entry.path());
      }
    }
    std::sort(out.begin(), out.end());
  }
  if (out.empty()) throw ConfigError("no thermal sensor configured or discovered under " + root.string());
  return out;
}

SysfsBoard::SysfsBoard(SysfsLayout layout, int n_cpus)
    : layout_(std::move(layout)), n_cpus_(n_cpus), sensors_(layout_.sensor_paths()) {
  if (n_cpus_ < 1) throw ConfigError("sysfs board needs at least one CPU");
}

void SysfsBoard::check_index(int cpu) const {
  if (cpu < 0 || cpu >= n_cpus_) throw InputError("CPU index " + std::to_string(cpu) + " out of range");
}

int SysfsBoard::initialize_governor(const std::string& governor) {
  int accepted = 0;
  for (int cpu = 0; cpu < n_cpus_; ++cpu) {
    const fs::path p = layout_.cpufreq(cpu) / "scaling_governor";
    if (!fs::exists(p)) continue;
    if (write_sysfs(p, governor) && read_sysfs(p) == governor) {
      ++accepted;
    } else {
      spdlog::warn("cpu{}: could not set governor {}", cpu, governor);
    }
  }
  return accepted;
}

bool SysfsBoard::is_online(int cpu) const {
  check_index(cpu);
  const fs::path p = layout_.cpu_online(cpu);
  if (cpu == 0 && !fs::exists(p)) return true;  // boot CPU without a hotplug switch
  const auto text = read_sysfs(p);
  if (!text) throw HardwareError("cpu" + std::to_string(cpu) + ": cannot read " + p.string());
  return *text == "1";
}

bool SysfsBoard::set_cpu_online(int cpu, bool online) {
  check_index(cpu);
  if (cpu == 0) {
    if (!online) throw PolicyError("cpu0 cannot be taken offline");
    if (!fs::exists(layout_.cpu_online(0))) return true;
  }
  const fs::path p = layout_.cpu_online(cpu);
  const std::string value = online ? "1" : "0";
  if (!write_sysfs(p, value)) {
    throw ActuationError("cpu" + std::to_string(cpu) + ": write to " + p.string() + " failed: " + std::strerror(errno));
  }
  const auto back = read_sysfs(p);
  if (back != value) {
    throw HardwareError("cpu" + std::to_string(cpu) + ": online reads back '" + back.value_or("<unreadable>") + "'");
  }
  return online;
}

std::vector<long> SysfsBoard::available_frequencies(int cpu) const {
  check_index(cpu);
  const fs::path dir = layout_.cpufreq(cpu);
  std::vector<long> freqs;
  if (const auto list = read_sysfs(dir / "scaling_available_frequencies")) {
    std::istringstream in(*list);
    std::string token;
    while (in >> token) {
      if (const auto v = parse_long(token)) freqs.push_back(*v);
    }
  }
  if (freqs.empty()) {
    // Drivers without a discrete table still advertise their range.
    const auto lo = read_sysfs(dir / "cpuinfo_min_freq");
    const auto hi = read_sysfs(dir / "cpuinfo_max_freq");
    if (lo && hi) {
      if (const auto a = parse_long(*lo)) freqs.push_back(*a);
      if (const auto b = parse_long(*hi)) freqs.push_back(*b);
    }
  }
  std::sort(freqs.begin(), freqs.end());
  return freqs;
}

FreqLevel SysfsBoard::set_cpu_freq_level(int cpu, FreqLevel level) {
  if (!is_online(cpu)) throw UsageError("cpu" + std::to_string(cpu) + " is offline");
  const std::vector<long> freqs = available_frequencies(cpu);
  if (freqs.empty()) throw ActuationError("cpu" + std::to_string(cpu) + ": no advertised frequencies");
  const std::string value = std::to_string(level == FreqLevel::low ? freqs.front() : freqs.back());
  const fs::path p = layout_.cpufreq(cpu) / "scaling_max_freq";
  if (!write_sysfs(p, value)) throw ActuationError("cpu" + std::to_string(cpu) + ": write to " + p.string() + " failed");
  const auto back = read_sysfs(p);
  if (back != value) {
    throw HardwareError("cpu" + std::to_string(cpu) + ": scaling_max_freq reads back '" +
                        back.value_or("<unreadable>") + "'");
  }
  return level;
}

TemperatureReading SysfsBoard::read_temperature() const {
  TemperatureReading reading;
  bool any = false;
  for (const fs::path& sensor : sensors_) {
    std::optional<double> value;
    if (const auto text = read_sysfs(sensor / "temp")) {
      if (const auto milli = parse_long(*text)) value = static_cast<double>(*milli) / 1000.0;
    }
    if (!value) {
      spdlog::warn("sensor {} unreadable, excluded", sensor.string());
    } else if (!any || *value > reading.aggregate) {
      reading.aggregate = *value;
      any = true;
    }
    reading.sensors.push_back(value);
  }
  if (!any) throw SensorError("no readable temperature sensor");
  return reading;
}

ApplyReport SysfsBoard::apply_command(const env::ActionCommand& command) {
  if (command.k_on < 0 || command.k_high < 0 || command.k_high > command.k_on || command.k_on > n_cpus_) {
    throw InputError("apply_command: invalid command");
  }
  ApplyReport report;
  report.effective = command;
  if (command.k_on < 1) {
    report.effective.k_on = 1;
    report.clamped = true;
    spdlog::info("apply_command: k_on=0 clamped to 1 (cpu0 stays online)");
  }
  const int k_on = report.effective.k_on;
  const int k_high = report.effective.k_high;

  enum class Mode { off, low, high };
  std::vector<Mode> desired(n_cpus_);
  for (int cpu = 0; cpu < n_cpus_; ++cpu) desired[cpu] = cpu >= k_on ? Mode::off : cpu < k_high ? Mode::high : Mode::low;
  std::vector<bool> ok(n_cpus_, true);

  auto attempt = [&](int cpu, auto&& action) {
    try {
      action();
    } catch (const Error& e) {
      ok[cpu] = false;
      report.failures.push_back(e.what());
    }
  };
  // Shed load first, then bring up and pin the rest.
  for (int cpu = n_cpus_ - 1; cpu >= k_on; --cpu) attempt(cpu, [&] { set_cpu_online(cpu, false); });
  for (int cpu = 0; cpu < k_on; ++cpu) {
    attempt(cpu, [&] {
      set_cpu_online(cpu, true);
      set_cpu_freq_level(cpu, desired[cpu] == Mode::high ? FreqLevel::high : FreqLevel::low);
    });
  }

  env::BoardState board{n_cpus_, 0, 0, 0};
  for (int cpu = 0; cpu < n_cpus_; ++cpu) {
    Mode actual = desired[cpu];
    if (!ok[cpu]) {
      // Best effort: report what the hardware says rather than what was asked.
      try {
        if (!is_online(cpu)) {
          actual = Mode::off;
        } else {
          const auto freqs = available_frequencies(cpu);
          const auto cur = read_sysfs(layout_.cpufreq(cpu) / "scaling_max_freq");
          const auto v = cur ? parse_long(*cur) : std::nullopt;
          actual = (v && !freqs.empty() && *v == freqs.back() && freqs.size() > 1) ? Mode::high : Mode::low;
        }
      } catch (const Error&) {
        actual = Mode::high;  // unknown: assume the hottest state
      }
    }
    if (actual == Mode::off) {
      ++board.cpus_off;
    } else if (actual == Mode::high) {
      ++board.cpus_high;
    } else {
      ++board.cpus_low;
    }
  }
  report.applied = board;
  if (!report.failures.empty()) {
    spdlog::warn("apply_command: {} CPU(s) failed to actuate", report.failures.size());
  }
  return report;
}

}  // namespace aptc::sysboard
