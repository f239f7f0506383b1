#include <gtest/gtest.h>
#include <signal.h>

#include <chrono>
#include <cstdlib>
#include <random>
#include <thread>

#include "../support/mock_sysfs.hpp"
#include "aptc/errors.hpp"
#include "aptc/sysboard/load_controller.hpp"
#include "aptc/sysboard/safety_guard.hpp"
#include "aptc/sysboard/sysfs_board.hpp"

using namespace aptc;
using namespace aptc::sysboard;
using aptc::testing::MockSysfs;

namespace {

// Reads the mock tree back into a per-CPU picture: -1 offline, 0 low, 1 high.
std::vector<int> board_picture(const MockSysfs& m, int n) {
  std::vector<int> out;
  for (int cpu = 0; cpu < n; ++cpu) {
    if (m.online_raw(cpu) != "1\n") {
      out.push_back(-1);
    } else {
      out.push_back(m.max_freq_raw(cpu) == "2000000\n" ? 1 : 0);
    }
  }
  return out;
}

}  // namespace

TEST(sysfs_layout, environment_variable_overrides_root) {
  ::setenv(kRootEnvVar, "/tmp/somewhere", 1);
  EXPECT_EQ(SysfsLayout::from_environment().root, "/tmp/somewhere");
  ::unsetenv(kRootEnvVar);
  EXPECT_EQ(SysfsLayout::from_environment().root, "/");
}

TEST(sysfs_layout, missing_root_or_sensors_is_config_error) {
  SysfsLayout l;
  l.root = "/nonexistent/aptc/root";
  EXPECT_THROW(l.sensor_paths(), ConfigError);
  MockSysfs m(2, 0);
  EXPECT_THROW(SysfsBoard(m.layout(), 2), ConfigError);
}

TEST(set_cpu_online, writes_exact_ascii) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  EXPECT_FALSE(b.set_cpu_online(3, false));
  EXPECT_EQ(m.online_raw(3), "0\n");
  EXPECT_FALSE(b.is_online(3));
  EXPECT_TRUE(b.set_cpu_online(3, true));
  EXPECT_EQ(m.online_raw(3), "1\n");
  EXPECT_TRUE(b.is_online(3));
}

TEST(set_cpu_online, cpu0_offline_is_policy_error) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  EXPECT_THROW(b.set_cpu_online(0, false), PolicyError);
  EXPECT_EQ(m.online_raw(0), "1\n");
}

TEST(set_cpu_online, cpu0_without_switch_counts_as_online) {
  MockSysfs m(2);
  std::filesystem::remove(m.cpu_dir(0) / "online");
  SysfsBoard b(m.layout(), 2);
  EXPECT_TRUE(b.is_online(0));
  EXPECT_TRUE(b.set_cpu_online(0, true));
}

TEST(set_cpu_online, index_out_of_range) {
  MockSysfs m(4);
  SysfsBoard b(m.layout(), 4);
  EXPECT_THROW(b.set_cpu_online(4, true), InputError);
  EXPECT_THROW(b.set_cpu_online(-1, true), InputError);
}

TEST(set_cpu_online, missing_attribute_is_actuation_error) {
  MockSysfs m(4);
  std::filesystem::remove(m.cpu_dir(2) / "online");
  SysfsBoard b(m.layout(), 4);
  EXPECT_THROW(b.set_cpu_online(2, false), ActuationError);
  EXPECT_FALSE(std::filesystem::exists(m.cpu_dir(2) / "online"));
}

TEST(set_cpu_online, readback_mismatch_is_hardware_error) {
  MockSysfs m(4);
  // Writes to /dev/null succeed but read back empty.
  std::filesystem::remove(m.cpu_dir(2) / "online");
  std::filesystem::create_symlink("/dev/null", m.cpu_dir(2) / "online");
  SysfsBoard b(m.layout(), 4);
  EXPECT_THROW(b.set_cpu_online(2, false), HardwareError);
}

TEST(set_cpu_freq_level, pins_min_and_max_of_advertised_set) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  b.set_cpu_freq_level(5, FreqLevel::low);
  EXPECT_EQ(m.max_freq_raw(5), "1000000\n");
  b.set_cpu_freq_level(5, FreqLevel::high);
  EXPECT_EQ(m.max_freq_raw(5), "2000000\n");
}

TEST(set_cpu_freq_level, unsorted_list_uses_extremes) {
  MockSysfs m(2, 1, "1500000 2200000 800000");
  SysfsBoard b(m.layout(), 2);
  b.set_cpu_freq_level(1, FreqLevel::low);
  EXPECT_EQ(m.max_freq_raw(1), "800000\n");
  b.set_cpu_freq_level(1, FreqLevel::high);
  EXPECT_EQ(m.max_freq_raw(1), "2200000\n");
}

TEST(set_cpu_freq_level, falls_back_to_cpuinfo_range) {
  MockSysfs m(2);
  const auto dir = m.cpu_dir(1) / "cpufreq";
  std::filesystem::remove(dir / "scaling_available_frequencies");
  MockSysfs::put(dir / "cpuinfo_min_freq", "600000\n");
  MockSysfs::put(dir / "cpuinfo_max_freq", "1800000\n");
  SysfsBoard b(m.layout(), 2);
  b.set_cpu_freq_level(1, FreqLevel::low);
  EXPECT_EQ(m.max_freq_raw(1), "600000\n");
}

TEST(set_cpu_freq_level, offline_cpu_is_usage_error) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  b.set_cpu_online(7, false);
  EXPECT_THROW(b.set_cpu_freq_level(7, FreqLevel::high), UsageError);
}

TEST(initialize_governor, writes_performance) {
  MockSysfs m(4);
  SysfsBoard b(m.layout(), 4);
  EXPECT_EQ(b.initialize_governor(), 4);
  EXPECT_EQ(m.raw(m.cpu_dir(3) / "cpufreq/scaling_governor"), "performance\n");
}

TEST(read_temperature, millidegree_convention) {
  MockSysfs m(1, 1);
  m.set_temperature_milli(0, 48772);
  SysfsBoard b(m.layout(), 1);
  EXPECT_DOUBLE_EQ(b.read_temperature().aggregate, 48.772);
  m.set_temperature_milli(0, 0);
  EXPECT_DOUBLE_EQ(b.read_temperature().aggregate, 0.0);
}

TEST(read_temperature, aggregate_is_max) {
  MockSysfs m(1, 2);
  m.set_temperature_milli(0, 50000);
  m.set_temperature_milli(1, 55000);
  SysfsBoard b(m.layout(), 1);
  const TemperatureReading r = b.read_temperature();
  EXPECT_DOUBLE_EQ(r.aggregate, 55.0);
  ASSERT_EQ(r.sensors.size(), 2u);
  EXPECT_DOUBLE_EQ(*r.sensors[0], 50.0);
}

TEST(read_temperature, unreadable_sensor_excluded_all_unreadable_errors) {
  MockSysfs m(1, 3);
  m.set_temperature_milli(0, 41000);
  MockSysfs::put(m.zone_dir(1) / "temp", "garbage\n");
  std::filesystem::remove(m.zone_dir(2) / "temp");
  SysfsBoard b(m.layout(), 1);
  const TemperatureReading r = b.read_temperature();
  EXPECT_DOUBLE_EQ(r.aggregate, 41.0);
  EXPECT_FALSE(r.sensors[1].has_value());
  EXPECT_FALSE(r.sensors[2].has_value());
  std::filesystem::remove(m.zone_dir(0) / "temp");
  EXPECT_THROW(b.read_temperature(), SensorError);
}

TEST(read_temperature, negative_millidegrees) {
  MockSysfs m(1, 1);
  m.set_temperature_milli(0, -5250);
  SysfsBoard b(m.layout(), 1);
  EXPECT_DOUBLE_EQ(b.read_temperature().aggregate, -5.25);
}

TEST(read_temperature, aggregate_dominates_every_sensor_property) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<long> t(-10000, 120000);
  MockSysfs m(1, 9);
  SysfsBoard b(m.layout(), 1);
  for (int trial = 0; trial < 50; ++trial) {
    for (int z = 0; z < 9; ++z) m.set_temperature_milli(z, t(rng));
    const TemperatureReading r = b.read_temperature();
    for (const auto& s : r.sensors) EXPECT_GE(r.aggregate, *s);
  }
}

TEST(apply_command, all_on_all_high) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  const ApplyReport r = b.apply_command({16, 16});
  EXPECT_EQ(r.applied, (env::BoardState{16, 16, 0, 0}));
  EXPECT_EQ(board_picture(m, 16), std::vector<int>(16, 1));
}

TEST(apply_command, zero_on_clamps_to_cpu0_low) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  const ApplyReport r = b.apply_command({0, 0});
  EXPECT_TRUE(r.clamped);
  EXPECT_EQ(r.effective, (env::ActionCommand{1, 0}));
  EXPECT_EQ(r.applied, (env::BoardState{16, 0, 1, 15}));
  std::vector<int> want(16, -1);
  want[0] = 0;
  EXPECT_EQ(board_picture(m, 16), want);
}

TEST(apply_command, lowest_index_first) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  const ApplyReport r = b.apply_command({8, 4});
  EXPECT_FALSE(r.clamped);
  EXPECT_EQ(r.applied, (env::BoardState{16, 4, 4, 8}));
  const std::vector<int> want{1, 1, 1, 1, 0, 0, 0, 0, -1, -1, -1, -1, -1, -1, -1, -1};
  EXPECT_EQ(board_picture(m, 16), want);
}

TEST(apply_command, idempotent) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  b.apply_command({5, 2});
  const auto first = board_picture(m, 16);
  const ApplyReport r = b.apply_command({5, 2});
  EXPECT_EQ(board_picture(m, 16), first);
  EXPECT_TRUE(r.failures.empty());
}

TEST(apply_command, invalid_command_rejected) {
  MockSysfs m(4);
  SysfsBoard b(m.layout(), 4);
  EXPECT_THROW(b.apply_command({2, 3}), InputError);
  EXPECT_THROW(b.apply_command({5, 0}), InputError);
}

TEST(apply_command, postcondition_property_over_random_commands) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> on(0, 16);
  for (int trial = 0; trial < 100; ++trial) {
    const int k_on = on(rng);
    const int k_high = std::uniform_int_distribution<int>(0, k_on)(rng);
    const ApplyReport r = b.apply_command({k_on, k_high});
    const int eff_on = std::max(k_on, 1);
    const auto pic = board_picture(m, 16);
    for (int cpu = 0; cpu < 16; ++cpu) {
      EXPECT_EQ(pic[cpu] >= 0, cpu < eff_on) << "cpu" << cpu;
      EXPECT_EQ(pic[cpu] == 1, cpu < k_high) << "cpu" << cpu;
    }
    EXPECT_EQ(r.applied.cpus_on(), eff_on);
    EXPECT_EQ(r.applied.cpus_high, k_high);
  }
}

TEST(apply_command, partial_failure_rolls_forward) {
  MockSysfs m(6);
  std::filesystem::remove(m.cpu_dir(4) / "online");  // cpu4 cannot be switched
  SysfsBoard b(m.layout(), 6);
  const ApplyReport r = b.apply_command({2, 1});
  EXPECT_EQ(r.failures.size(), 1u);
  // Everything else still happened.
  EXPECT_EQ(m.online_raw(5), "0\n");
  EXPECT_EQ(m.online_raw(3), "0\n");
  EXPECT_EQ(m.max_freq_raw(0), "2000000\n");
  EXPECT_EQ(m.max_freq_raw(1), "1000000\n");
  EXPECT_EQ(r.applied.cpus_on(), 3);  // cpu4 state unknown, counted hot
}

TEST(safety_config, validation) {
  SafetyConfig c;
  EXPECT_NO_THROW(c.validate(55.0));
  EXPECT_THROW(c.validate(60.0), ConfigError);
  c.hysteresis = 0.0;
  EXPECT_THROW(c.validate(55.0), ConfigError);
  c = SafetyConfig{};
  c.poll_interval = 0.0;
  EXPECT_THROW(c.validate(55.0), ConfigError);
}

TEST(safety_guard, rule_examples) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  SafetyGuard g(b, SafetyConfig{});
  b.apply_command({16, 16});

  m.set_temperature(59.9);
  EXPECT_EQ(g.poll(), GuardState::armed);
  EXPECT_EQ(board_picture(m, 16), std::vector<int>(16, 1));

  m.set_temperature(61.0);
  EXPECT_EQ(g.poll(), GuardState::tripped);
  std::vector<int> safe(16, -1);
  safe[0] = 0;
  EXPECT_EQ(board_picture(m, 16), safe);
  EXPECT_THROW(g.submit({16, 16}), SafetyTripped);
  EXPECT_EQ(board_picture(m, 16), safe);

  m.set_temperature(55.1);
  EXPECT_EQ(g.poll(), GuardState::tripped);
  m.set_temperature(54.9);
  EXPECT_EQ(g.poll(), GuardState::armed);
  EXPECT_NO_THROW(g.submit({4, 4}));
  EXPECT_EQ(board_picture(m, 16)[3], 1);
  EXPECT_EQ(g.trip_count(), 1u);
}

TEST(safety_guard, trips_exactly_at_hard_limit_and_unlatches_at_boundary) {
  MockSysfs m(2);
  SysfsBoard b(m.layout(), 2);
  SafetyGuard g(b, SafetyConfig{});
  m.set_temperature(60.0);
  EXPECT_EQ(g.poll(), GuardState::tripped);
  m.set_temperature(55.0);
  EXPECT_EQ(g.poll(), GuardState::armed);
}

TEST(safety_guard, unreadable_sensors_trip) {
  MockSysfs m(2);
  SysfsBoard b(m.layout(), 2);
  SafetyGuard g(b, SafetyConfig{});
  std::filesystem::remove(m.zone_dir(0) / "temp");
  EXPECT_EQ(g.poll(), GuardState::tripped);
}

TEST(safety_guard, failure_to_force_safe_state_is_fatal) {
  MockSysfs m(3);
  std::filesystem::remove(m.cpu_dir(2) / "online");
  SysfsBoard b(m.layout(), 3);
  SafetyGuard g(b, SafetyConfig{});
  m.set_temperature(70.0);
  EXPECT_THROW(g.poll(), SafetyFatal);
}

TEST(safety_guard, latch_property_over_scripted_traces) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> temp(45.0, 70.0);
  std::uniform_int_distribution<int> on(0, 16);
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  SafetyGuard g(b, SafetyConfig{});
  bool latched = false;
  for (int k = 0; k < 400; ++k) {
    const double t = std::round(temp(rng) * 10.0) / 10.0;
    m.set_temperature(t);
    g.poll();
    if (t >= 60.0) latched = true;
    if (t <= 55.0) latched = false;
    ASSERT_EQ(g.tripped(), latched) << "step " << k << " T=" << t;

    const auto before = board_picture(m, 16);
    const int k_on = on(rng);
    if (latched) {
      EXPECT_THROW(g.submit({k_on, 0}), SafetyTripped);
      EXPECT_EQ(board_picture(m, 16), before);
    } else {
      EXPECT_NO_THROW(g.submit({k_on, 0}));
    }
  }
}

TEST(safety_guard, background_thread_trips_within_poll_interval) {
  MockSysfs m;
  SysfsBoard b(m.layout(), 16);
  SafetyConfig c;
  c.poll_interval = 0.05;
  SafetyGuard g(b, c);
  g.start();
  m.set_temperature(61.0);
  const auto t0 = std::chrono::steady_clock::now();
  while (!g.tripped() && std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  const double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_TRUE(g.tripped());
  EXPECT_LE(waited, 2 * c.poll_interval);
  g.stop();
  EXPECT_FALSE(g.running());
}

TEST(safety_guard, trip_stops_load) {
  MockSysfs m(2);
  SysfsBoard b(m.layout(), 2);
  LoadController load({"sleep", "1000"});
  load.start();
  SafetyGuard g(b, SafetyConfig{}, &load);
  m.set_temperature(65.0);
  g.poll();
  EXPECT_FALSE(load.running());
}

TEST(load_controller, lifecycle) {
  LoadController load({"sleep", "1000"});
  EXPECT_FALSE(load.running());
  EXPECT_NO_THROW(load.stop());
  load.start();
  ASSERT_TRUE(load.pid().has_value());
  EXPECT_EQ(::kill(*load.pid(), 0), 0);
  EXPECT_TRUE(load.running());
  EXPECT_THROW(load.start(), UsageError);
  const pid_t pid = *load.pid();
  load.stop();
  EXPECT_FALSE(load.running());
  EXPECT_NE(::kill(pid, 0), 0);
}

TEST(load_controller, spawn_failure_is_environment_error) {
  LoadController load({"/nonexistent/aptc-load-generator"});
  EXPECT_THROW(load.start(), EnvironmentError);
  LoadController empty({});
  EXPECT_THROW(empty.start(), EnvironmentError);
}

TEST(load_controller, restart_after_exit) {
  LoadController load({"true"});
  load.start();
  for (int k = 0; k < 200 && load.running(); ++k) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  EXPECT_FALSE(load.running());
  EXPECT_NO_THROW(load.start());
}
