#pragma once

// Per-step metrics log in CSV. Reals are written in shortest round-trip form so
// identical runs give identical files and a reader recovers the exact values.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aptc/environment.hpp"

namespace aptc::harness {

inline constexpr const char* kMetricsHeader =
    "episode,step,wall_time_s,temperature_C,margin_C,slope,p_norm,cpus_on,cpus_high,reward,event";

struct MetricsRow {
  std::int64_t episode = 0;
  std::int64_t step = 0;
  double wall_time_s = 0.0;
  double temperature_C = 0.0;
  double margin_C = 0.0;
  double slope = 0.0;
  double p_norm = 0.0;
  int cpus_on = 0;
  int cpus_high = 0;
  double reward = 0.0;
  env::StepEvent event = env::StepEvent::none;

  bool operator==(const MetricsRow&) const = default;
};

std::string format_row(const MetricsRow& row);

class MetricsWriter {
 public:
  /// `append` keeps an existing file and only writes the header if it is empty.
  /// Throws EnvironmentError when the file cannot be opened.
  MetricsWriter(const std::filesystem::path& path, bool append);
  void write(const MetricsRow& row);
  void flush();
  std::uint64_t rows_written() const { return rows_; }

 private:
  std::ofstream out_;
  std::uint64_t rows_ = 0;
};

/// Throws ParseError naming the line for a bad header or malformed row, and
/// LoadError if the file cannot be opened. An empty file yields no rows.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

struct EpisodeStats {
  std::int64_t episode = 0;
  std::int64_t length = 0;
  double total_reward = 0.0;
  env::StepEvent end_event = env::StepEvent::none;
  double final_temperature = 0.0;
  std::int64_t final_step = 0;
};

/// Groups rows by episode in file order.
std::vector<EpisodeStats> summarize_episodes(const std::vector<MetricsRow>& rows);

}  // namespace aptc::harness
