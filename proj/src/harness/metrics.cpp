#include "aptc/harness/metrics.hpp"

#include <fmt/format.h>

#include <charconv>
#include <sstream>

#include "aptc/errors.hpp"

namespace aptc::harness {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line, const char* column) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("metrics line " + std::to_string(line) + ": bad " + column + " '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_row(const MetricsRow& r) {
  return fmt::format("{},{},{:.3f},{},{},{},{},{},{},{},{}", r.episode, r.step, r.wall_time_s, r.temperature_C,
                     r.margin_C, r.slope, r.p_norm, r.cpus_on, r.cpus_high, r.reward, env::to_string(r.event));
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw EnvironmentError("cannot open metrics file " + path.string());
  if (fresh) out_ << kMetricsHeader << '\n';
}

void MetricsWriter::write(const MetricsRow& row) {
  out_ << format_row(row) << '\n';
  ++rows_;
}

void MetricsWriter::flush() { out_.flush(); }

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open metrics file " + path.string());
  std::vector<MetricsRow> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1) {
      if (line != kMetricsHeader) throw ParseError("metrics line 1: unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line);
    if (f.size() != 11) {
      throw ParseError("metrics line " + std::to_string(number) + ": expected 11 fields, got " +
                       std::to_string(f.size()));
    }
    MetricsRow r;
    r.episode = parse_number<std::int64_t>(f[0], number, "episode");
    r.step = parse_number<std::int64_t>(f[1], number, "step");
    r.wall_time_s = parse_number<double>(f[2], number, "wall_time_s");
    r.temperature_C = parse_number<double>(f[3], number, "temperature_C");
    r.margin_C = parse_number<double>(f[4], number, "margin_C");
    r.slope = parse_number<double>(f[5], number, "slope");
    r.p_norm = parse_number<double>(f[6], number, "p_norm");
    r.cpus_on = parse_number<int>(f[7], number, "cpus_on");
    r.cpus_high = parse_number<int>(f[8], number, "cpus_high");
    r.reward = parse_number<double>(f[9], number, "reward");
    const auto event = env::step_event_from_string(f[10]);
    if (!event) throw ParseError("metrics line " + std::to_string(number) + ": bad event '" + f[10] + "'");
    r.event = *event;
    if (!rows.empty()) {
      const MetricsRow& p = rows.back();
      if (r.episode < p.episode || (r.episode == p.episode && r.step <= p.step)) {
        throw ParseError("metrics line " + std::to_string(number) + ": (episode, step) not increasing");
      }
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<EpisodeStats> summarize_episodes(const std::vector<MetricsRow>& rows) {
  std::vector<EpisodeStats> out;
  for (const MetricsRow& r : rows) {
    if (out.empty() || out.back().episode != r.episode) {
      out.push_back({});
      out.back().episode = r.episode;
    }
    EpisodeStats& e = out.back();
    ++e.length;
    e.total_reward += r.reward;
    e.end_event = r.event;
    e.final_temperature = r.temperature_C;
    e.final_step = r.step;
  }
  return out;
}

}  // namespace aptc::harness
