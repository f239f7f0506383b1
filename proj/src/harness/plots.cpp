#include "aptc/harness/plots.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "aptc/errors.hpp"
#include "aptc/harness/metrics.hpp"

namespace fs = std::filesystem;

namespace aptc::harness {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range pad(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double margin = 0.05 * (hi - lo);
  return {lo - margin, hi + margin};
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const Series& s : spec.series) {
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
    for (double v : s.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
  }
  if (spec.reference_y) ylo = std::min(ylo, *spec.reference_y), yhi = std::max(yhi, *spec.reference_y);
  if (!std::isfinite(xlo)) xlo = 0.0, xhi = 1.0;
  if (!std::isfinite(ylo)) ylo = 0.0, yhi = 1.0;
  const Range xr = pad(xlo, xhi);
  const Range yr = pad(ylo, yhi);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight, kWidth, kHeight);
  svg += fmt::format("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
  svg += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", kWidth / 2,
                     escape(spec.title));
  svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"black\"/>\n",
                     kLeft, kTop, pw, ph);
  for (int t = 0; t <= 5; ++t) {
    const double xv = xr.lo + (xr.hi - xr.lo) * t / 5.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * t / 5.0;
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", px(xv),
                       kTop + ph, kTop + ph + 5);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.4g}</text>\n", px(xv),
                       kTop + ph + 18, xv);
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n",
                       kLeft - 5, py(yv), kLeft);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n", kLeft - 8, py(yv) + 4, yv);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                     kHeight - 12, escape(spec.x_label));
  svg += fmt::format("<text x=\"16\" y=\"{0:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
                     kTop + ph / 2, escape(spec.y_label));
  if (spec.reference_y) {
    const double y = py(*spec.reference_y);
    svg += fmt::format(
        "<line class=\"reference\" x1=\"{:.1f}\" y1=\"{:.2f}\" x2=\"{:.1f}\" y2=\"{:.2f}\" stroke=\"gray\" "
        "stroke-dasharray=\"6 4\" data-value=\"{}\"/>\n",
        kLeft, y, kLeft + pw, y, *spec.reference_y);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.2f}\" text-anchor=\"end\" fill=\"gray\">{}</text>\n", kLeft + pw - 4,
                       y - 4, escape(spec.reference_label));
  }
  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const Series& s = spec.series[i];
    std::string points;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (k > 0) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", px(s.x[k]), py(s.y[k]));
    }
    svg += fmt::format("<polyline class=\"series\" data-label=\"{}\" data-points=\"{}\" fill=\"none\" stroke=\"{}\" "
                       "stroke-width=\"1.5\" points=\"{}\"/>\n",
                       escape(s.label), s.x.size(), kColors[i % 4], points);
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_table(const PlotSpec& spec) {
  std::string out = fmt::format("# {}\n", spec.title);
  if (spec.reference_y) out += fmt::format("# reference {} {}\n", spec.reference_label, *spec.reference_y);
  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const Series& s = spec.series[i];
    if (i > 0) out += "\n";
    out += fmt::format("# series {}\n# {} {}\n", s.label, spec.x_label, spec.y_label);
    for (std::size_t k = 0; k < s.x.size(); ++k) out += fmt::format("{} {}\n", s.x[k], s.y[k]);
  }
  return out;
}

PlotReport emit_plots(const fs::path& metrics, const fs::path& out_dir, std::optional<std::int64_t> trace_episode,
                      double default_t_limit) {
  const std::vector<MetricsRow> rows = read_metrics(metrics);
  const std::vector<EpisodeStats> episodes = summarize_episodes(rows);
  fs::create_directories(out_dir);
  PlotReport report;
  report.episodes = episodes.size();
  report.empty = rows.empty();
  if (report.empty) spdlog::warn("{} holds no rows; writing empty plots", metrics.string());

  PlotSpec lengths{"Episode length during training", "episode", "length (steps)", {{"length", {}, {}}}, {}, {}};
  for (const EpisodeStats& e : episodes) {
    lengths.series[0].x.push_back(static_cast<double>(e.episode));
    lengths.series[0].y.push_back(static_cast<double>(e.length));
  }

  // margin = t_limit - T on every row, so the limit is recoverable from the data.
  const double t_limit = rows.empty() ? default_t_limit : rows.front().temperature_C + rows.front().margin_C;
  if (!trace_episode && !episodes.empty()) trace_episode = episodes.back().episode;
  if (trace_episode && std::none_of(episodes.begin(), episodes.end(),
                                    [&](const EpisodeStats& e) { return e.episode == *trace_episode; })) {
    throw InputError("episode " + std::to_string(*trace_episode) + " is not in " + metrics.string());
  }
  report.trace_episode = trace_episode.value_or(0);
  PlotSpec trace{fmt::format("Temperature trace, episode {}", report.trace_episode),
                 "step",
                 "temperature (C)",
                 {{"temperature", {}, {}}},
                 t_limit,
                 fmt::format("limit {} C", t_limit)};
  for (const MetricsRow& r : rows) {
    if (r.episode != report.trace_episode) continue;
    trace.series[0].x.push_back(static_cast<double>(r.step));
    trace.series[0].y.push_back(r.temperature_C);
  }

  report.lengths_svg = out_dir / "episode_lengths.svg";
  report.lengths_table = out_dir / "episode_lengths.dat";
  report.trace_svg = out_dir / "temperature_trace.svg";
  report.trace_table = out_dir / "temperature_trace.dat";
  write_file(report.lengths_svg, render_svg(lengths));
  write_file(report.lengths_table, render_table(lengths));
  write_file(report.trace_svg, render_svg(trace));
  write_file(report.trace_table, render_table(trace));
  return report;
}

}  // namespace aptc::harness
