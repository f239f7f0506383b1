#pragma once

// Post-hoc plot documents from a metrics file: SVG figures with companion
// whitespace-separated data tables.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aptc::harness {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> reference_y;  // horizontal dashed line
  std::string reference_label;
};

/// Standalone SVG. Axis ranges cover every point and the reference line.
std::string render_svg(const PlotSpec& spec);
/// Header line "# x y" per series block, blocks separated by a blank line.
std::string render_table(const PlotSpec& spec);

struct PlotReport {
  std::filesystem::path lengths_svg;
  std::filesystem::path lengths_table;
  std::filesystem::path trace_svg;
  std::filesystem::path trace_table;
  std::size_t episodes = 0;
  std::int64_t trace_episode = 0;  // 0 when there was nothing to trace
  bool empty = false;
};

/// Episode-length curve over all episodes and the temperature trace of
/// `trace_episode` (default: the last one). Throws ParseError with the line
/// number for malformed metrics; empty metrics give empty plots and a warning.
PlotReport emit_plots(const std::filesystem::path& metrics, const std::filesystem::path& out_dir,
                      std::optional<std::int64_t> trace_episode = std::nullopt, double default_t_limit = 55.0);

}  // namespace aptc::harness
