#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace aenc::cli {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series, std::optional<double> marker_x = {});

/// Mirrored Gaussian kernel density per group, with the median marked.
std::string svg_violin_plot(const std::string& title, const std::vector<std::pair<std::string, std::vector<double>>>& groups);

struct GridCell {
  std::string label;
  double value = 0.0;
  bool flagged = false;
};

/// Targets laid out on a square grid, colored on a diverging scale; flagged cells get a heavy border.
std::string svg_grid_map(const std::string& title, const std::vector<GridCell>& cells);

struct ReportFile {
  std::string name;
  std::string content;
};

/// Every report file for the JSON results found in `results_dir`. Throws DataError when there are none.
std::vector<ReportFile> render_report(const std::filesystem::path& results_dir);

}  // namespace aenc::cli
