#pragma once

#include <string>
#include <vector>

namespace nvcalib::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color = "#1f6fb2";
};

struct PlotOptions {
  int width = 720;
  int height = 420;
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

/// Static line plot as a standalone SVG document. Intended for quick-look
/// artifacts next to the CSV exports, not for publication polish.
std::string line_plot(const std::vector<Series>& series,
                      const PlotOptions& options);

}  // namespace nvcalib::svg
