#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace spectrack {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  bool log_y = false;  // non-positive values are dropped
};

// Standalone SVG: one polyline per series, 5 ticks per axis, legend in input order.
// Output bytes depend only on the inputs. Non-finite points are skipped.
void emit_svg_plot(const std::vector<PlotSeries>& series, const PlotOptions& options,
                   const std::filesystem::path& path);

}  // namespace spectrack
