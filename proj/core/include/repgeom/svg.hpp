#pragma once

#include <optional>
#include <string>
#include <vector>

namespace repgeom::svg {

struct Series {
  std::string label;
  std::vector<std::optional<double>> y;
};

/// Line chart of several series over shared x positions. Each series is
/// scaled to its own [min, max] when `normalize` is set so that profiles with
/// different units can be overlaid.
std::string line_plot(const std::string& title, const std::vector<double>& x,
                      const std::vector<Series>& series, const std::string& x_label,
                      bool normalize = false, bool log2_x = false);

/// Square heatmap with values in [0, 1]; masked cells are drawn grey.
std::string heatmap(const std::string& title, const std::vector<int>& labels,
                    const std::vector<std::vector<std::optional<double>>>& values);

}  // namespace repgeom::svg
