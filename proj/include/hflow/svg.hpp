#pragma once

#include <string>
#include <utility>
#include <vector>

namespace hflow {

struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

// Minimal self-contained line plot (fixed canvas, linear axes, legend).
// Deterministic output: fixed-precision coordinates, no timestamps.
std::string render_svg_lines(const std::string& title, const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<SvgSeries>& series, bool log_y = false);

} // namespace hflow
