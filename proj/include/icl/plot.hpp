#pragma once

#include <string>
#include <vector>

namespace icl {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;  // NaN points are skipped
};

/// Minimal standalone SVG line chart.
std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::vector<Series>& series);

}  // namespace icl
