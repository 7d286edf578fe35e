#pragma once

#include <array>
#include <string>
#include <vector>

#include "toolwatch/explain.hpp"

/// Self-contained SVG charts. Every data mark carries `data-*` attributes so tests and
/// scripts can read values back without rasterizing.
namespace toolwatch::svg {

struct LineSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

std::string line_chart(const std::vector<LineSeries>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label);

/// Horizontal bars; positive values are drawn green to the right, negative red to the left.
std::string signed_bar_chart(const std::vector<std::string>& names, const std::vector<double>& values,
                             const std::string& title);

/// Training cloud colored by label, queries as crosses, segments to chosen neighbors.
std::string neighbor_scatter(const explain::NeighborPlotData& data, const std::string& title);

}  // namespace toolwatch::svg
