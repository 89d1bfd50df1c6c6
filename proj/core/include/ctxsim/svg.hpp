#pragma once

#include <string>
#include <vector>

#include "ctxsim/matrix.hpp"

namespace ctxsim {

// Scatter plot of 2-D points colored by label, written as a standalone SVG.
// Points must be m x 2; the view box fits the data with a small margin.
void write_scatter_svg(const Matrix& points, const std::vector<int>& labels,
                       const std::string& path, const std::string& title = "");

}  // namespace ctxsim
