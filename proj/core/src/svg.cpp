#include "ctxsim/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ctxsim {

void write_scatter_svg(const Matrix& points, const std::vector<int>& labels,
                       const std::string& path, const std::string& title) {
  if (points.cols() != 2) {
    throw std::invalid_argument("write_scatter_svg: points must be m x 2, got " +
                                shape_str(points));
  }
  if (static_cast<int>(labels.size()) != points.rows()) {
    throw std::invalid_argument("write_scatter_svg: label count mismatch");
  }
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("write_scatter_svg: negative label");
  }
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                  "#59a14f", "#edc948", "#b07aa1", "#9c755f"};
  constexpr int kPaletteSize = 8;

  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
  for (int i = 0; i < points.rows(); ++i) {
    if (i == 0) {
      min_x = max_x = points(0, 0);
      min_y = max_y = points(0, 1);
    } else {
      min_x = std::min(min_x, points(i, 0));
      max_x = std::max(max_x, points(i, 0));
      min_y = std::min(min_y, points(i, 1));
      max_y = std::max(max_y, points(i, 1));
    }
  }
  double span = std::max({max_x - min_x, max_y - min_y, 1e-9});
  double margin = 0.08 * span;
  double lo_x = min_x - margin, lo_y = min_y - margin;
  double scale = 480.0 / (span + 2.0 * margin);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_scatter_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"520\" "
         "viewBox=\"0 0 520 520\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"520\" height=\"520\" fill=\"white\"/>\n";
  if (!title.empty()) {
    out << "<text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << title
        << "</text>\n";
  }
  out << "<g transform=\"translate(20,20)\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"480\" height=\"480\" fill=\"none\" "
         "stroke=\"#888\" stroke-width=\"1\"/>\n";
  char buf[160];
  for (int i = 0; i < points.rows(); ++i) {
    double px = (points(i, 0) - lo_x) * scale;
    double py = 480.0 - (points(i, 1) - lo_y) * scale;  // y grows upward
    const char* color = palette[labels[i] % kPaletteSize];
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\" fill-opacity=\"0.75\"/>\n",
                  px, py, color);
    out << buf;
  }
  out << "</g>\n</svg>\n";
  if (!out) throw std::runtime_error("write_scatter_svg: write failed for " + path);
}

}  // namespace ctxsim
