#pragma once

// Minimal deterministic SVG line charts for CLI reports.

#include <optional>
#include <string>
#include <vector>

namespace entroflow::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Horizontal guide line (a constant, not data).
  std::optional<double> guide;
  std::string guide_label;
  bool log_x = false;
};

/// Non-finite points are skipped and break the polyline.
std::string render(const Chart& chart);

}  // namespace entroflow::plot
