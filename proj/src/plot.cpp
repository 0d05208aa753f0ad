#include "plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace entroflow::plot {
namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1-2-5 tick step covering the range in about five intervals.
double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string render(const Chart& c) {
  const double inf = std::numeric_limits<double>::infinity();
  double x0 = inf, x1 = -inf, y0 = inf, y1 = -inf;
  auto tx = [&](double x) { return c.log_x ? std::log10(x) : x; };
  for (const auto& s : c.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (c.log_x && !(s.x[i] > 0.0))) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (c.guide) {
    y0 = std::min(y0, *c.guide);
    y1 = std::max(y1, *c.guide);
  }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
  if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12 * std::max(1.0, std::abs(y0))) y0 -= 0.5e-3 * std::max(1.0, std::abs(y0)), y1 = y0 + 1e-3 * std::max(1.0, std::abs(y0));
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (y1 - y) / (y1 - y0) * ph; };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt("%.1f", kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(c.title) + "</text>\n";
  svg += "<rect x=\"" + fmt("%.1f", kLeft) + "\" y=\"" + fmt("%.1f", kTop) + "\" width=\"" + fmt("%.1f", pw) + "\" height=\"" +
         fmt("%.1f", ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  const double ys = nice_step(y1 - y0);
  for (double t = std::ceil(y0 / ys) * ys; t <= y1; t += ys) {
    const double v = std::abs(t) < 1e-9 * ys ? 0.0 : t;
    svg += "<line x1=\"" + fmt("%.1f", kLeft - 4) + "\" x2=\"" + fmt("%.1f", kLeft) + "\" y1=\"" + fmt("%.2f", py(v)) + "\" y2=\"" +
           fmt("%.2f", py(v)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", kLeft - 6) + "\" y=\"" + fmt("%.2f", py(v) + 4) + "\" text-anchor=\"end\">" + fmt("%.4g", v) + "</text>\n";
  }
  const double xs = nice_step(x1 - x0);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1; t += xs) {
    const double v = std::abs(t) < 1e-9 * xs ? 0.0 : t;
    const double X = kLeft + (v - x0) / (x1 - x0) * pw;
    svg += "<line x1=\"" + fmt("%.2f", X) + "\" x2=\"" + fmt("%.2f", X) + "\" y1=\"" + fmt("%.1f", kTop + ph) + "\" y2=\"" +
           fmt("%.1f", kTop + ph + 4) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt("%.2f", X) + "\" y=\"" + fmt("%.1f", kTop + ph + 18) + "\" text-anchor=\"middle\">" +
           fmt("%.4g", c.log_x ? std::pow(10.0, v) : v) + "</text>\n";
  }
  svg += "<text x=\"" + fmt("%.1f", kLeft + pw / 2) + "\" y=\"" + fmt("%.1f", kH - 10) + "\" text-anchor=\"middle\">" + escape(c.x_label) + "</text>\n";
  svg += "<text transform=\"translate(16," + fmt("%.1f", kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" + escape(c.y_label) + "</text>\n";

  if (c.guide) {
    svg += "<line x1=\"" + fmt("%.1f", kLeft) + "\" x2=\"" + fmt("%.1f", kLeft + pw) + "\" y1=\"" + fmt("%.2f", py(*c.guide)) + "\" y2=\"" +
           fmt("%.2f", py(*c.guide)) + "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
  }

  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const auto& s = c.series[k];
    const char* color = kColors[k % kColors.size()];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (c.log_x && !(s.x[i] > 0.0))) {
        flush();
        continue;
      }
      pts += fmt("%.2f", px(s.x[i])) + "," + fmt("%.2f", py(s.y[i])) + " ";
      if (s.markers)
        svg += "<circle cx=\"" + fmt("%.2f", px(s.x[i])) + "\" cy=\"" + fmt("%.2f", py(s.y[i])) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    flush();
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + fmt("%.1f", kW - kRight + 12) + "\" x2=\"" + fmt("%.1f", kW - kRight + 32) + "\" y1=\"" + fmt("%.1f", ly) +
           "\" y2=\"" + fmt("%.1f", ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", kW - kRight + 36) + "\" y=\"" + fmt("%.1f", ly + 4) + "\">" + escape(s.name) + "</text>\n";
  }
  if (c.guide && !c.guide_label.empty()) {
    const double ly = kTop + 14 + 18 * static_cast<double>(c.series.size());
    svg += "<line x1=\"" + fmt("%.1f", kW - kRight + 12) + "\" x2=\"" + fmt("%.1f", kW - kRight + 32) + "\" y1=\"" + fmt("%.1f", ly) +
           "\" y2=\"" + fmt("%.1f", ly) + "\" stroke=\"gray\" stroke-dasharray=\"5,4\"/>\n";
    svg += "<text x=\"" + fmt("%.1f", kW - kRight + 36) + "\" y=\"" + fmt("%.1f", ly + 4) + "\">" + escape(c.guide_label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace entroflow::plot
