#include "nvcalib/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace nvcalib::svg {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Round tick spacing to 1/2/5 times a power of ten.
std::vector<double> ticks(double lo, double hi, int target) {
  std::vector<double> out;
  if (!(hi > lo) || target < 2) return out;
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + 0.5 * step; t += step) out.push_back(t == 0.0 ? 0.0 : t);
  return out;
}

}  // namespace

std::string line_plot(const std::vector<Series>& series,
                      const PlotOptions& options) {
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  double y_lo = x_lo;
  double y_hi = -x_lo;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("series x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = options.log_y ? std::log10(std::max(s.y[i], 1e-300))
                                     : s.y[i];
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  if (!(x_hi >= x_lo) || !(y_hi >= y_lo))
    throw std::invalid_argument("nothing to plot");
  if (x_hi == x_lo) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi == y_lo) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double y_pad = 0.06 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  const int w = options.width;
  const int h = options.height;
  const double ml = 72, mr = 16, mt = options.title.empty() ? 14 : 34,
               mb = 46;
  const double pw = w - ml - mr;
  const double ph = h - mt - mb;
  const auto sx = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
  const auto sy = [&](double y) {
    const double v = options.log_y ? std::log10(std::max(y, 1e-300)) : y;
    return mt + (y_hi - v) / (y_hi - y_lo) * ph;
  };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) +
         "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">\n";
  if (!options.title.empty())
    out += "<text x=\"" + fmt(ml + pw / 2) +
           "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" +
           escape(options.title) + "</text>\n";

  // Frame and grid.
  out += "<rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" +
         fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : ticks(x_lo, x_hi, 6)) {
    const double px = sx(t);
    out += "<line x1=\"" + fmt(px) + "\" y1=\"" + fmt(mt) + "\" x2=\"" +
           fmt(px) + "\" y2=\"" + fmt(mt + ph) +
           "\" stroke=\"#ddd\" stroke-width=\"0.7\"/>\n";
    out += "<text x=\"" + fmt(px) + "\" y=\"" + fmt(mt + ph + 16) +
           "\" text-anchor=\"middle\">" + fmt(t) + "</text>\n";
  }
  for (double t : ticks(y_lo, y_hi, 5)) {
    const double py = mt + (y_hi - t) / (y_hi - y_lo) * ph;
    const double shown = options.log_y ? std::pow(10.0, t) : t;
    out += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(py) + "\" x2=\"" +
           fmt(ml + pw) + "\" y2=\"" + fmt(py) +
           "\" stroke=\"#ddd\" stroke-width=\"0.7\"/>\n";
    out += "<text x=\"" + fmt(ml - 6) + "\" y=\"" + fmt(py + 4) +
           "\" text-anchor=\"end\">" + fmt(shown) + "</text>\n";
  }
  if (!options.x_label.empty())
    out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"" + fmt(h - 10.0) +
           "\" text-anchor=\"middle\">" + escape(options.x_label) +
           "</text>\n";
  if (!options.y_label.empty())
    out += "<text x=\"14\" y=\"" + fmt(mt + ph / 2) +
           "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           fmt(mt + ph / 2) + ")\">" + escape(options.y_label) + "</text>\n";

  // Data.
  for (const Series& s : series) {
    if (s.x.empty()) continue;
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += fmt(sx(s.x[i])) + "," + fmt(sy(s.y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + escape(s.color) +
           "\" stroke-width=\"1.4\" points=\"" + pts + "\"/>\n";
  }

  // Legend, top right inside the frame.
  double ly = mt + 16;
  for (const Series& s : series) {
    if (s.label.empty()) continue;
    const double lx = ml + pw - 150;
    out += "<line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
           fmt(lx + 22) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" +
           escape(s.color) + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + fmt(lx + 28) + "\" y=\"" + fmt(ly) + "\">" +
           escape(s.label) + "</text>\n";
    ly += 16;
  }
  out += "</g>\n</svg>\n";
  return out;
}

}  // namespace nvcalib::svg
