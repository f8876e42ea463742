// Copyright 2026 The dpchaos Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal static SVG line plots and histograms.

#ifndef DPCHAOS_TOOLS_SVG_HPP
#define DPCHAOS_TOOLS_SVG_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace dpchaos::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
  bool points = false;  // markers instead of a polyline
};

struct Axes {
  std::string title, xlabel, ylabel;
  bool log_x = false;
};

namespace detail {

inline constexpr double kW = 640, kH = 420, kL = 70, kR = 20, kT = 40, kB = 55;
inline const char* const kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Frame {
  double x0, x1, y0, y1;
  bool log_x;
  double px(double x) const {
    const double a = log_x ? std::log10(x) : x, lo = log_x ? std::log10(x0) : x0, hi = log_x ? std::log10(x1) : x1;
    return kL + (a - lo) / (hi - lo) * (kW - kL - kR);
  }
  double py(double y) const { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); }
};

inline void pad(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
    return;
  }
  const double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

inline void frame_svg(std::ostringstream& os, const Frame& f, const Axes& a) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(a.title)
     << "</text>\n"
     << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\""
     << kH - kT - kB << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double u = i / 4.0;
    const double xv = f.log_x ? std::pow(10.0, std::log10(f.x0) + u * (std::log10(f.x1) - std::log10(f.x0)))
                              : f.x0 + u * (f.x1 - f.x0);
    const double yv = f.y0 + u * (f.y1 - f.y0);
    os << "<text x=\"" << f.px(xv) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">" << num(xv)
       << "</text>\n"
       << "<text x=\"" << kL - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">"
     << escape(a.xlabel) << "</text>\n"
     << "<text x=\"16\" y=\"" << (kT + kH - kB) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (kT + kH - kB) / 2 << ")\">" << escape(a.ylabel) << "</text>\n";
}

inline void legend(std::ostringstream& os, const std::vector<std::string>& names, std::size_t colour0 = 0) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kT + 16 + 16 * double(i);
    os << "<line x1=\"" << kW - kR - 150 << "\" y1=\"" << y - 4 << "\" x2=\"" << kW - kR - 130 << "\" y2=\""
       << y - 4 << "\" stroke=\"" << kColours[(i + colour0) % 6] << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << kW - kR - 125 << "\" y=\"" << y << "\">" << escape(names[i]) << "</text>\n";
  }
}

}  // namespace detail

inline std::string line_plot(const Axes& a, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || (a.log_x && !(s.x[i] > 0))) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 1, x1 = 2, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = a.log_x ? 2 * x0 : x0 + 1;
  detail::pad(y0, y1);
  const detail::Frame f{x0, x1, y0, y1, a.log_x};
  std::ostringstream os;
  detail::frame_svg(os, f, a);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* col = detail::kColours[k % 6];
    names.push_back(s.name);
    if (s.points) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.y[i]))
          os << "<circle cx=\"" << f.px(s.x[i]) << "\" cy=\"" << f.py(s.y[i]) << "\" r=\"3\" fill=\"" << col
             << "\"/>\n";
      continue;
    }
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.y[i])) os << f.px(s.x[i]) << ',' << f.py(s.y[i]) << ' ';
    os << "\"/>\n";
  }
  detail::legend(os, names);
  os << "</svg>\n";
  return os.str();
}

struct Histogram {
  double lo = 0, width = 1;
  std::vector<double> density;
};

inline Histogram make_histogram(const std::vector<double>& v, int bins) {
  Histogram h;
  if (v.empty() || bins < 1) return h;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  h.lo = *mn;
  h.width = *mx > *mn ? (*mx - *mn) / bins : 1.0;
  h.density.assign(std::size_t(bins), 0.0);
  for (double x : v) {
    const int b = std::min(bins - 1, int((x - h.lo) / h.width));
    h.density[std::size_t(b)] += 1.0;
  }
  for (double& d : h.density) d /= double(v.size()) * h.width;
  return h;
}

/// Density histogram with an optional reference density drawn on top.
inline std::string histogram_plot(const Axes& a, const Histogram& h, const std::function<double(double)>& ref,
                                  const std::string& ref_name) {
  const double x0 = h.lo, x1 = h.lo + h.width * double(std::max<std::size_t>(h.density.size(), 1));
  double y1 = 0;
  for (double d : h.density) y1 = std::max(y1, d);
  std::vector<double> rx, ry;
  if (ref) {
    for (int i = 0; i <= 200; ++i) {
      rx.push_back(x0 + (x1 - x0) * i / 200.0);
      ry.push_back(ref(rx.back()));
      y1 = std::max(y1, ry.back());
    }
  }
  const detail::Frame f{x0, x1, 0.0, y1 > 0 ? 1.05 * y1 : 1.0, false};
  std::ostringstream os;
  detail::frame_svg(os, f, a);
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    const double xa = f.px(h.lo + h.width * double(i)), xb = f.px(h.lo + h.width * double(i + 1));
    const double ya = f.py(h.density[i]);
    os << "<rect x=\"" << xa << "\" y=\"" << ya << "\" width=\"" << std::max(0.0, xb - xa - 0.5)
       << "\" height=\"" << f.py(0) - ya << "\" fill=\"#9ecae1\"/>\n";
  }
  if (ref) {
    os << "<polyline fill=\"none\" stroke=\"" << detail::kColours[1] << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < rx.size(); ++i) os << f.px(rx[i]) << ',' << f.py(ry[i]) << ' ';
    os << "\"/>\n";
    detail::legend(os, {ref_name}, 1);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace dpchaos::svg

#endif  // DPCHAOS_TOOLS_SVG_HPP
