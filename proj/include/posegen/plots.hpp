// Copyright 2026 The Posegen Authors.
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

// Small deterministic SVG charts: heatmap, bar chart with error bars, and
// line/histogram panels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace posegen::plots {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

/// CSV field, quoted when needed.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// Diverging blue-white-red color for v in [-1, 1].
inline std::string diverging(double v) {
  v = std::clamp(v, -1.0, 1.0);
  int r, g, b;
  if (v >= 0) {
    r = 255, g = static_cast<int>(255 * (1 - v)), b = static_cast<int>(255 * (1 - v));
  } else {
    r = static_cast<int>(255 * (1 + v)), g = static_cast<int>(255 * (1 + v)), b = 255;
  }
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

/// Heatmap of a matrix with values in [-1, 1], labeled rows and columns.
inline std::string heatmap_svg(const std::vector<std::vector<double>>& m, const std::vector<std::string>& row_labels,
                               const std::vector<std::string>& col_labels, const std::string& title) {
  const std::size_t n = m.size(), k = n ? m[0].size() : 0;
  const int cell = 48, left = 320, top = 60;
  const int w = left + static_cast<int>(k) * cell + 20, h = top + static_cast<int>(n) * cell + 20;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                  std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"20\" font-size=\"14\">" + escape(title) + "</text>\n";
  for (std::size_t j = 0; j < k; ++j) {
    const int x = left + static_cast<int>(j) * cell + cell / 2;
    s += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top - 8) + "\" text-anchor=\"middle\">" +
         escape(j < col_labels.size() ? col_labels[j] : std::to_string(j)) + "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int y = top + static_cast<int>(i) * cell;
    s += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
         "\" text-anchor=\"end\">" + escape(i < row_labels.size() ? row_labels[i] : std::to_string(i)) + "</text>\n";
    for (std::size_t j = 0; j < k; ++j) {
      const int x = left + static_cast<int>(j) * cell;
      s += "<rect class=\"cell\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
           std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" + diverging(m[i][j]) +
           "\"/>\n";
      s += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
           "\" text-anchor=\"middle\">" + fmt("%.2f", m[i][j]) + "</text>\n";
    }
  }
  return s + "</svg>\n";
}

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;  ///< half-width of the error bar
};

/// Vertical bars with symmetric error bars; y axis spans [y_min, y_max].
inline std::string bar_chart_svg(const std::vector<Bar>& bars, const std::string& title, double y_min, double y_max) {
  const int w = 120 + 110 * static_cast<int>(bars.size()), h = 360, left = 60, top = 40, plot_h = 260;
  auto ymap = [&](double v) { return top + plot_h * (1.0 - (std::clamp(v, y_min, y_max) - y_min) / (y_max - y_min)); };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                  std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"10\" y=\"20\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + std::to_string(left) + "\" y1=\"" + std::to_string(top) + "\" x2=\"" + std::to_string(left) +
       "\" y2=\"" + std::to_string(top + plot_h) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y_min + (y_max - y_min) * t / 4.0;
    s += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" + fmt("%.1f", ymap(v) + 4) + "\" text-anchor=\"end\">" +
         fmt("%.2f", v) + "</text>\n";
  }
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double x = left + 30 + 110.0 * static_cast<double>(i);
    const double y0 = ymap(std::max(0.0, y_min)), y1 = ymap(bars[i].value);
    s += "<rect class=\"bar\" x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", std::min(y0, y1)) +
         "\" width=\"60\" height=\"" + fmt("%.1f", std::abs(y0 - y1)) + "\" fill=\"#4c72b0\"/>\n";
    const double lo = ymap(bars[i].value - bars[i].error), hi = ymap(bars[i].value + bars[i].error);
    s += "<line class=\"errorbar\" x1=\"" + fmt("%.1f", x + 30) + "\" y1=\"" + fmt("%.1f", lo) + "\" x2=\"" +
         fmt("%.1f", x + 30) + "\" y2=\"" + fmt("%.1f", hi) + "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt("%.1f", x + 30) + "\" y=\"" + std::to_string(top + plot_h + 18) +
         "\" text-anchor=\"middle\">" + escape(bars[i].label) + "</text>\n";
    s += "<text x=\"" + fmt("%.1f", x + 30) + "\" y=\"" + fmt("%.1f", std::min(y1, hi) - 6) +
         "\" text-anchor=\"middle\">" + fmt("%.3f", bars[i].value) + "</text>\n";
  }
  return s + "</svg>\n";
}

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#000000";
};

struct Histogram {
  std::vector<double> edges;    ///< n + 1 bin edges
  std::vector<double> density;  ///< n normalized heights
  std::string color = "#999999";
};

/// One panel per entry: optional histogram underneath a line series.
inline std::string panels_svg(const std::vector<std::string>& titles, const std::vector<Series>& lines,
                              const std::vector<Histogram>& hists, double x_min, double x_max) {
  const std::size_t n = titles.size();
  const int pw = 300, ph = 220, pad = 40;
  const int w = static_cast<int>(n) * (pw + pad) + pad, h = ph + 2 * pad + 20;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
                  std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < n; ++p) {
    const double ox = pad + static_cast<double>(p) * (pw + pad), oy = pad;
    double ymax = 1e-12;
    if (p < lines.size())
      for (double v : lines[p].y) ymax = std::max(ymax, v);
    if (p < hists.size())
      for (double v : hists[p].density) ymax = std::max(ymax, v);
    ymax *= 1.05;
    auto X = [&](double v) { return ox + pw * (v - x_min) / (x_max - x_min); };
    auto Y = [&](double v) { return oy + ph * (1.0 - v / ymax); };
    s += "<text x=\"" + fmt("%.1f", ox) + "\" y=\"" + fmt("%.1f", oy - 10) + "\">" + escape(titles[p]) + "</text>\n";
    s += "<rect x=\"" + fmt("%.1f", ox) + "\" y=\"" + fmt("%.1f", oy) + "\" width=\"" + std::to_string(pw) +
         "\" height=\"" + std::to_string(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    if (p < hists.size()) {
      const auto& hg = hists[p];
      for (std::size_t b = 0; b + 1 < hg.edges.size(); ++b) {
        const double x0 = X(std::max(hg.edges[b], x_min)), x1 = X(std::min(hg.edges[b + 1], x_max));
        if (x1 <= x0) continue;
        s += "<rect class=\"hist\" x=\"" + fmt("%.2f", x0) + "\" y=\"" + fmt("%.2f", Y(hg.density[b])) +
             "\" width=\"" + fmt("%.2f", x1 - x0) + "\" height=\"" + fmt("%.2f", oy + ph - Y(hg.density[b])) +
             "\" fill=\"" + hg.color + "\" fill-opacity=\"0.6\"/>\n";
      }
    }
    if (p < lines.size() && !lines[p].x.empty()) {
      s += "<polyline class=\"density\" fill=\"none\" stroke=\"" + lines[p].color + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < lines[p].x.size(); ++i)
        s += fmt("%.2f", X(lines[p].x[i])) + "," + fmt("%.2f", Y(lines[p].y[i])) + " ";
      s += "\"/>\n";
    }
    s += "<text x=\"" + fmt("%.1f", ox) + "\" y=\"" + fmt("%.1f", oy + ph + 16) + "\">" + fmt("%g", x_min) +
         "</text>\n";
    s += "<text x=\"" + fmt("%.1f", ox + pw) + "\" y=\"" + fmt("%.1f", oy + ph + 16) + "\" text-anchor=\"end\">" +
         fmt("%g", x_max) + "</text>\n";
  }
  return s + "</svg>\n";
}

}  // namespace posegen::plots
