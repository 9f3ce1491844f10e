#include "repgeom/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace repgeom::svg {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 60, kRight = 150, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
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

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

}  // namespace

std::string line_plot(const std::string& title, const std::vector<double>& x_in,
                      const std::vector<Series>& series, const std::string& x_label,
                      bool normalize, bool log2_x) {
  std::vector<double> x = x_in;
  if (log2_x) {
    for (double& v : x) v = std::log2(v);
  }
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kWidth << R"(" height=")"
      << kHeight << R"(" font-family="sans-serif" font-size="11">)" << '\n';
  out << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  out << R"(<text x=")" << kWidth / 2 << R"(" y="20" text-anchor="middle" font-size="14">)"
      << escape(title) << "</text>\n";

  const double x0 = x.empty() ? 0 : *std::min_element(x.begin(), x.end());
  const double x1 = x.empty() ? 1 : *std::max_element(x.begin(), x.end());
  double g_lo = INFINITY, g_hi = -INFINITY;
  for (const auto& s : series) {
    for (const auto& v : s.y) {
      if (v) g_lo = std::min(g_lo, *v), g_hi = std::max(g_hi, *v);
    }
  }
  if (!std::isfinite(g_lo)) g_lo = 0, g_hi = 1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (x1 > x0 ? (v - x0) / (x1 - x0) : 0.5) * pw; };

  out << R"(<rect x=")" << kLeft << R"(" y=")" << kTop << R"(" width=")" << pw
      << R"(" height=")" << ph << R"(" fill="none" stroke="black"/>)" << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    out << R"(<text x=")" << px(x[i]) << R"(" y=")" << kTop + ph + 15
        << R"(" text-anchor="middle">)" << fmt(x_in[i]) << "</text>\n";
  }
  out << R"(<text x=")" << kLeft + pw / 2 << R"(" y=")" << kHeight - 10
      << R"(" text-anchor="middle">)" << escape(x_label) << "</text>\n";
  if (!normalize) {
    out << R"(<text x=")" << kLeft - 5 << R"(" y=")" << kTop + 5 << R"(" text-anchor="end">)"
        << fmt(g_hi) << "</text>\n";
    out << R"(<text x=")" << kLeft - 5 << R"(" y=")" << kTop + ph << R"(" text-anchor="end">)"
        << fmt(g_lo) << "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    double lo = g_lo, hi = g_hi;
    if (normalize) {
      lo = INFINITY, hi = -INFINITY;
      for (const auto& v : s.y) {
        if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
      }
    }
    auto py = [&](double v) { return kTop + ph - (hi > lo ? (v - lo) / (hi - lo) : 0.5) * ph; };
    const char* color = kPalette[si % kPalette.size()];
    out << R"(<polyline fill="none" stroke=")" << color << R"(" stroke-width="2" points=")";
    for (std::size_t i = 0; i < s.y.size() && i < x.size(); ++i) {
      if (s.y[i]) out << px(x[i]) << ',' << py(*s.y[i]) << ' ';
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < s.y.size() && i < x.size(); ++i) {
      if (s.y[i]) {
        out << R"(<circle r="2.5" fill=")" << color << R"(" cx=")" << px(x[i]) << R"(" cy=")"
            << py(*s.y[i]) << "\"/>\n";
      }
    }
    const double ly = kTop + 15.0 * static_cast<double>(si);
    out << R"(<line x1=")" << kWidth - kRight + 10 << R"(" x2=")" << kWidth - kRight + 30
        << R"(" y1=")" << ly << R"(" y2=")" << ly << R"(" stroke=")" << color
        << R"(" stroke-width="2"/>)" << '\n';
    out << R"(<text x=")" << kWidth - kRight + 35 << R"(" y=")" << ly + 4 << "\">"
        << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string heatmap(const std::string& title, const std::vector<int>& labels,
                    const std::vector<std::vector<std::optional<double>>>& values) {
  const std::size_t n = values.size();
  const double size = 360.0;
  const double cell = n ? size / static_cast<double>(n) : size;
  const double left = 50, top = 40;
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << left + size + 80
      << R"(" height=")" << top + size + 40 << R"(" font-family="sans-serif" font-size="10">)"
      << '\n';
  out << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  out << R"(<text x=")" << left + size / 2 << R"(" y="20" text-anchor="middle" font-size="14">)"
      << escape(title) << "</text>\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::string fill = "#bbbbbb";
      if (j < values[i].size() && values[i][j]) {
        const double v = std::clamp(*values[i][j], 0.0, 1.0);
        const int level = static_cast<int>(std::lround(255.0 * v));
        std::ostringstream c;
        c << "rgb(" << level << ',' << level << ',' << std::min(255, level + 40) << ')';
        fill = c.str();
      }
      out << R"(<rect x=")" << left + cell * static_cast<double>(j) << R"(" y=")"
          << top + cell * static_cast<double>(i) << R"(" width=")" << cell << R"(" height=")"
          << cell << R"(" fill=")" << fill << "\"/>\n";
    }
    if (i < labels.size()) {
      out << R"(<text x=")" << left - 4 << R"(" y=")"
          << top + cell * (static_cast<double>(i) + 0.6) << R"(" text-anchor="end">)"
          << labels[i] << "</text>\n";
      out << R"(<text x=")" << left + cell * (static_cast<double>(i) + 0.5) << R"(" y=")"
          << top + size + 14 << R"(" text-anchor="middle">)" << labels[i] << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace repgeom::svg
