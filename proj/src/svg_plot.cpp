#include "ec4srec/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ec4srec/common.hpp"

namespace ec4srec::svg {

namespace {

constexpr int kWidth = 680, kHeight = 420;
constexpr int kLeft = 70, kRight = 30, kTop = 50, kBottom = 60;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0, hi = 1;
  double map(double v, double pix_lo, double pix_hi) const {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    return pix_lo + t * (pix_hi - pix_lo);
  }
};

Range pad_range(double lo, double hi) {
  if (!(hi > lo)) {
    const double eps = std::max(1.0, std::abs(lo)) * 0.1;
    return {lo - eps, hi + eps};
  }
  const double pad = (hi - lo) * 0.08;
  return {lo - pad, hi + pad};
}

void open_chart(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title) << "</text>\n";
}

void draw_axes(std::ostringstream& out, const Range& yr, const std::string& y_label) {
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
      << kWidth - kRight << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double y = yr.map(v, kHeight - kBottom, kTop);
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << y << "\" x2=\"" << kLeft << "\" y2=\""
        << y << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v)
        << "</text>\n";
  }
  out << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << (kTop + kHeight - kBottom) / 2 << ")\">"
      << escape(y_label) << "</text>\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << content;
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series) {
  if (series.empty()) throw Error("a line chart needs at least one series");
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  bool first = true;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) throw Error("series '" + s.label + "' has ragged data");
    for (size_t i = 0; i < s.xs.size(); ++i) {
      if (first) {
        xlo = xhi = s.xs[i];
        ylo = yhi = s.ys[i];
        first = false;
      }
      xlo = std::min(xlo, s.xs[i]);
      xhi = std::max(xhi, s.xs[i]);
      ylo = std::min(ylo, s.ys[i]);
      yhi = std::max(yhi, s.ys[i]);
    }
  }
  if (first) throw Error("a line chart needs at least one point");
  const Range xr = pad_range(xlo, xhi);
  const Range yr = pad_range(ylo, yhi);

  std::ostringstream out;
  open_chart(out, title);
  draw_axes(out, yr, y_label);
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape(x_label) << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < s.xs.size(); ++i) {
      out << xr.map(s.xs[i], kLeft, kWidth - kRight) << ","
          << yr.map(s.ys[i], kHeight - kBottom, kTop) << " ";
    }
    out << "\"/>\n";
    for (size_t i = 0; i < s.xs.size(); ++i) {
      out << "<circle cx=\"" << xr.map(s.xs[i], kLeft, kWidth - kRight) << "\" cy=\""
          << yr.map(s.ys[i], kHeight - kBottom, kTop) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = kTop + 16.0 * static_cast<double>(si);
    out << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << ly - 9
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight - 135 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  write_file(path, out.str());
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<std::string>& labels,
                     const std::vector<double>& values) {
  if (labels.size() != values.size() || labels.empty()) {
    throw Error("a bar chart needs matching, non-empty labels and values");
  }
  double ylo = std::min(0.0, *std::min_element(values.begin(), values.end()));
  double yhi = *std::max_element(values.begin(), values.end());
  const Range yr = pad_range(ylo, yhi);

  std::ostringstream out;
  open_chart(out, title);
  draw_axes(out, yr, y_label);

  const int n = static_cast<int>(values.size());
  const double span = static_cast<double>(kWidth - kLeft - kRight) / n;
  const double bar_w = span * 0.55;
  for (int i = 0; i < n; ++i) {
    const double cx = kLeft + span * (i + 0.5);
    const double y0 = yr.map(0.0, kHeight - kBottom, kTop);
    const double y1 = yr.map(values[i], kHeight - kBottom, kTop);
    out << "<rect x=\"" << cx - bar_w / 2 << "\" y=\"" << std::min(y0, y1) << "\" width=\""
        << bar_w << "\" height=\"" << std::abs(y0 - y1) << "\" fill=\""
        << kPalette[i % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << cx << "\" y=\"" << std::min(y0, y1) - 4
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << fmt(values[i]) << "</text>\n";
    out << "<text x=\"" << cx << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << escape(labels[i]) << "</text>\n";
  }
  out << "</svg>\n";
  write_file(path, out.str());
}

}  // namespace ec4srec::svg
