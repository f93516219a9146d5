#pragma once

#include <string>
#include <vector>

namespace ec4srec::svg {

struct Series {
  std::string label;
  std::vector<double> xs, ys;  // same length
};

// Self-contained static SVG files; enough for sweep/history figures.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<std::string>& labels,
                     const std::vector<double>& values);

}  // namespace ec4srec::svg
