#ifndef PATCHFORGE_TOOLS_PLOTS_HPP_
#define PATCHFORGE_TOOLS_PLOTS_HPP_

#include <string>
#include <vector>

namespace patchforge::cli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Static SVG line chart; nullopt-like gaps are expressed by NaN in y.
std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

struct BarGroup {
  std::string label;                // e.g. model name
  std::vector<std::string> names;   // one per bar, e.g. patch tag
  std::vector<double> values;
};

// Grouped bars around a zero baseline. Negative values are drawn in a
// separate colour and annotated, so small increments stay visible.
std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& groups);

inline constexpr const char* kNegativeBarColor = "#d62728";

}  // namespace patchforge::cli

#endif  // PATCHFORGE_TOOLS_PLOTS_HPP_
