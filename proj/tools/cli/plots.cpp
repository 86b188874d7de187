#include "plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace patchforge::cli {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b",
                                   "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79"};

std::string esc(const std::string& s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void header(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
     << "</text>\n";
}

void axes(std::ostringstream& os, const Frame& f, const std::string& x_label, const std::string& y_label,
          bool x_ticks) {
  const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
  os << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 5.0;
    os << "<line x1=\"" << left - 4 << "\" y1=\"" << num(f.py(v)) << "\" x2=\"" << right << "\" y2=\""
       << num(f.py(v)) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">" << tick(v)
       << "</text>\n";
  }
  if (x_ticks) {
    for (int i = 0; i <= 5; ++i) {
      const double v = f.x0 + (f.x1 - f.x0) * i / 5.0;
      os << "<text x=\"" << num(f.px(v)) << "\" y=\"" << bottom + 16 << "\" text-anchor=\"middle\">" << tick(v)
         << "</text>\n";
    }
  }
  os << "<text x=\"" << (left + right) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
     << esc(x_label) << "</text>\n";
  os << "<text transform=\"translate(18," << (top + bottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << esc(y_label) << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kTop + 10 + 18.0 * static_cast<double>(i);
    const double x = kWidth - kRight + 12;
    os << "<rect x=\"" << x << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"12\" fill=\"" << kColors[i % 10]
       << "\"/>\n<text x=\"" << x + 18 << "\" y=\"" << y + 2 << "\">" << esc(labels[i]) << "</text>\n";
  }
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  const double pad = std::max(0.02, (y1 - y0) * 0.08);
  y0 = std::max(0.0, y0 - pad);
  y1 = y1 + pad;
  const Frame f{x0, x1, y0, y1};

  std::ostringstream os;
  header(os, title);
  axes(os, f, x_label, y_label, true);
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    labels.push_back(s.label);
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L" : " M") + num(f.px(s.x[i])) + "," + num(f.py(s.y[i]));
      pen_down = true;
    }
    os << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << kColors[k % 10] << "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      os << "<circle cx=\"" << num(f.px(s.x[i])) << "\" cy=\"" << num(f.py(s.y[i])) << "\" r=\"2.5\" fill=\""
         << kColors[k % 10] << "\"/>\n";
    }
  }
  legend(os, labels);
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<BarGroup>& groups) {
  double lo = 0.0, hi = 0.0;
  std::vector<std::string> names;
  for (const BarGroup& g : groups) {
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      lo = std::min(lo, g.values[i]);
      hi = std::max(hi, g.values[i]);
      if (std::find(names.begin(), names.end(), g.names[i]) == names.end()) names.push_back(g.names[i]);
    }
  }
  const double span = std::max(hi - lo, 0.01);
  const Frame f{0.0, 1.0, lo - 0.08 * span, hi + 0.08 * span};

  std::ostringstream os;
  header(os, title);
  axes(os, f, "model", y_label, false);
  os << "<line x1=\"" << kLeft << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << kWidth - kRight << "\" y2=\""
     << num(f.py(0)) << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const BarGroup& g = groups[gi];
    const double gx = kLeft + group_w * static_cast<double>(gi);
    const double bar_w = group_w * 0.7 / static_cast<double>(std::max<std::size_t>(g.values.size(), 1));
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      const double v = g.values[i];
      const auto color_idx = static_cast<std::size_t>(std::find(names.begin(), names.end(), g.names[i]) - names.begin());
      const double x = gx + group_w * 0.15 + bar_w * static_cast<double>(i);
      const double ytop = f.py(std::max(v, 0.0));
      const double h = std::max(std::abs(f.py(v) - f.py(0)), 1.0);
      const bool negative = v < 0.0;
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(ytop) << "\" width=\"" << num(bar_w * 0.9) << "\" height=\""
         << num(h) << "\" fill=\"" << (negative ? kNegativeBarColor : kColors[color_idx % 10]) << "\""
         << (negative ? " class=\"negative\"" : "") << "/>\n";
      os << "<text x=\"" << num(x + bar_w * 0.45) << "\" y=\"" << num(negative ? f.py(v) + 12 : ytop - 3)
         << "\" text-anchor=\"middle\" font-size=\"10\">" << tick(v) << "</text>\n";
    }
    os << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << kHeight - kBottom + 16
       << "\" text-anchor=\"middle\">" << esc(g.label) << "</text>\n";
  }
  legend(os, names);
  os << "<text x=\"" << kWidth - kRight + 12 << "\" y=\"" << kTop + 16 + 18.0 * static_cast<double>(names.size())
     << "\" fill=\"" << kNegativeBarColor << "\">red = increase</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace patchforge::cli
