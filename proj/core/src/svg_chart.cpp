#include "probe/svg_chart.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace probe::svg {

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string bar_chart(const std::vector<Bar>& bars, const ChartOptions& o) {
  const double left = 70, right = 20, top = 40, bottom = 110;
  const double plot_w = o.width - left - right, plot_h = o.height - top - bottom;

  double hi = 0, lo = 0;
  for (const auto& b : bars) {
    hi = std::max(hi, b.value);
    lo = std::min(lo, b.value);
  }
  if (hi == lo) hi = 1;  // all zero: keep a visible axis
  double pad = (hi - lo) * 0.1;
  hi = hi > 0 ? hi + pad : hi;
  lo = lo < 0 ? lo - pad : lo;
  auto y_of = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      o.width, o.height);
  s += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", o.width, o.height);
  s += fmt::format("<text x=\"{:.1f}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", o.width / 2.0,
                   escape(o.title));
  s += fmt::format(
      "<text transform=\"translate(18,{:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n", top + plot_h / 2,
      escape(o.y_label));

  // Gridlines at five evenly spaced values.
  for (int i = 0; i <= 4; ++i) {
    double v = lo + (hi - lo) * i / 4.0;
    double y = y_of(v);
    s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", left, y,
                     left + plot_w, y);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.{}f}</text>\n", left - 6, y + 4, v,
                     o.value_decimals);
  }

  double zero = y_of(0);
  double slot = bars.empty() ? plot_w : plot_w / static_cast<double>(bars.size());
  double bar_w = slot * 0.6;
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    double x = left + slot * static_cast<double>(i) + (slot - bar_w) / 2;
    double y = y_of(b.value);
    double y0 = std::min(y, zero), h = std::abs(zero - y);
    const char* fill = b.value >= 0 ? "#4c78a8" : "#e45756";
    s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"><title>{}: {:.{}f}</title></rect>\n",
                     x, y0, bar_w, h, fill, escape(b.label), b.value, o.value_decimals);
    double ty = b.value >= 0 ? y0 - 4 : y0 + h + 14;
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"11\">{:+.{}f}</text>\n",
                     x + bar_w / 2, ty, b.value, o.value_decimals);
    double lx = x + bar_w / 2, ly = top + plot_h + 14;
    s += fmt::format(
        "<text x=\"{0:.1f}\" y=\"{1:.1f}\" text-anchor=\"end\" transform=\"rotate(-35 {0:.1f} {1:.1f})\">{2}</text>\n",
        lx, ly, escape(b.label));
  }
  s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n", left, zero,
                   left + plot_w, zero);
  s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", left, top,
                   top + plot_h);
  s += "</svg>\n";
  return s;
}

}  // namespace probe::svg
