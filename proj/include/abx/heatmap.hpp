#pragma once

#include <abx/abstraction.hpp>
#include <abx/common.hpp>

#include <ostream>
#include <string>

namespace abx {

struct Rgb {
  int r, g, b;
};

// Fixed ramp: 0 maps to kRampLow, 1 to kRampHigh, linear in between.
inline constexpr Rgb kRampLow{255, 255, 255};
inline constexpr Rgb kRampHigh{8, 48, 107};

inline Rgb ramp(double v) {
  const double t = std::clamp(v, 0.0, 1.0);
  auto lerp = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  return {lerp(kRampLow.r, kRampHigh.r), lerp(kRampLow.g, kRampHigh.g), lerp(kRampLow.b, kRampHigh.b)};
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
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

// Standalone SVG of a probability grid: one colored cell per value with a
// two-decimal annotation, subject lemmas down the left and object lemmas
// along the top. Output depends only on the grid.
inline void render_heatmap(std::ostream& os, const AbstractionGrid& g) {
  constexpr int kCell = 56;
  constexpr int kLabelW = 120;
  constexpr int kLabelH = 90;
  const int width = kLabelW + static_cast<int>(g.cols) * kCell + 10;
  const int height = kLabelH + static_cast<int>(g.rows) * kCell + 10;

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
               width, height, width, height);
  os << "<style>text { font-family: sans-serif; font-size: 12px; }</style>\n";
  os << format("<rect x=\"0\" y=\"0\" width=\"%d\" height=\"%d\" fill=\"#ffffff\"/>\n", width, height);

  for (std::size_t c = 0; c < g.cols; ++c) {
    const int x = kLabelW + static_cast<int>(c) * kCell + kCell / 2;
    os << format("<text x=\"%d\" y=\"%d\" text-anchor=\"start\" transform=\"rotate(-45 %d %d)\">%s</text>\n",
                 x, kLabelH - 6, x, kLabelH - 6, xml_escape(g.col_labels.at(c)).c_str());
  }
  for (std::size_t r = 0; r < g.rows; ++r) {
    const int y = kLabelH + static_cast<int>(r) * kCell + kCell / 2;
    os << format("<text x=\"%d\" y=\"%d\" text-anchor=\"end\" dominant-baseline=\"middle\">%s</text>\n",
                 kLabelW - 6, y, xml_escape(g.row_labels.at(r)).c_str());
    for (std::size_t c = 0; c < g.cols; ++c) {
      const double v = g.at(r, c);
      const Rgb fill = ramp(v);
      const int x = kLabelW + static_cast<int>(c) * kCell;
      const int top = kLabelH + static_cast<int>(r) * kCell;
      os << format("<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,%d)\" stroke=\"#999999\"/>\n",
                   x, top, kCell, kCell, fill.r, fill.g, fill.b);
      os << format("<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" dominant-baseline=\"middle\" fill=\"%s\">%.2f</text>\n",
                   x + kCell / 2, top + kCell / 2, v > 0.5 ? "#ffffff" : "#000000", v);
    }
  }
  os << "</svg>\n";
}

}  // namespace abx
