#include "cmdp_accel/svg_plot.hpp"

#include "cmdp_accel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace cmdp_accel {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

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

}  // namespace

std::string render_svg(const std::vector<TraceRow>& rows, const PlotOptions& opt) {
  if (rows.empty()) throw InvalidInput("nothing to plot: no trace rows");
  if (!(opt.floor > 0.0)) throw InvalidInput("plot floor must be > 0");

  // std::map keeps solver order deterministic
  std::map<std::string, std::vector<const TraceRow*>> series;
  double xmax = 1.0;
  for (const TraceRow& r : rows) {
    series[r.solver].push_back(&r);
    xmax = std::max(xmax, static_cast<double>(r.oracle_calls));
  }
  auto ylog = [&](double v) { return std::log10(std::max(std::abs(v), opt.floor)); };
  double ylo = std::log10(opt.floor), yhi = ylo + 1.0;
  for (const TraceRow& r : rows) yhi = std::max({yhi, ylog(r.gap), ylog(r.violation_l1)});
  yhi = std::ceil(yhi);

  const int left = 70, right = 220, top = 40, gapy = 50;
  const int pw = opt.width - left - right;
  const int ph = opt.panel_height;
  const int height = top + 2 * ph + gapy + 40;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"22\" font-size=\"15\">" << escape(opt.title)
      << "</text>\n";

  for (int panel = 0; panel < 2; ++panel) {
    const int y0 = top + panel * (ph + gapy);
    auto px = [&](double x) { return left + pw * x / xmax; };
    auto py = [&](double v) { return y0 + ph * (yhi - ylog(v)) / (yhi - ylo); };
    svg << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int e = static_cast<int>(ylo); e <= static_cast<int>(yhi); ++e) {
      const double y = y0 + ph * (yhi - e) / (yhi - ylo);
      svg << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(y)
          << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
      svg << "<text x=\"" << left - 6 << "\" y=\"" << num(y + 4)
          << "\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
      const double x = xmax * k / 4.0;
      char label[32];
      std::snprintf(label, sizeof label, "%.3g", x);
      svg << "<text x=\"" << num(px(x)) << "\" y=\"" << y0 + ph + 16
          << "\" text-anchor=\"middle\">" << label << "</text>\n";
    }
    svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << y0 - 6 << "\" text-anchor=\"middle\">"
        << (panel == 0 ? "|gap|" : "l1 violation") << "</text>\n";

    int color = 0;
    for (const auto& [name, pts] : series) {
      svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[color % 10]
          << "\" points=\"";
      for (const TraceRow* r : pts) {
        svg << num(px(static_cast<double>(r->oracle_calls))) << ','
            << num(py(panel == 0 ? r->gap : r->violation_l1)) << ' ';
      }
      svg << "\"/>\n";
      if (panel == 0) {
        const int ly = top + 14 + 16 * color;
        svg << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 30 << "\" y1=\""
            << ly - 4 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << kPalette[color % 10]
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << left + pw + 34 << "\" y=\"" << ly << "\">" << escape(name)
            << "</text>\n";
      }
      ++color;
    }
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\">inner-oracle calls</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cmdp_accel
