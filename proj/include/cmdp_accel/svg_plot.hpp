#pragma once

#include "cmdp_accel/trace_io.hpp"

#include <string>
#include <vector>

namespace cmdp_accel {

struct PlotOptions {
  int width = 960;
  int panel_height = 320;
  // log10 axis floor for gap and violation
  double floor = 1e-8;
  std::string title = "gap and violation vs inner-oracle calls";
};

// Two stacked panels (|gap| and l1 violation, log scale) against cumulative
// oracle calls, one polyline per solver label. Works only from the rows.
std::string render_svg(const std::vector<TraceRow>& rows, const PlotOptions& options = {});

}  // namespace cmdp_accel
