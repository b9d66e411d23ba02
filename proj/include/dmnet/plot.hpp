#pragma once

#include <string>

#include "dmnet/evaluate.hpp"

namespace dmnet {

// Bar chart of per-class IoU, one bar per evaluated class.
void plot_class_bars(const MetricsReport& rep, const std::string& path);

// Per-pair IoU against ground-truth foreground share, colored by class.
void plot_scale_scatter(const MetricsReport& rep, const std::string& path);

}  // namespace dmnet
