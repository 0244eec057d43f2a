#pragma once

#include <optional>
#include <span>
#include <vector>

#include "stickymfg/params.hpp"

namespace stickymfg {

/// Summary of an output impulse response on a time grid.
struct IrfStats {
  double area = 0.0;       // trapezoid over the grid plus fitted exponential tail
  double half_life = 0.0;  // first time output falls below half its impact value
  double peak_time = 0.0;  // 0 unless the response is hump-shaped
  bool hump = false;
  std::optional<double> tail_rate;
};

struct IRFResult {
  TimeGrid grid;
  std::vector<double> output;  // Y(s) = -X(s)
  IrfStats stats;
};

inline constexpr double kDefaultHumpMargin = 0.02;

/// Least-squares slope of -log|y| over the trailing `fraction` of the grid.
/// Empty when the window contains a zero or a sign change.
std::optional<double> fit_decay_rate(std::span<const double> values, const TimeGrid& grid,
                                     double fraction = 0.25);

IrfStats irf_stats(std::span<const double> output, const TimeGrid& grid,
                   double hump_margin = kDefaultHumpMargin);

}  // namespace stickymfg
