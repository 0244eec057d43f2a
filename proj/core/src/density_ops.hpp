#pragma once

#include <vector>

#include "stickymfg/params.hpp"

namespace stickymfg::detail {

/// Adds `mass` at position x to a nodal density, split over the bracketing
/// nodes so the trapezoid mass and first moment grow by mass and mass * x.
void deposit(std::vector<double>& density, const StateGrid& sgrid, const std::vector<double>& weights,
             double x, double mass);

}  // namespace stickymfg::detail
