#pragma once

#include <string>
#include <vector>

#include "stickymfg/irf.hpp"
#include "stickymfg/mean_field.hpp"
#include "stickymfg/params.hpp"

namespace stickymfg {

/// Output response Y = -X of a converged equilibrium. Throws Error{NotConverged}.
IRFResult compute_irf(const EquilibriumResult& eq, const ModelParams& params,
                      double hump_margin = kDefaultHumpMargin);

struct SweepRow {
  double alpha = 0.0;
  EquilibriumStatus status = EquilibriumStatus::MaxIterations;
  IrfStats stats;      // meaningful for converged rows only
  std::string error;   // solver error that stopped this row, if any
};

struct ConvexityReport {
  std::size_t prefix = 0;                  // converged, uniformly spaced leading rows
  std::vector<double> second_differences;  // of area over that prefix
  bool strictly_convex = false;            // every second difference > 0 (needs prefix >= 3)
};

struct SweepTable {
  std::vector<SweepRow> rows;
  ConvexityReport convexity;
};

/// Area second differences over the leading converged rows that share one
/// alpha spacing (relative tolerance 1e-9).
ConvexityReport convexity_report(const std::vector<SweepRow>& rows);

/// One equilibrium solve per alpha. Rows are independent: a failing row is
/// recorded and the sweep continues. Throws Error{OutOfRange} for unsorted
/// or non-finite alphas.
SweepTable sweep_alpha(const ModelParams& params, const TimeGrid& grid, const std::vector<double>& alphas,
                       const EquilibriumSettings& settings);

}  // namespace stickymfg
