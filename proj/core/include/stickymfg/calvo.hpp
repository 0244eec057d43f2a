#pragma once

#include <optional>
#include <vector>

#include "stickymfg/irf.hpp"
#include "stickymfg/params.hpp"

namespace stickymfg {

/// Economy-wide markup gap X(s) on a time grid, continued past the horizon as
/// X(H) exp(-rate (s - H)).
struct AggregatePath {
  TimeGrid grid;
  std::vector<double> values;
  std::optional<double> extrapolation_rate;

  /// Linear interpolation on the grid, exponential continuation beyond it.
  double at(double s) const;
};

/// Optimal reset gap x*(s_k) on a time grid.
struct ResetSchedule {
  TimeGrid grid;
  std::vector<double> values;
};

/// Reset value of a Calvo firm adjusting at `tau`: the (rho+theta)-discounted
/// average of alpha X over the expected spell until the next opportunity.
/// X is integrated exactly as a piecewise-linear function against the
/// exponential weight; the tail past the horizon uses the path's rate.
double optimal_reset(double tau, const AggregatePath& agg, const ModelParams& params);

/// optimal_reset at every node, by backward recursion in O(nodes).
ResetSchedule reset_schedule(const AggregatePath& agg, const ModelParams& params);

/// Positive root of  l^2 + rho l - theta (rho + theta) (1 - alpha) = 0.
/// Throws Error{EquilibriumBreakdown} when no positive root exists.
double decay_rate(const ModelParams& params);

/// Closed-form equilibrium response Y(s) = delta exp(-lambda s).
IRFResult calvo_irf_closed_form(const ModelParams& params, const TimeGrid& grid);

/// Weights of the exponential-integrator step over one slice of length dt for
/// dX/ds = theta (x*(s) - X) with x* linear across the slice:
///   X_next = decay X + left x*_k + right x*_{k+1}.
struct SliceWeights {
  double decay;
  double left;
  double right;
};
SliceWeights slice_weights(double theta, double dt);

AggregatePath aggregate_law_of_motion(double x0, const ResetSchedule& resets, double theta,
                                      const TimeGrid& grid);

}  // namespace stickymfg
