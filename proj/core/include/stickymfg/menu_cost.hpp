#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "stickymfg/calvo.hpp"
#include "stickymfg/forward_equation.hpp"
#include "stickymfg/jump_diffusion.hpp"
#include "stickymfg/params.hpp"

namespace stickymfg {

/// Discounted expected loss on the state grid; with a time grid the values
/// are stored time-major (values[k * n_states + i]).
struct ValueGrid {
  StateGrid sgrid;
  std::optional<TimeGrid> tgrid;
  std::vector<double> values;

  std::span<const double> at_node(std::size_t k) const {
    return std::span<const double>(values).subspan(k * sgrid.size(), sgrid.size());
  }
};

/// Inaction band (lower, upper) and reset target. One entry for the
/// stationary problem, one per time node otherwise.
struct PolicyBand {
  std::optional<TimeGrid> tgrid;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> reset;

  /// Band in force at time s (linear in time between nodes).
  BandAt at(double s) const;
  double half_width(std::size_t k = 0) const { return 0.5 * (upper[k] - lower[k]); }
};

struct MenuCostSolution {
  ValueGrid value;
  PolicyBand band;
  std::size_t iterations = 0;  // policy-iteration sweeps (summed over time for the dynamic problem)
};

/// Small-discount approximation of the band half-width, (6 sigma^2 psi / B)^{1/4}.
double band_halfwidth_estimate(const ModelParams& params);

/// Default state grid for the menu-cost model: 4 band half-widths each side.
StateGrid menu_cost_grid(const ModelParams& params, std::size_t n_points);

/// Stationary menu-cost problem with a constant target:
///   max{ rho v - B (x - target)^2 - (sigma^2/2) v'', v - (min v + psi) } = 0
/// by implicit central differences and policy iteration.
MenuCostSolution solve_stationary_vi(const ModelParams& params, double target,
                                     const StateGrid& sgrid);

/// Backward induction of the same inequality with the moving target
/// alpha X(s); the terminal value is the stationary solution at alpha X(H).
MenuCostSolution solve_time_dependent_vi(const ModelParams& params, const AggregatePath& agg,
                                         const StateGrid& sgrid);

/// Stationary forward equation under a fixed band: driftless diffusion,
/// absorption at the edges, reinjection at the reset point.
CrossSection stationary_density(const PolicyBand& band, const ModelParams& params,
                                const StateGrid& sgrid);

/// Forward equation under a (possibly time-varying) band on `grid`. Mass
/// leaving the band is reinjected at the reset point within the same implicit
/// step. Mass outside the initial band adjusts at s = 0.
std::vector<CrossSection> evolve_density(const CrossSection& f0, const PolicyBand& band,
                                         const ModelParams& params, const TimeGrid& grid);

}  // namespace stickymfg
