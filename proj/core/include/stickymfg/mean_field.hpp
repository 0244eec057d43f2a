#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stickymfg/calvo.hpp"
#include "stickymfg/menu_cost.hpp"
#include "stickymfg/params.hpp"

namespace stickymfg {

enum class ModelKind { Calvo, MenuCost };
enum class AggregationKind { ForwardPde, MonteCarlo };
enum class EquilibriumStatus { Converged, Breakdown, MaxIterations };

std::string_view to_string(ModelKind kind);
std::string_view to_string(AggregationKind kind);
std::string_view to_string(EquilibriumStatus status);

struct EquilibriumSettings {
  ModelKind model = ModelKind::Calvo;
  AggregationKind aggregation = AggregationKind::ForwardPde;
  double damping = 0.5;
  double tol = 1e-6;
  std::size_t max_iter = 500;
  std::uint64_t seed = 1;
  std::size_t n_paths = 100000;
  std::size_t x_points = 801;
  std::optional<double> x_halfwidth;  // default depends on the model
  double initial_scale = 1.0;         // X^0(s) = -scale * delta * exp(-theta s)
};

struct EquilibriumResult {
  AggregatePath agg;
  std::variant<ResetSchedule, PolicyBand> policy;
  std::size_t iterations = 0;
  std::vector<double> residual_history;
  EquilibriumStatus status = EquilibriumStatus::MaxIterations;
  std::string diagnosis;
  /// Monte-Carlo standard error of the last aggregated mean path (empty for
  /// forward_pde aggregation). See equilibrium_standard_error for the error
  /// of the equilibrium path itself.
  std::vector<double> standard_error;
};

/// State grid used by the equilibrium solver: 6 sigma sqrt(H) each side for
/// Calvo, 4 band half-widths for the menu-cost model, unless overridden.
StateGrid equilibrium_state_grid(const ModelParams& params, const TimeGrid& grid,
                                 const EquilibriumSettings& settings);

/// X^0(s) = -scale * delta * exp(-theta s).
AggregatePath initial_guess(const ModelParams& params, const TimeGrid& grid, double scale = 1.0);

/// Damped Picard iteration on the aggregate markup-gap path.
///
/// Each sweep solves the firm problem against the current path, aggregates
/// the shocked cross-section (stationary distribution shifted by -delta) and
/// blends the new mean path in with weight `damping`. The sweep residual is
/// the sup-norm change of the path. Convergence requires the residual and,
/// for forward-PDE aggregation, the contraction estimate r q / (1 - q) (q the
/// last residual ratio) to be below tol. Under Monte Carlo the residual alone
/// is tested: with fixed random streams the map is piecewise constant, so the
/// residual ratio carries no contraction information. Breakdown
/// is reported when the residual grows for 10 consecutive sweeps, exceeds
/// 1e3 delta, or the converged path does not decay. The decay test is skipped
/// when the terminal value lies below 1e-6 of the peak, 2 tol, or (Monte
/// Carlo) 3 standard errors times 1 / (1 - alpha), alpha clamped to [0, 0.9].
/// Throws Error{InvalidDamping}; solver errors on the first sweep propagate.
EquilibriumResult solve_equilibrium(const ModelParams& params, const TimeGrid& grid,
                                    const EquilibriumSettings& settings);

/// Batch-means standard error of a Monte-Carlo equilibrium path: `batches`
/// independent equilibria, each with n_paths / batches paths and tol scaled by
/// sqrt(batches), give sd / sqrt(batches) per node. Unlike the per-sweep
/// standard error this includes sampling noise fed back through the firm
/// problem, which grows like 1 / (1 - alpha) for persistent components.
/// Throws Error{OutOfRange} unless aggregation is MonteCarlo and
/// 2 <= batches <= n_paths; Error{EquilibriumBreakdown} if a batch breaks down.
std::vector<double> equilibrium_standard_error(const ModelParams& params, const TimeGrid& grid,
                                               const EquilibriumSettings& settings, std::size_t batches);

struct CriticalProbe {
  double alpha = 0.0;
  EquilibriumStatus status = EquilibriumStatus::MaxIterations;
  std::optional<double> area;  // IRF area at converged probes
};

struct CriticalAlphaReport {
  double alpha_low = 0.0;
  double alpha_high = 0.0;
  std::vector<CriticalProbe> probes;
};

/// Bisection on equilibrium status over [alpha_low, alpha_high]; the bracket
/// shrinks to width (alpha_high - alpha_low) / 2^probes.
/// Throws Error{NoBreakdownInRange} or Error{NoConvergenceInRange}.
CriticalAlphaReport find_critical_alpha(const ModelParams& params, const TimeGrid& grid,
                                        double alpha_low, double alpha_high, std::size_t probes,
                                        const EquilibriumSettings& settings);

}  // namespace stickymfg
