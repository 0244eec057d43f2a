#include "stickymfg/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "stickymfg/error.hpp"
#include "stickymfg/forward_equation.hpp"
#include "stickymfg/irf.hpp"
#include "stickymfg/jump_diffusion.hpp"

namespace stickymfg {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::Calvo ? "calvo" : "menu_cost";
}

std::string_view to_string(AggregationKind kind) {
  return kind == AggregationKind::ForwardPde ? "forward_pde" : "monte_carlo";
}

std::string_view to_string(EquilibriumStatus status) {
  switch (status) {
    case EquilibriumStatus::Converged: return "Converged";
    case EquilibriumStatus::Breakdown: return "Breakdown";
    case EquilibriumStatus::MaxIterations: return "MaxIterations";
  }
  return "Unknown";
}

namespace {

constexpr double kMinRate = 1e-8;
constexpr std::size_t kGrowthLimit = 10;
constexpr double kBlowUp = 1e3;
constexpr double kNoDecay = 1e-3;  // fitted rate times horizon
constexpr double kNegligible = 1e-6;  // terminal value relative to the peak
constexpr double kNoiseBand = 3.0;   // Monte-Carlo standard errors
constexpr double kSolverBand = 2.0;  // convergence tolerances
constexpr double kMaxNoiseGainAlpha = 0.9;

double tail_rate(const std::vector<double>& x, const TimeGrid& grid, double fallback) {
  const auto r = fit_decay_rate(x, grid);
  return r ? std::max(*r, kMinRate) : fallback;
}

double interpolate(const TimeGrid& grid, const std::vector<double>& v, double s) {
  if (s <= 0) return v.front();
  if (s >= grid.horizon()) return v.back();
  const double pos = s / grid.dt();
  const auto k = std::min(static_cast<std::size_t>(pos), grid.n_slices() - 1);
  const double w = pos - static_cast<double>(k);
  return (1.0 - w) * v[k] + w * v[k + 1];
}

bool is_model_breakdown(Errc code) {
  return code == Errc::EquilibriumBreakdown || code == Errc::DegenerateGrid || code == Errc::NonFiniteState;
}

struct Sweep {
  std::vector<double> mean;
  std::vector<double> standard_error;
  std::variant<ResetSchedule, PolicyBand> policy;
};

// Firm problem plus aggregation for one model and aggregation kind. The
// shocked initial cross-section and the random streams are fixed across
// sweeps so the Picard map is deterministic.
class FixedPointMap {
 public:
  FixedPointMap(const ModelParams& params, const TimeGrid& grid, const EquilibriumSettings& settings)
      : params_(params), grid_(grid), settings_(settings),
        sgrid_(equilibrium_state_grid(params, grid, settings)),
        f0_{sgrid_, std::vector<double>(sgrid_.size(), 0.0)} {
    if (settings.model == ModelKind::Calvo) {
      if (settings.aggregation == AggregationKind::ForwardPde) {
        f0_ = shift_density(calvo_stationary_density(params, sgrid_), -params.delta);
      }
    } else {
      stationary_band_ = solve_stationary_vi(params, 0.0, sgrid_).band;
      if (settings.aggregation == AggregationKind::ForwardPde) {
        f0_ = shift_density(stationary_density(*stationary_band_, params, sgrid_), -params.delta);
      }
    }
  }

  Sweep operator()(const AggregatePath& agg) const {
    if (settings_.model == ModelKind::Calvo) {
      ResetSchedule resets = reset_schedule(agg, params_);
      if (settings_.aggregation == AggregationKind::ForwardPde) {
        return {mean_path(evolve_calvo_density(f0_, resets, params_)), {}, std::move(resets)};
      }
      SimulationOptions opt = simulation_options();
      const double scale = params_.theta > 0 ? params_.sigma / std::sqrt(2.0 * params_.theta) : 0.0;
      const double shift = -params_.delta;
      opt.initial = [scale, shift](Rng& rng) {
        std::exponential_distribution<double> e(1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double magnitude = scale * e(rng);
        return (u(rng) < 0.5 ? -magnitude : magnitude) + shift;
      };
      const TimeGrid& g = resets.grid;
      const std::vector<double>& v = resets.values;
      opt.reset_rule = [&g, &v](double s, double) { return interpolate(g, v, s); };
      EnsembleMoments m = simulate_markup_moments(params_, grid_, opt);
      std::vector<double> se = standard_errors(m);
      return {std::move(m.mean), std::move(se), std::move(resets)};
    }

    MenuCostSolution sol = solve_time_dependent_vi(params_, agg, sgrid_);
    if (settings_.aggregation == AggregationKind::ForwardPde) {
      return {mean_path(evolve_density(f0_, sol.band, params_, grid_)), {}, std::move(sol.band)};
    }
    ModelParams state_dependent = params_;
    state_dependent.theta = 0.0;
    SimulationOptions opt = simulation_options();
    const BandAt b0 = stationary_band_->at(0.0);
    const double half = 0.5 * (b0.upper - b0.lower);
    const double centre = b0.reset - params_.delta;
    opt.initial = [half, centre](Rng& rng) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      return centre + half * (u(rng) + u(rng) - 1.0);
    };
    const PolicyBand& band = sol.band;
    opt.band = [&band](double s) { return band.at(s); };
    EnsembleMoments m = simulate_markup_moments(state_dependent, grid_, opt);
    std::vector<double> se = standard_errors(m);
    return {std::move(m.mean), std::move(se), std::move(sol.band)};
  }

 private:
  SimulationOptions simulation_options() const {
    SimulationOptions opt;
    opt.n_paths = settings_.n_paths;
    opt.seed = settings_.seed;
    return opt;
  }

  static std::vector<double> standard_errors(const EnsembleMoments& m) {
    std::vector<double> se(m.mean.size());
    for (std::size_t k = 0; k < se.size(); ++k) se[k] = m.standard_error(k);
    return se;
  }

  const ModelParams& params_;
  const TimeGrid& grid_;
  const EquilibriumSettings& settings_;
  StateGrid sgrid_;
  CrossSection f0_;
  std::optional<PolicyBand> stationary_band_;
};

}  // namespace

StateGrid equilibrium_state_grid(const ModelParams& params, const TimeGrid& grid,
                                 const EquilibriumSettings& settings) {
  if (settings.model == ModelKind::MenuCost && !settings.x_halfwidth) {
    return menu_cost_grid(params, settings.x_points);
  }
  double half = settings.x_halfwidth.value_or(6.0 * params.sigma * std::sqrt(grid.horizon()));
  if (!(half > 0)) half = 1.0;
  return StateGrid::symmetric(half, settings.x_points);
}

AggregatePath initial_guess(const ModelParams& params, const TimeGrid& grid, double scale) {
  AggregatePath agg{grid, std::vector<double>(grid.size()), std::nullopt};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    agg.values[k] = -scale * params.delta * std::exp(-params.theta * grid[k]);
  }
  return agg;
}

EquilibriumResult solve_equilibrium(const ModelParams& params, const TimeGrid& grid,
                                    const EquilibriumSettings& settings) {
  if (!(settings.damping > 0 && settings.damping <= 1)) {
    throw Error(Errc::InvalidDamping, "damping must lie in (0, 1], got " + std::to_string(settings.damping));
  }
  if (!(settings.tol > 0)) throw Error(Errc::OutOfRange, "tol must be > 0");
  if (settings.max_iter == 0) throw Error(Errc::OutOfRange, "max_iter must be >= 1");

  EquilibriumResult result;
  result.agg = initial_guess(params, grid, settings.initial_scale);
  double rate = tail_rate(result.agg.values, grid, std::max(params.theta, kMinRate));
  result.agg.extrapolation_rate = rate;

  auto breakdown = [&](std::string why) {
    result.status = EquilibriumStatus::Breakdown;
    result.diagnosis = std::move(why);
    return result;
  };

  try {
    const FixedPointMap map(params, grid, settings);
    std::size_t growth = 0;
    for (std::size_t it = 1; it <= settings.max_iter; ++it) {
      Sweep sweep = map(result.agg);
      double residual = 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double updated = result.agg.values[k] + settings.damping * (sweep.mean[k] - result.agg.values[k]);
        if (!std::isfinite(updated)) {
          result.iterations = it;
          return breakdown("aggregate path is not finite");
        }
        residual = std::max(residual, std::abs(updated - result.agg.values[k]));
        result.agg.values[k] = updated;
      }
      rate = tail_rate(result.agg.values, grid, rate);
      result.agg.extrapolation_rate = rate;
      result.policy = std::move(sweep.policy);
      result.standard_error = std::move(sweep.standard_error);
      result.iterations = it;

      const double previous = result.residual_history.empty() ? 0.0 : result.residual_history.back();
      result.residual_history.push_back(residual);
      if (residual > kBlowUp * std::abs(params.delta)) {
        return breakdown("residual exceeds 1e3 delta");
      }
      growth = it > 1 && residual > previous ? growth + 1 : 0;
      if (growth >= kGrowthLimit) return breakdown("residual grew for 10 consecutive sweeps");

      if (residual < settings.tol) {
        // the Monte-Carlo map is piecewise constant, so its residual ratio says nothing
        const bool sampled = settings.aggregation == AggregationKind::MonteCarlo;
        const double q = it > 1 && previous > 0 ? residual / previous : 0.0;
        if (sampled || (q < 1 && residual * q / (1.0 - q) < settings.tol)) {
          result.status = EquilibriumStatus::Converged;
          break;
        }
      }
    }
  } catch (const Error& e) {
    if (!is_model_breakdown(e.code())) throw;
    return breakdown(e.what());
  }

  if (result.status != EquilibriumStatus::Converged) {
    result.status = EquilibriumStatus::MaxIterations;
    result.diagnosis = "no convergence after " + std::to_string(result.iterations) + " sweeps";
    return result;
  }

  const auto& x = result.agg.values;
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  // A terminal value at the numerical floor, inside the solver tolerance or
  // inside the sampling band carries no information about decay.
  double floor = std::max(kNegligible * peak, kSolverBand * settings.tol);
  if (!result.standard_error.empty()) {
    // sampling noise fed back through the firm problem grows like 1 / (1 - alpha)
    const double gain = 1.0 / (1.0 - std::clamp(params.alpha, 0.0, kMaxNoiseGainAlpha));
    floor = std::max(floor, kNoiseBand * gain * result.standard_error.back());
  }
  if (std::abs(x.back()) > floor) {
    if (std::abs(x.back()) >= std::abs(x.front())) return breakdown("aggregate path does not decay");
    const auto fitted = fit_decay_rate(x, grid);
    if (fitted && *fitted * grid.horizon() < kNoDecay) return breakdown("aggregate path does not decay");
  }
  return result;
}

std::vector<double> equilibrium_standard_error(const ModelParams& params, const TimeGrid& grid,
                                               const EquilibriumSettings& settings, std::size_t batches) {
  if (settings.aggregation != AggregationKind::MonteCarlo) {
    throw Error(Errc::OutOfRange, "equilibrium standard error needs Monte-Carlo aggregation");
  }
  if (batches < 2 || batches > settings.n_paths) {
    throw Error(Errc::OutOfRange, "batches must lie in [2, n_paths], got " + std::to_string(batches));
  }
  EquilibriumSettings batch = settings;
  batch.n_paths = settings.n_paths / batches;
  // each batch carries sqrt(batches) times the sampling noise of the full run
  batch.tol = settings.tol * std::sqrt(static_cast<double>(batches));
  std::vector<double> sum(grid.size(), 0.0), sum_sq(grid.size(), 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    batch.seed = settings.seed ^ (0x9e3779b97f4a7c15ULL * (b + 1));
    const EquilibriumResult eq = solve_equilibrium(params, grid, batch);
    if (eq.status == EquilibriumStatus::Breakdown) {
      throw Error(Errc::EquilibriumBreakdown, "batch " + std::to_string(b) + ": " + eq.diagnosis);
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      sum[k] += eq.agg.values[k];
      sum_sq[k] += eq.agg.values[k] * eq.agg.values[k];
    }
  }
  const double n = static_cast<double>(batches);
  std::vector<double> se(grid.size());
  for (std::size_t k = 0; k < se.size(); ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, (sum_sq[k] - n * mean * mean) / (n - 1.0));
    se[k] = std::sqrt(var / n);
  }
  return se;
}

CriticalAlphaReport find_critical_alpha(const ModelParams& params, const TimeGrid& grid,
                                        double alpha_low, double alpha_high, std::size_t probes,
                                        const EquilibriumSettings& settings) {
  if (!(alpha_low < alpha_high) || !std::isfinite(alpha_low) || !std::isfinite(alpha_high)) {
    throw Error(Errc::OutOfRange, "alpha range must be a nondegenerate finite interval");
  }
  if (probes == 0) throw Error(Errc::OutOfRange, "probes must be >= 1");

  CriticalAlphaReport report{alpha_low, alpha_high, {}};
  bool converged_any = false;
  bool failed_any = false;
  for (std::size_t p = 0; p < probes; ++p) {
    const double mid = 0.5 * (report.alpha_low + report.alpha_high);
    ModelParams probe_params = params;
    probe_params.alpha = mid;
    probe_params.breakdown_risk = mid >= 1.0;
    const EquilibriumResult eq = solve_equilibrium(probe_params, grid, settings);
    CriticalProbe probe{mid, eq.status, std::nullopt};
    if (eq.status == EquilibriumStatus::Converged) {
      std::vector<double> y(eq.agg.values.size());
      for (std::size_t k = 0; k < y.size(); ++k) y[k] = -eq.agg.values[k];
      probe.area = irf_stats(y, grid).area;
      report.alpha_low = mid;
      converged_any = true;
    } else {
      report.alpha_high = mid;
      failed_any = true;
    }
    report.probes.push_back(probe);
  }
  if (!failed_any) {
    throw Error(Errc::NoBreakdownInRange, "every probe converged; last bracket [" +
                                              std::to_string(report.alpha_low) + ", " +
                                              std::to_string(report.alpha_high) + "]");
  }
  if (!converged_any) throw Error(Errc::NoConvergenceInRange, "no probe converged");
  return report;
}

}  // namespace stickymfg
