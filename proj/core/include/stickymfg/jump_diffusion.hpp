#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "stickymfg/params.hpp"

namespace stickymfg {

using Rng = std::mt19937_64;

/// Independent generator for path `index` of a run seeded with `seed`.
Rng path_stream(std::uint64_t seed, std::uint64_t index);

/// Strictly increasing Poisson event instants in [0, horizon].
struct AdjustmentTimes {
  std::vector<double> events;
};

AdjustmentTimes sample_adjustment_times(double theta, double horizon, std::uint64_t seed);

struct JumpRecord {
  double time;  // event instant xi_i
  double size;  // U_i = post-jump value minus pre-jump value
};

struct PathEnsemble {
  TimeGrid grid;
  std::vector<std::vector<double>> paths;
  std::vector<std::vector<JumpRecord>> jump_log;
};

/// Inaction band in force at one instant.
struct BandAt {
  double lower;
  double upper;
  double reset;
};

/// Reset value chosen at a Poisson adjustment at time `s` from gap `x`.
using ResetRule = std::function<double(double s, double x)>;
/// State-dependent adjustment: paths leaving [lower, upper] jump to `reset`.
using BandRule = std::function<BandAt(double s)>;
using InitialDraw = std::function<double(Rng&)>;

InitialDraw constant_initial(double x0);

struct SimulationOptions {
  std::size_t n_paths = 1;
  std::uint64_t seed = 1;
  InitialDraw initial = constant_initial(0.0);
  /// Calvo resets at rate params.theta. When empty, Poisson jumps are drawn
  /// i.i.d. normal(0, test_jump_sd) instead.
  ResetRule reset_rule;
  double test_jump_sd = 0.0;
  /// Menu-cost resets. Exits between nodes are detected with the Brownian
  /// bridge crossing probability.
  BandRule band;
};

/// Euler-Maruyama simulation of the markup gap with Poisson or band resets.
/// Jumps are applied at the first grid node at or after their event time.
PathEnsemble simulate_markup_paths(const ModelParams& params, const TimeGrid& grid,
                                   const SimulationOptions& options);

struct EnsembleMoments {
  std::vector<double> mean;
  std::vector<double> variance;  // population convention
  std::size_t n_paths = 0;

  /// Standard error of the mean at node k.
  double standard_error(std::size_t k) const;
};

/// Same sample paths as simulate_markup_paths, reduced on the fly to the
/// cross-sectional moments so large ensembles need O(nodes) memory.
EnsembleMoments simulate_markup_moments(const ModelParams& params, const TimeGrid& grid,
                                        const SimulationOptions& options);

EnsembleMoments ensemble_stats(const PathEnsemble& ensemble);

struct SdeSpec {
  std::function<double(double s, double u, double x)> drift;
  std::function<double(double s, double u, double x)> vol;
  std::function<double(double s, double x)> control;
};

/// One Euler-Maruyama step of dx = mu(s,u,x) ds + sigma(s,u,x) dW.
double step_sde(const SdeSpec& spec, double s, double x, double dt, double noise);

}  // namespace stickymfg
