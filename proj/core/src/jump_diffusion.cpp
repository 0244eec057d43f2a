#include "stickymfg/jump_diffusion.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "parallel.hpp"
#include "stickymfg/error.hpp"

namespace stickymfg {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw Error(Errc::NonFiniteState, what);
}

// Probability that a Brownian bridge from a to b over time var/sigma^2 touches
// the level `barrier`, given both endpoints lie strictly on one side of it.
double bridge_touch(double a, double b, double barrier, double variance) {
  const double da = barrier - a;
  const double db = barrier - b;
  if (da * db <= 0) return 1.0;
  const double exponent = 2.0 * da * db / variance;
  return exponent > 40.0 ? 0.0 : std::exp(-exponent);
}

// Simulates one path and reports every node value to `visit(k, x)`.
template <class Visit>
void run_path(const ModelParams& params, const TimeGrid& grid, const SimulationOptions& opt,
              std::size_t index, Visit&& visit, std::vector<JumpRecord>* log) {
  Rng rng = path_stream(opt.seed, index);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const bool poisson = params.theta > 0;
  std::exponential_distribution<double> waiting(poisson ? params.theta : 1.0);

  const double dt = grid.dt();
  const double step_sd = params.sigma * std::sqrt(dt);
  const double bridge_var = params.sigma * params.sigma * dt;

  double x = opt.initial(rng);
  require_finite(x, "initial markup gap");
  double next_event = poisson ? waiting(rng) : std::numeric_limits<double>::infinity();

  auto record = [&](double when, double jump) {
    if (log) log->push_back({when, jump});
  };

  if (opt.band) {
    const BandAt band = opt.band(grid[0]);
    if (x < band.lower || x > band.upper) {
      record(grid[0], band.reset - x);
      x = band.reset;
    }
  }
  visit(std::size_t{0}, x);

  for (std::size_t k = 0; k < grid.n_slices(); ++k) {
    const double s_next = grid[k + 1];
    const double start = x;
    x += step_sd * normal(rng);

    bool jumped = false;
    while (next_event <= s_next) {
      const double target = opt.reset_rule ? opt.reset_rule(next_event, x)
                                           : x + opt.test_jump_sd * normal(rng);
      record(next_event, target - x);
      x = target;
      jumped = true;
      next_event += waiting(rng);
    }

    if (opt.band) {
      const BandAt band = opt.band(s_next);
      // drawn every step so the stream, and hence the path, does not depend on the band
      const double u = uniform(rng);
      bool exit = x < band.lower || x > band.upper;
      if (!exit && !jumped && bridge_var > 0) {
        const double p_up = bridge_touch(start, x, band.upper, bridge_var);
        const double p_lo = bridge_touch(start, x, band.lower, bridge_var);
        exit = u < p_up + p_lo - p_up * p_lo;
      }
      if (exit) {
        record(s_next, band.reset - x);
        x = band.reset;
      }
    }
    require_finite(x, "markup gap overflow");
    visit(k + 1, x);
  }
}

void check_options(const SimulationOptions& opt) {
  if (opt.n_paths == 0) throw Error(Errc::OutOfRange, "n_paths must be >= 1");
  if (!opt.initial) throw Error(Errc::OutOfRange, "initial condition sampler is empty");
  if (opt.test_jump_sd < 0) throw Error(Errc::OutOfRange, "test_jump_sd must be >= 0");
}

void check_params(const ModelParams& params) {
  if (params.sigma < 0) throw Error(Errc::OutOfRange, "sigma must be >= 0");
  if (params.theta < 0) throw Error(Errc::OutOfRange, "theta must be >= 0");
}

}  // namespace

Rng path_stream(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

AdjustmentTimes sample_adjustment_times(double theta, double horizon, std::uint64_t seed) {
  if (!(theta >= 0)) throw Error(Errc::OutOfRange, "theta = " + std::to_string(theta) + " must be >= 0");
  if (!(horizon > 0)) throw Error(Errc::OutOfRange, "horizon must be > 0");
  AdjustmentTimes out;
  if (theta == 0) return out;
  Rng rng = path_stream(seed, 0);
  std::exponential_distribution<double> waiting(theta);
  for (double t = waiting(rng); t <= horizon; t += waiting(rng)) out.events.push_back(t);
  return out;
}

InitialDraw constant_initial(double x0) {
  return [x0](Rng&) { return x0; };
}

PathEnsemble simulate_markup_paths(const ModelParams& params, const TimeGrid& grid,
                                   const SimulationOptions& options) {
  check_params(params);
  check_options(options);
  PathEnsemble ens{grid, std::vector<std::vector<double>>(options.n_paths),
                   std::vector<std::vector<JumpRecord>>(options.n_paths)};
  detail::parallel_for(options.n_paths, [&](std::size_t p) {
    auto& path = ens.paths[p];
    path.resize(grid.size());
    run_path(params, grid, options, p, [&](std::size_t k, double x) { path[k] = x; },
             &ens.jump_log[p]);
  });
  return ens;
}

double EnsembleMoments::standard_error(std::size_t k) const {
  return std::sqrt(variance.at(k) / static_cast<double>(n_paths));
}

EnsembleMoments simulate_markup_moments(const ModelParams& params, const TimeGrid& grid,
                                        const SimulationOptions& options) {
  check_params(params);
  check_options(options);
  const std::size_t nodes = grid.size();
  const std::size_t chunks = std::min<std::size_t>(options.n_paths, 64);

  // Welford accumulators per chunk, merged in chunk order so the result does
  // not depend on the number of worker threads.
  struct Accumulator {
    std::vector<double> mean, m2;
    std::size_t count = 0;
  };
  std::vector<Accumulator> acc(chunks);
  detail::parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = options.n_paths * c / chunks;
    const std::size_t end = options.n_paths * (c + 1) / chunks;
    Accumulator& a = acc[c];
    a.mean.assign(nodes, 0.0);
    a.m2.assign(nodes, 0.0);
    for (std::size_t p = begin; p < end; ++p) {
      const double n = static_cast<double>(++a.count);
      run_path(params, grid, options, p,
               [&](std::size_t k, double x) {
                 const double d = x - a.mean[k];
                 a.mean[k] += d / n;
                 a.m2[k] += d * (x - a.mean[k]);
               },
               nullptr);
    }
  });

  EnsembleMoments out;
  out.mean.assign(nodes, 0.0);
  std::vector<double> m2(nodes, 0.0);
  for (const Accumulator& a : acc) {
    const double na = static_cast<double>(out.n_paths);
    const double nb = static_cast<double>(a.count);
    const double n = na + nb;
    for (std::size_t k = 0; k < nodes; ++k) {
      const double d = a.mean[k] - out.mean[k];
      out.mean[k] += d * nb / n;
      m2[k] += a.m2[k] + d * d * na * nb / n;
    }
    out.n_paths += a.count;
  }
  out.variance.resize(nodes);
  for (std::size_t k = 0; k < nodes; ++k) out.variance[k] = m2[k] / static_cast<double>(out.n_paths);
  return out;
}

EnsembleMoments ensemble_stats(const PathEnsemble& ens) {
  if (ens.paths.empty()) throw Error(Errc::EmptyEnsemble, "ensemble has no paths");
  const std::size_t nodes = ens.paths.front().size();
  const double n = static_cast<double>(ens.paths.size());
  EnsembleMoments out;
  out.n_paths = ens.paths.size();
  out.mean.assign(nodes, 0.0);
  out.variance.assign(nodes, 0.0);
  for (const auto& path : ens.paths) {
    for (std::size_t k = 0; k < nodes; ++k) out.mean[k] += path[k];
  }
  for (double& m : out.mean) m /= n;
  for (const auto& path : ens.paths) {
    for (std::size_t k = 0; k < nodes; ++k) {
      const double d = path[k] - out.mean[k];
      out.variance[k] += d * d;
    }
  }
  for (double& v : out.variance) v /= n;
  return out;
}

double step_sde(const SdeSpec& spec, double s, double x, double dt, double noise) {
  if (!(dt > 0)) throw Error(Errc::OutOfRange, "dt must be > 0");
  const double u = spec.control ? spec.control(s, x) : 0.0;
  const double mu = spec.drift ? spec.drift(s, u, x) : 0.0;
  const double vol = spec.vol ? spec.vol(s, u, x) : 0.0;
  if (vol < 0) throw Error(Errc::OutOfRange, "vol must be >= 0");
  const double next = x + mu * dt + vol * std::sqrt(dt) * noise;
  if (!std::isfinite(next)) throw Error(Errc::NonFiniteState, "SDE step produced a non-finite state");
  return next;
}

}  // namespace stickymfg
