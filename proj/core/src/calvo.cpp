#include "stickymfg/calvo.hpp"

#include <cmath>
#include <string>

#include "stickymfg/error.hpp"

namespace stickymfg {

namespace {

// (1 - e^{-z} - z e^{-z}) / z: weight on the slope term when a linear
// function is integrated against r e^{-r u} over a slice with z = r h.
double slope_weight(double z) {
  if (z < 1e-4) return z / 2.0 - z * z / 3.0 + z * z * z / 8.0;
  return (-std::expm1(-z) - z * std::exp(-z)) / z;
}

double discount_intensity(const ModelParams& params) {
  const double r = params.rho + params.theta;
  if (!(r > 0)) throw Error(Errc::OutOfRange, "rho + theta must be > 0 for the Calvo reset problem");
  return r;
}

void check_path(const AggregatePath& agg) {
  if (agg.values.size() != agg.grid.size()) {
    throw Error(Errc::GridMismatch, "aggregate path has " + std::to_string(agg.values.size()) +
                                        " values for " + std::to_string(agg.grid.size()) + " nodes");
  }
}

// (r)-weighted integral of X past the horizon, seen from the horizon.
double tail_value(const AggregatePath& agg, double r) {
  const double last = agg.values.back();
  if (last == 0.0) return 0.0;
  if (!agg.extrapolation_rate) {
    throw Error(Errc::MissingExtrapolation, "reset integral extends past the horizon");
  }
  const double rate = *agg.extrapolation_rate;
  if (!(r + rate > 0)) {
    throw Error(Errc::EquilibriumBreakdown, "aggregate path grows faster than the discount intensity");
  }
  return r * last / (r + rate);
}

// Integral over one slice of r e^{-r (s - a)} X(s) with X linear from xa to xb.
double slice_integral(double xa, double xb, double z) {
  return xa * -std::expm1(-z) + (xb - xa) * slope_weight(z);
}

}  // namespace

double AggregatePath::at(double s) const {
  const double h = grid.horizon();
  if (s >= h) {
    if (s == h) return values.back();
    if (!extrapolation_rate) throw Error(Errc::MissingExtrapolation, "evaluation past the horizon");
    return values.back() * std::exp(-*extrapolation_rate * (s - h));
  }
  if (s <= 0) return values.front();
  const double pos = s / grid.dt();
  const auto k = std::min(static_cast<std::size_t>(pos), grid.n_slices() - 1);
  const double w = pos - static_cast<double>(k);
  return (1.0 - w) * values[k] + w * values[k + 1];
}

ResetSchedule reset_schedule(const AggregatePath& agg, const ModelParams& params) {
  check_path(agg);
  const double r = discount_intensity(params);
  const double z = r * agg.grid.dt();
  const double carry = std::exp(-z);
  const std::size_t n = agg.grid.n_slices();

  ResetSchedule out{agg.grid, std::vector<double>(n + 1)};
  double acc = tail_value(agg, r);
  out.values[n] = params.alpha * acc;
  for (std::size_t k = n; k-- > 0;) {
    acc = slice_integral(agg.values[k], agg.values[k + 1], z) + carry * acc;
    out.values[k] = params.alpha * acc;
  }
  return out;
}

double optimal_reset(double tau, const AggregatePath& agg, const ModelParams& params) {
  check_path(agg);
  const double h = agg.grid.horizon();
  if (!(tau >= 0 && tau <= h)) {
    throw Error(Errc::OutOfRange, "tau = " + std::to_string(tau) + " outside [0, horizon]");
  }
  const double r = discount_intensity(params);
  const double dt = agg.grid.dt();
  const std::size_t n = agg.grid.n_slices();
  const auto k = std::min(static_cast<std::size_t>(tau / dt), n);

  double acc = tail_value(agg, r);
  for (std::size_t j = n; j-- > k + 1;) {
    acc = slice_integral(agg.values[j], agg.values[j + 1], r * dt) + std::exp(-r * dt) * acc;
  }
  if (k == n) return params.alpha * acc;

  const double gap = agg.grid[k + 1] - tau;
  const double z = r * gap;
  acc = slice_integral(agg.at(tau), agg.values[k + 1], z) + std::exp(-z) * acc;
  return params.alpha * acc;
}

double decay_rate(const ModelParams& params) {
  const double rho = params.rho;
  const double c = params.theta * (rho + params.theta) * (1.0 - params.alpha);
  if (!(c > 0)) {
    throw Error(Errc::EquilibriumBreakdown,
                "no positive decay rate for alpha = " + std::to_string(params.alpha) +
                    ", theta = " + std::to_string(params.theta));
  }
  // Positive root written to avoid cancellation when rho^2 >> c.
  const double root = std::sqrt(rho * rho + 4.0 * c);
  return 2.0 * c / (rho + root);
}

IRFResult calvo_irf_closed_form(const ModelParams& params, const TimeGrid& grid) {
  const double lambda = decay_rate(params);
  IRFResult out{grid, std::vector<double>(grid.size()), {}};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.output[k] = params.delta * std::exp(-lambda * grid[k]);
  }
  if (params.delta != 0.0) {
    out.stats.area = params.delta / lambda;
    out.stats.half_life = std::log(2.0) / lambda;
  }
  out.stats.tail_rate = lambda;
  return out;
}

SliceWeights slice_weights(double theta, double dt) {
  const double z = theta * dt;
  const double reach = -std::expm1(-z);
  const double left = slope_weight(z);
  return {std::exp(-z), left, reach - left};
}

AggregatePath aggregate_law_of_motion(double x0, const ResetSchedule& resets, double theta,
                                      const TimeGrid& grid) {
  if (!(resets.grid == grid) || resets.values.size() != grid.size()) {
    throw Error(Errc::GridMismatch, "reset schedule and aggregation grid differ");
  }
  if (!(theta >= 0)) throw Error(Errc::OutOfRange, "theta must be >= 0");
  const SliceWeights w = slice_weights(theta, grid.dt());
  AggregatePath out{grid, std::vector<double>(grid.size()), std::nullopt};
  out.values[0] = x0;
  for (std::size_t k = 0; k < grid.n_slices(); ++k) {
    out.values[k + 1] = w.decay * out.values[k] + w.left * resets.values[k] + w.right * resets.values[k + 1];
  }
  return out;
}

}  // namespace stickymfg
