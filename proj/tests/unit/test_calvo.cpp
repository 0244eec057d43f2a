#include <cmath>
#include <vector>

#include "doctest.h"
#include "stickymfg/calvo.hpp"
#include "test_helpers.hpp"

using namespace stickymfg;
using testing::error_code;

namespace {

ModelParams calvo(double alpha, double rho = 0.0, double theta = 1.0) {
  ModelParams p = testing::base_params();
  p.alpha = alpha;
  p.rho = rho;
  p.theta = theta;
  return p;
}

AggregatePath exponential_path(const TimeGrid& grid, double scale, double rate) {
  AggregatePath agg{grid, std::vector<double>(grid.size()), rate};
  for (std::size_t k = 0; k < grid.size(); ++k) agg.values[k] = scale * std::exp(-rate * grid[k]);
  return agg;
}

// Fixed point of the reset integral and the aggregation ODE computed by brute
// force: O(n^2) trapezoid sums for the reset value, midpoint-constant targets
// for the ODE, then a log-linear fit of the converged path.
double brute_force_decay_rate(const ModelParams& p) {
  const std::size_t n = 1500;
  const double h = 15.0, dt = h / static_cast<double>(n);
  const double r = p.rho + p.theta;
  std::vector<double> x(n + 1), reset(n + 1), discount(n + 1);
  for (std::size_t m = 0; m <= n; ++m) discount[m] = std::exp(-r * dt * static_cast<double>(m));
  for (std::size_t k = 0; k <= n; ++k) x[k] = -p.delta * std::exp(-p.theta * dt * static_cast<double>(k));
  for (int it = 0; it < 400; ++it) {
    const double kappa = std::log(x[n - 100] / x[n]) / (100 * dt);
    for (std::size_t i = 0; i <= n; ++i) {
      double acc = 0.0;
      for (std::size_t j = i; j <= n; ++j) {
        const double w = (j == i || j == n) ? 0.5 : 1.0;
        acc += w * discount[j - i] * x[j];
      }
      acc = r * dt * acc + r * x[n] * discount[n - i] / (r + kappa);
      reset[i] = p.alpha * acc;
    }
    std::vector<double> next(n + 1);
    next[0] = -p.delta;
    const double decay = std::exp(-p.theta * dt);
    for (std::size_t k = 0; k < n; ++k) {
      next[k + 1] = decay * next[k] + (1.0 - decay) * 0.5 * (reset[k] + reset[k + 1]);
    }
    double change = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      change = std::max(change, std::abs(next[k] - x[k]));
      x[k] = 0.5 * x[k] + 0.5 * next[k];
    }
    if (change < 1e-14) break;
  }
  const auto a = static_cast<std::size_t>(2.0 / dt), b = static_cast<std::size_t>(8.0 / dt);
  return std::log(x[a] / x[b]) / (dt * static_cast<double>(b - a));
}

}  // namespace

TEST_SUITE("calvo_policy") {
  TEST_CASE("zero aggregate gives a zero reset") {
    const TimeGrid grid(10, 100);
    const AggregatePath agg{grid, std::vector<double>(grid.size(), 0.0), 1.0};
    const ResetSchedule rs = reset_schedule(agg, calvo(0.5));
    for (double v : rs.values) CHECK(v == 0.0);
    CHECK(optimal_reset(3.3, agg, calvo(0.5)) == 0.0);
  }

  TEST_CASE("constant aggregate") {
    const TimeGrid grid(10, 100);
    const AggregatePath agg{grid, std::vector<double>(grid.size(), -0.02), 0.0};
    for (double tau : {0.0, 2.5, 10.0}) {
      CHECK(optimal_reset(tau, agg, calvo(0.5, 0.02)) == doctest::Approx(-0.01).epsilon(1e-12));
    }
  }

  TEST_CASE("exponential aggregate against direct quadrature") {
    const ModelParams p = calvo(0.5, 0.02);
    const TimeGrid grid(10, 400);
    const AggregatePath agg = exponential_path(grid, 1.0, 0.5);
    const double r = p.rho + p.theta;
    // composite Simpson on [0, 60] of r e^{-r u} alpha e^{-0.5 u}
    const std::size_t m = 200000;
    const double h = 60.0 / m;
    double s = 0.0;
    for (std::size_t i = 0; i <= m; ++i) {
      const double u = h * static_cast<double>(i);
      const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += w * r * std::exp(-r * u) * p.alpha * std::exp(-0.5 * u);
    }
    s *= h / 3.0;
    CHECK(s == doctest::Approx(0.3355).epsilon(1e-3));
    // the path is linear between nodes, so the error is second order in dt
    const double coarse = std::abs(optimal_reset(0.0, agg, p) - s);
    const double fine = std::abs(optimal_reset(0.0, exponential_path(TimeGrid(10, 800), 1.0, 0.5), p) - s);
    CHECK(coarse < 1e-4 * s);
    CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.05));
  }

  TEST_CASE("reset schedule matches pointwise evaluation and is linear in the path") {
    const ModelParams p = calvo(0.7, 0.05);
    const TimeGrid grid(8, 160);
    const AggregatePath a = exponential_path(grid, -0.01, 0.4);
    AggregatePath b{grid, std::vector<double>(grid.size()), 0.4};
    for (std::size_t k = 0; k < grid.size(); ++k) b.values[k] = 0.003 * std::exp(-0.4 * grid[k]) * (1 + grid[k]);
    AggregatePath mix{grid, std::vector<double>(grid.size()), 0.4};
    for (std::size_t k = 0; k < grid.size(); ++k) mix.values[k] = 2.0 * a.values[k] - 3.0 * b.values[k];
    const ResetSchedule ra = reset_schedule(a, p), rb = reset_schedule(b, p), rm = reset_schedule(mix, p);
    for (std::size_t k = 0; k < grid.size(); k += 7) {
      CHECK(ra.values[k] == doctest::Approx(optimal_reset(grid[k], a, p)).epsilon(1e-10));
      CHECK(rm.values[k] == doctest::Approx(2.0 * ra.values[k] - 3.0 * rb.values[k]).epsilon(1e-10));
    }
  }

  TEST_CASE("reset errors") {
    const TimeGrid grid(10, 100);
    AggregatePath agg = exponential_path(grid, -0.01, 1.0);
    CHECK(error_code([&] { optimal_reset(-0.1, agg, calvo(0.5)); }) == Errc::OutOfRange);
    CHECK(error_code([&] { optimal_reset(10.5, agg, calvo(0.5)); }) == Errc::OutOfRange);
    agg.extrapolation_rate.reset();
    CHECK(error_code([&] { optimal_reset(1.0, agg, calvo(0.5)); }) == Errc::MissingExtrapolation);
  }

  TEST_CASE("decay rate examples") {
    CHECK(decay_rate(calvo(0.0)) == doctest::Approx(1.0));
    CHECK(decay_rate(calvo(0.75)) == doctest::Approx(0.5));
    CHECK(error_code([] { decay_rate(calvo(1.2)); }) == Errc::EquilibriumBreakdown);
    CHECK(error_code([] { decay_rate(calvo(1.0)); }) == Errc::EquilibriumBreakdown);
    const ModelParams p = calvo(0.3, 0.04, 1.5);
    const double l = decay_rate(p);
    CHECK(l * l + p.rho * l - p.theta * (p.rho + p.theta) * (1 - p.alpha) == doctest::Approx(0.0).scale(1.0));
  }

  TEST_CASE("decay rate against a brute-force fixed point") {
    for (double alpha : {0.0, 0.75}) {
      const ModelParams p = calvo(alpha);
      CHECK(testing::rel_err(brute_force_decay_rate(p), decay_rate(p)) < 0.01);
    }
    const ModelParams p = calvo(0.5, 0.02);
    CHECK(testing::rel_err(brute_force_decay_rate(p), decay_rate(p)) < 0.01);
  }

  TEST_CASE("decay rate monotonicity and limits") {
    double previous = INFINITY;
    for (double a : {-10.0, -1.0, 0.0, 0.5, 0.9, 0.99}) {
      const double l = decay_rate(calvo(a));
      CHECK(l < previous);
      previous = l;
    }
    CHECK(decay_rate(calvo(0.5, 0.0, 2.0)) > decay_rate(calvo(0.5, 0.0, 1.0)));
    CHECK(decay_rate(calvo(1.0 - 1e-10)) < 1e-4);
    CHECK(decay_rate(calvo(-1e8)) > 1e3);
    ModelParams flat = calvo(0.5, 0.02);
    const double l = decay_rate(flat);
    flat.b_curv = 3.0;
    CHECK(decay_rate(flat) == l);
  }

  TEST_CASE("closed-form impulse response") {
    const TimeGrid grid(10, 400);
    ModelParams p = calvo(0.0);
    const IRFResult base = calvo_irf_closed_form(p, grid);
    CHECK(base.stats.area == doctest::Approx(0.01));
    CHECK(base.stats.half_life == doctest::Approx(std::log(2.0)));
    CHECK_FALSE(base.stats.hump);
    CHECK(base.stats.peak_time == 0.0);
    CHECK(base.output[40] == doctest::Approx(0.01 * std::exp(-1.0)));
    p.alpha = 0.75;
    CHECK(calvo_irf_closed_form(p, grid).stats.area / base.stats.area == doctest::Approx(2.0));
    CHECK(calvo_irf_closed_form(calvo(0.99), grid).stats.area == doctest::Approx(10 * base.stats.area));
    CHECK(calvo_irf_closed_form(calvo(-1e4), grid).stats.area < 0.02 * base.stats.area);
    p.delta = 0.0;
    const IRFResult zero = calvo_irf_closed_form(p, grid);
    for (double y : zero.output) CHECK(y == 0.0);
    CHECK(zero.stats.area == 0.0);
  }

  TEST_CASE("closed-form areas are convex in alpha") {
    const TimeGrid grid(10, 100);
    std::vector<double> area;
    for (int i = 0; i <= 6; ++i) area.push_back(calvo_irf_closed_form(calvo(0.15 * i), grid).stats.area);
    for (std::size_t i = 1; i + 1 < area.size(); ++i) CHECK(area[i + 1] - 2 * area[i] + area[i - 1] > 0);
  }

  TEST_CASE("aggregate law of motion") {
    const TimeGrid grid(10, 200);
    const ResetSchedule zero{grid, std::vector<double>(grid.size(), 0.0)};
    const AggregatePath decay = aggregate_law_of_motion(-0.01, zero, 1.0, grid);
    for (std::size_t k = 0; k < grid.size(); k += 13) {
      CHECK(decay.values[k] == doctest::Approx(-0.01 * std::exp(-grid[k])).epsilon(1e-13));
    }
    const ResetSchedule constant{grid, std::vector<double>(grid.size(), -0.01)};
    for (double v : aggregate_law_of_motion(-0.01, constant, 1.0, grid).values) {
      CHECK(v == doctest::Approx(-0.01).epsilon(1e-14));
    }
    const ResetSchedule wrong{TimeGrid(10, 100), std::vector<double>(101, 0.0)};
    CHECK(error_code([&] { aggregate_law_of_motion(-0.01, wrong, 1.0, grid); }) == Errc::GridMismatch);
  }

  TEST_CASE("self-consistent half-target recovers theta / 2") {
    const TimeGrid grid(10, 2000);
    AggregatePath x = exponential_path(grid, -0.01, 1.0);
    for (int it = 0; it < 200; ++it) {
      ResetSchedule target{grid, x.values};
      for (double& v : target.values) v *= 0.5;
      x = aggregate_law_of_motion(-0.01, target, 1.0, grid);
    }
    const double rate = std::log(x.values[200] / x.values[1800]) / (grid[1800] - grid[200]);
    CHECK(testing::rel_err(rate, 0.5) < 1e-3);
  }
}
