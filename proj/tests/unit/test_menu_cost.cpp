#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "stickymfg/menu_cost.hpp"
#include "test_helpers.hpp"

using namespace stickymfg;
using testing::error_code;

namespace {

ModelParams menu(double psi = 0.01) {
  ModelParams p = testing::base_params();
  p.psi = psi;
  p.theta = 0.0;
  return p;
}

// Half-width from value matching and smooth pasting of the analytic
// inaction-region solution v = B x^2 / rho + 2 B D / rho^2 + A cosh(k x),
// D = sigma^2 / 2, k = sqrt(rho / D); bisection on the value-matching residual.
double analytic_halfwidth(const ModelParams& p) {
  const double d = 0.5 * p.sigma * p.sigma, k = std::sqrt(p.rho / d), b = p.b_curv, r = p.rho;
  auto residual = [&](double xb) {
    const double a = -2.0 * b * xb / (r * k * std::sinh(k * xb));
    return b * xb * xb / r + a * (std::cosh(k * xb) - 1.0) - p.psi;
  };
  double lo = 1e-4, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (residual(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

double tent_error(const CrossSection& f, const PolicyBand& band) {
  const double xb = band.half_width();
  double err = 0.0;
  for (std::size_t i = 0; i < f.sgrid.size(); ++i) {
    const double tent = std::max(0.0, xb - std::abs(f.sgrid[i] - band.reset[0])) / (xb * xb);
    err = std::max(err, std::abs(f.density[i] - tent));
  }
  return err * xb;  // relative to the peak 1 / xb
}

}  // namespace

TEST_SUITE("menu_cost_policy") {
  TEST_CASE("band half-width at the reference calibration") {
    const ModelParams p = menu();
    const MenuCostSolution sol = solve_stationary_vi(p, 0.0, menu_cost_grid(p, 801));
    CHECK(band_halfwidth_estimate(p) == doctest::Approx(0.0740).epsilon(1e-3));
    CHECK(testing::rel_err(sol.band.half_width(), band_halfwidth_estimate(p)) < 0.05);
    CHECK(testing::rel_err(sol.band.half_width(), analytic_halfwidth(p)) < 2e-3);
    CHECK(sol.band.lower[0] < sol.band.reset[0]);
    CHECK(sol.band.reset[0] < sol.band.upper[0]);
    CHECK(std::abs(sol.band.reset[0]) < 1e-9);
  }

  TEST_CASE("fourth-root scaling in the menu cost") {
    const ModelParams a = menu(0.01), b = menu(0.02);
    const double wa = solve_stationary_vi(a, 0.0, menu_cost_grid(a, 801)).band.half_width();
    const double wb = solve_stationary_vi(b, 0.0, menu_cost_grid(b, 801)).band.half_width();
    CHECK(std::abs(wb / wa - std::pow(2.0, 0.25)) < 0.02 * std::pow(2.0, 0.25));
  }

  TEST_CASE("band edge is sub-grid accurate across resolutions") {
    const ModelParams p = menu();
    const double exact = analytic_halfwidth(p);
    for (std::size_t n : {401, 801, 1601, 3201}) {
      const double w = solve_stationary_vi(p, 0.0, StateGrid::symmetric(0.29, n)).band.half_width();
      CHECK(std::abs(w - exact) < 1e-3 * exact);
    }
    const double coarse = solve_stationary_vi(p, 0.0, StateGrid::symmetric(0.29, 201)).band.half_width();
    CHECK(std::abs(coarse - exact) < 0.02 * exact);
  }

  TEST_CASE("value is even and bounded by the adjustment value") {
    const ModelParams p = menu();
    const StateGrid g = menu_cost_grid(p, 801);
    const MenuCostSolution sol = solve_stationary_vi(p, 0.0, g);
    const auto& v = sol.value.values;
    const double vmin = *std::min_element(v.begin(), v.end());
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(std::abs(v[i] - v[g.size() - 1 - i]) < 1e-9 * vmin);
      CHECK(v[i] <= vmin + p.psi + 1e-12);
    }
  }

  TEST_CASE("target shifts the band") {
    const ModelParams p = menu();
    const StateGrid g = StateGrid::symmetric(0.4, 1001);
    const PolicyBand base = solve_stationary_vi(p, 0.0, g).band;
    const PolicyBand shifted = solve_stationary_vi(p, 0.02, g).band;
    CHECK(shifted.reset[0] == doctest::Approx(0.02).epsilon(1e-6));
    CHECK(shifted.half_width() == doctest::Approx(base.half_width()).epsilon(1e-2));
  }

  TEST_CASE("free adjustment collapses the band") {
    const ModelParams p = menu(0.0);
    const StateGrid g = StateGrid::symmetric(0.3, 301);
    const MenuCostSolution sol = solve_stationary_vi(p, 0.05, g);
    CHECK(sol.band.half_width() == 0.0);
    CHECK(sol.band.reset[0] == 0.05);
    for (double v : sol.value.values) CHECK(v == 0.0);
  }

  TEST_CASE("solver errors") {
    ModelParams p = menu();
    CHECK(error_code([&] { solve_stationary_vi(p, 0.0, StateGrid::symmetric(0.05, 101)); }) == Errc::DegenerateGrid);
    p.sigma = 0.0;
    CHECK(error_code([&] { solve_stationary_vi(p, 0.0, StateGrid::symmetric(0.3, 101)); }) == Errc::DegenerateGrid);
  }

  TEST_CASE("stationary density is the tent") {
    const ModelParams p = menu();
    const StateGrid g = menu_cost_grid(p, 801);
    const PolicyBand band = solve_stationary_vi(p, 0.0, g).band;
    const CrossSection f = stationary_density(band, p, g);
    CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(tent_error(f, band) < 0.01);
  }

  TEST_CASE("density evolution under a band") {
    const ModelParams p = menu();
    const StateGrid g = menu_cost_grid(p, 801);
    const PolicyBand band = solve_stationary_vi(p, 0.0, g).band;
    const TimeGrid grid(2.0, 200);
    const CrossSection tent = stationary_density(band, p, g);
    const auto still = evolve_density(tent, band, p, grid);
    CHECK(tent_error(still.back(), band) < 0.01);

    const CrossSection shocked = shift_density(tent, -0.01);
    const auto moving = evolve_density(shocked, band, p, grid);
    for (const CrossSection& f : moving) {
      CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-6));
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] < band.lower[0] - g.spacing() || g[i] > band.upper[0] + g.spacing()) REQUIRE(f.density[i] == 0.0);
        REQUIRE(f.density[i] >= 0.0);
      }
    }
    CHECK(std::abs(moving.back().mean()) < 1e-4);
  }

  TEST_CASE("time-dependent problem with a flat aggregate") {
    const ModelParams p = menu();
    const StateGrid g = menu_cost_grid(p, 401);
    const TimeGrid grid(2.0, 50);
    const AggregatePath flat{grid, std::vector<double>(grid.size(), 0.0), 1.0};
    const MenuCostSolution dyn = solve_time_dependent_vi(p, flat, g);
    const PolicyBand st = solve_stationary_vi(p, 0.0, g).band;
    REQUIRE(dyn.band.tgrid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(dyn.band.lower[k] == doctest::Approx(st.lower[0]).epsilon(1e-6));
      CHECK(dyn.band.upper[k] == doctest::Approx(st.upper[0]).epsilon(1e-6));
    }
  }

  TEST_CASE("time-dependent band follows a moving target") {
    ModelParams p = menu();
    p.alpha = 0.5;
    const StateGrid g = menu_cost_grid(p, 401);
    const TimeGrid grid(5.0, 100);
    AggregatePath agg{grid, std::vector<double>(grid.size()), 1.0};
    for (std::size_t k = 0; k < grid.size(); ++k) agg.values[k] = -0.02 * std::exp(-grid[k]);
    const MenuCostSolution dyn = solve_time_dependent_vi(p, agg, g);
    CHECK(dyn.band.reset[0] < 0.0);
    CHECK(dyn.band.reset[0] > p.alpha * agg.values[0]);
    CHECK(std::abs(dyn.band.reset.back() - p.alpha * agg.values.back()) < g.spacing());
  }
}
