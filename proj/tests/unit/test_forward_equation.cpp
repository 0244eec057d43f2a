#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "stickymfg/calvo.hpp"
#include "stickymfg/forward_equation.hpp"
#include "test_helpers.hpp"

using namespace stickymfg;

namespace {

double second_moment(const CrossSection& f) {
  const auto w = f.sgrid.trapezoid_weights();
  double m = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) m += w[i] * f.density[i] * f.sgrid[i] * f.sgrid[i];
  return m / f.mass();
}

}  // namespace

TEST_SUITE("forward_equation") {
  TEST_CASE("point mass keeps mass and mean exact") {
    const StateGrid g = StateGrid::symmetric(1.0, 201);
    for (double x : {0.0, 0.013, -0.4271, 0.999}) {
      const CrossSection f = point_mass(g, x);
      CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(f.mean() == doctest::Approx(x).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("translation preserves mass and shifts the mean") {
    // wide grid: tail mass pushed past the end would be collected there
    const StateGrid g = StateGrid::symmetric(2.0, 801);
    ModelParams p = testing::base_params();
    const CrossSection f = calvo_stationary_density(p, g);
    const CrossSection s = shift_density(f, -0.0137);
    CHECK(s.mass() == doctest::Approx(f.mass()).epsilon(1e-13));
    CHECK(s.mean() == doctest::Approx(f.mean() - 0.0137).epsilon(1e-12));
    CHECK(std::all_of(s.density.begin(), s.density.end(), [](double v) { return v >= 0; }));
  }

  TEST_CASE("Calvo stationary density matches the renewal moments") {
    ModelParams p = testing::base_params();
    const StateGrid g = StateGrid::symmetric(1.5, 1201);
    const CrossSection f = calvo_stationary_density(p, g);
    CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(f.mean()) < 1e-12);
    CHECK(testing::rel_err(second_moment(f), p.sigma * p.sigma / p.theta) < 0.01);
    // Laplace peak sqrt(theta / 2) / sigma
    CHECK(testing::rel_err(f.density[600], std::sqrt(0.5) / p.sigma) < 0.02);
    p.theta = 0.0;
    CHECK(testing::error_code([&] { calvo_stationary_density(p, g); }) == Errc::OutOfRange);
  }

  TEST_CASE("Calvo evolution follows the aggregate law of motion") {
    ModelParams p = testing::base_params();
    p.alpha = 0.5;
    const TimeGrid grid(10, 400);
    const StateGrid g = StateGrid::symmetric(6 * p.sigma * std::sqrt(p.horizon), 801);
    const CrossSection f0 = shift_density(calvo_stationary_density(p, g), -p.delta);
    ResetSchedule resets{grid, std::vector<double>(grid.size())};
    for (std::size_t k = 0; k < grid.size(); ++k) resets.values[k] = -0.004 * std::exp(-0.7 * grid[k]);
    const auto sections = evolve_calvo_density(f0, resets, p);
    REQUIRE(sections.size() == grid.size());
    const std::vector<double> mean = mean_path(sections);
    const AggregatePath law = aggregate_law_of_motion(f0.mean(), resets, p.theta, grid);
    for (std::size_t k = 0; k < grid.size(); k += 10) {
      CHECK(mean[k] == doctest::Approx(law.values[k]).epsilon(1e-9).scale(1e-3));
      CHECK(sections[k].mass() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(*std::min_element(sections[k].density.begin(), sections[k].density.end()) >= 0.0);
    }
  }
}
