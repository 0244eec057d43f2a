#pragma once

#include <vector>

#include "stickymfg/calvo.hpp"
#include "stickymfg/params.hpp"

namespace stickymfg {

/// Cross-sectional density of markup gaps on a state grid. Mass and moments
/// use the trapezoid rule.
struct CrossSection {
  StateGrid sgrid;
  std::vector<double> density;

  double mass() const;
  double mean() const;
};

/// Point mass of unit weight at `x`, split between the two neighbouring nodes
/// so that both mass and first moment are exact.
CrossSection point_mass(const StateGrid& sgrid, double x);

/// Translates every markup gap by `shift`, moving each node's mass with the
/// same two-node split so mass and mean are preserved exactly (mass pushed
/// past the grid ends is collected on the end nodes).
CrossSection shift_density(const CrossSection& f, double shift);

/// Stationary cross-section of the Calvo economy with resets to `reset` at
/// rate theta; zero-flux walls at the grid ends.
CrossSection calvo_stationary_density(const ModelParams& params, const StateGrid& sgrid,
                                      double reset = 0.0);

/// Forward equation of the Calvo cross-section: diffusion (implicit, zero-flux
/// walls) plus Poisson reinjection at the reset schedule, the latter stepped
/// exactly so the mean follows aggregate_law_of_motion.
std::vector<CrossSection> evolve_calvo_density(const CrossSection& f0, const ResetSchedule& resets,
                                               const ModelParams& params);

/// Trapezoid mean of each cross-section.
std::vector<double> mean_path(const std::vector<CrossSection>& sections);

}  // namespace stickymfg
