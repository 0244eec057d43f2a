#include "stickymfg/forward_equation.hpp"

#include <algorithm>
#include <cmath>

#include "density_ops.hpp"
#include "stickymfg/error.hpp"
#include "tridiagonal.hpp"

namespace stickymfg {

namespace detail {

void deposit(std::vector<double>& density, const StateGrid& sgrid, const std::vector<double>& weights,
             double x, double mass) {
  const std::size_t n = sgrid.size();
  const double pos = std::clamp((x - sgrid.x_min()) / sgrid.spacing(), 0.0, static_cast<double>(n - 1));
  auto j = std::min(static_cast<std::size_t>(pos), n - 2);
  const double a = pos - static_cast<double>(j);
  density[j] += mass * (1.0 - a) / weights[j];
  density[j + 1] += mass * a / weights[j + 1];
}

}  // namespace detail

namespace {

// Zero-flux Laplacian, conservative with respect to the trapezoid weights.
detail::Tridiagonal neumann_operator(const StateGrid& sgrid, double diffusion, double shift,
                                     double scale) {
  // Builds shift * I - scale * D * Laplacian.
  const std::size_t n = sgrid.size();
  const double k = scale * diffusion / (sgrid.spacing() * sgrid.spacing());
  detail::Tridiagonal op(n);
  for (std::size_t i = 0; i < n; ++i) {
    op.diag[i] = shift + 2.0 * k;
    if (i == 0) {
      op.upper[i] = -2.0 * k;
    } else if (i + 1 == n) {
      op.lower[i] = -2.0 * k;
    } else {
      op.lower[i] = -k;
      op.upper[i] = -k;
    }
  }
  return op;
}

}  // namespace

double CrossSection::mass() const {
  const auto w = sgrid.trapezoid_weights();
  double m = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) m += w[i] * density[i];
  return m;
}

double CrossSection::mean() const {
  const auto w = sgrid.trapezoid_weights();
  double m = 0.0;
  double first = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) {
    m += w[i] * density[i];
    first += w[i] * sgrid[i] * density[i];
  }
  return first / m;
}

CrossSection point_mass(const StateGrid& sgrid, double x) {
  CrossSection out{sgrid, std::vector<double>(sgrid.size(), 0.0)};
  detail::deposit(out.density, sgrid, sgrid.trapezoid_weights(), x, 1.0);
  return out;
}

CrossSection shift_density(const CrossSection& f, double shift) {
  const auto w = f.sgrid.trapezoid_weights();
  CrossSection out{f.sgrid, std::vector<double>(f.sgrid.size(), 0.0)};
  for (std::size_t i = 0; i < f.density.size(); ++i) {
    if (f.density[i] == 0.0) continue;
    detail::deposit(out.density, f.sgrid, w, f.sgrid[i] + shift, w[i] * f.density[i]);
  }
  return out;
}

CrossSection calvo_stationary_density(const ModelParams& params, const StateGrid& sgrid, double reset) {
  if (!(params.theta > 0)) throw Error(Errc::OutOfRange, "Calvo stationary density needs theta > 0");
  const double diffusion = 0.5 * params.sigma * params.sigma;
  const auto op = neumann_operator(sgrid, diffusion, params.theta, 1.0);
  CrossSection source = point_mass(sgrid, reset);
  for (double& v : source.density) v *= params.theta;
  CrossSection out{sgrid, {}};
  if (!op.solve(source.density, out.density)) {
    throw Error(Errc::CflViolation, "stationary Calvo system is not an M-matrix");
  }
  return out;
}

std::vector<CrossSection> evolve_calvo_density(const CrossSection& f0, const ResetSchedule& resets,
                                               const ModelParams& params) {
  const TimeGrid& grid = resets.grid;
  if (resets.values.size() != grid.size()) throw Error(Errc::GridMismatch, "reset schedule size");
  const StateGrid& sgrid = f0.sgrid;
  const auto w = sgrid.trapezoid_weights();
  const double dt = grid.dt();
  const double diffusion = 0.5 * params.sigma * params.sigma;
  const auto op = neumann_operator(sgrid, diffusion, 1.0, dt);
  const SliceWeights sw = slice_weights(params.theta, dt);
  const double reach = 1.0 - sw.decay;

  std::vector<CrossSection> out;
  out.reserve(grid.size());
  out.push_back(f0);
  std::vector<double> work;
  for (std::size_t k = 0; k < grid.n_slices(); ++k) {
    const CrossSection& prev = out.back();
    const double m_prev = prev.mass();
    work = prev.density;
    if (reach > 0) {
      for (double& v : work) v *= sw.decay;
      const double target = (sw.left * resets.values[k] + sw.right * resets.values[k + 1]) / reach;
      detail::deposit(work, sgrid, w, target, reach * m_prev);
    }
    CrossSection next{sgrid, {}};
    if (diffusion > 0) {
      if (!op.solve(work, next.density)) throw Error(Errc::CflViolation, "implicit diffusion step failed");
    } else {
      next.density = std::move(work);
    }
    if (std::abs(next.mass() - m_prev) > 1e-6) {
      throw Error(Errc::MassLeak, "Calvo density mass drifted at step " + std::to_string(k));
    }
    out.push_back(std::move(next));
  }
  return out;
}

std::vector<double> mean_path(const std::vector<CrossSection>& sections) {
  std::vector<double> out;
  out.reserve(sections.size());
  for (const auto& s : sections) out.push_back(s.mean());
  return out;
}

}  // namespace stickymfg
