#include "stickymfg/menu_cost.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <limits>
#include <string>

#include "density_ops.hpp"
#include "stickymfg/error.hpp"
#include "tridiagonal.hpp"

namespace stickymfg {

namespace {

constexpr std::size_t kMaxPolicySweeps = 500;

// One implicit obstacle problem on the state grid:
//   max{ shift v - D v'' - rhs, v - (v_reset + psi) } = 0
// with zero-flux walls at the grid ends.
struct Obstacle {
  const StateGrid& sgrid;
  double diffusion;
  double shift;
  double psi;
  std::vector<double> rhs;
};

struct Policy {
  std::vector<char> adjust;
  std::size_t reset = 0;
};

double continuation_residual(const Obstacle& ob, const std::vector<double>& v, std::size_t i) {
  const std::size_t n = v.size();
  const double k = ob.diffusion / (ob.sgrid.spacing() * ob.sgrid.spacing());
  const double left = i == 0 ? v[1] : v[i - 1];
  const double right = i + 1 == n ? v[n - 2] : v[i + 1];
  return ob.shift * v[i] - k * (left - 2.0 * v[i] + right) - ob.rhs[i];
}

// Howard policy iteration. The reset node is re-selected as argmin v after
// every linear solve; the loop ends when neither the policy nor the reset
// node changes.
std::vector<double> solve_obstacle(const Obstacle& ob, Policy& pol, std::size_t& sweeps) {
  const std::size_t n = ob.sgrid.size();
  const double k = ob.diffusion / (ob.sgrid.spacing() * ob.sgrid.spacing());
  std::vector<double> a, b, v(n), rhs_a(n), rhs_b(n);

  for (std::size_t it = 0; it < kMaxPolicySweeps; ++it) {
    ++sweeps;
    detail::Tridiagonal op(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (pol.adjust[i] && i != pol.reset) {
        op.diag[i] = 1.0;
        rhs_a[i] = ob.psi;
        rhs_b[i] = 1.0;
        continue;
      }
      op.diag[i] = ob.shift + 2.0 * k;
      if (i == 0) {
        op.upper[i] = -2.0 * k;
      } else if (i + 1 == n) {
        op.lower[i] = -2.0 * k;
      } else {
        op.lower[i] = -k;
        op.upper[i] = -k;
      }
      rhs_a[i] = ob.rhs[i];
      rhs_b[i] = 0.0;
    }
    if (!op.solve(rhs_a, a) || !op.solve(rhs_b, b)) {
      throw Error(Errc::NoConvergence, "policy-iteration system lost diagonal dominance");
    }
    const double v_reset = a[pol.reset] / (1.0 - b[pol.reset]);
    for (std::size_t i = 0; i < n; ++i) v[i] = a[i] + b[i] * v_reset;

    const auto best = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    bool changed = best != pol.reset;
    for (std::size_t i = 0; i < n; ++i) {
      char adjust = 0;
      if (i != best) {
        const double gap = v[i] - v[best] - ob.psi;
        adjust = gap > continuation_residual(ob, v, i) ? 1 : 0;
      }
      changed = changed || adjust != pol.adjust[i];
      pol.adjust[i] = adjust;
    }
    pol.reset = best;
    if (!changed) return v;
  }

  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::max(continuation_residual(ob, v, i), v[i] - v[pol.reset] - ob.psi);
    residual = std::max(residual, std::abs(r));
  }
  throw Error(Errc::NoConvergence, "policy iteration hit " + std::to_string(kMaxPolicySweeps) +
                                       " sweeps, residual " + std::to_string(residual));
}

// Vertex of the parabola through v at r and its neighbours; nullopt when the
// stencil leaves the grid or is not convex.
std::optional<double> vertex_offset(const std::vector<double>& v, std::size_t r) {
  if (r == 0 || r + 1 >= v.size()) return std::nullopt;
  const double curv = v[r - 1] - 2.0 * v[r] + v[r + 1];
  if (!(curv > 0)) return std::nullopt;
  return std::clamp(0.5 * (v[r - 1] - v[r + 1]) / curv, -0.5, 0.5);
}

// Sub-grid reset point. The vertex from the stencil at the minimising node is
// blended with the one from the stencil at the neighbour on the vertex side,
// with weight |offset|, so the estimate stays continuous when the minimising node moves.
double refine_reset(const StateGrid& sgrid, const std::vector<double>& v, std::size_t r) {
  const double h = sgrid.spacing();
  const auto o = vertex_offset(v, r);
  if (!o) return sgrid[r];
  const double own = sgrid[r] + *o * h;
  if (*o == 0.0) return own;
  const std::size_t nb = *o > 0 ? r + 1 : r - 1;
  const auto on = vertex_offset(v, nb);
  if (!on) return own;
  const double other = sgrid[nb] + *on * h;
  const double w = std::abs(*o);
  return (1.0 - w) * own + w * other;
}

// Gaps below this fraction of psi enter the band-edge fit.
constexpr double kEdgeWindow = 0.0625;

// Edge of the inaction region on the side `dir` of the reset node. sqrt(gap)
// vanishes linearly at the edge, so a weighted quadratic fit of sqrt(gap)
// against distance is extrapolated to its root. Weights fall to zero as the
// gap approaches 0 or window, which keeps the estimate continuous in the
// value function as nodes enter or leave the fit.
double locate_edge(const StateGrid& sgrid, const std::vector<double>& gap, std::size_t in,
                   std::size_t reset, double dir, double window) {
  const double h = sgrid.spacing();
  const std::size_t n = gap.size();
  double m[3][4] = {};
  std::size_t used = 0;
  // Gaps at rounding level mark the adjustment region.
  const double floor = 1e-9 * window;
  for (std::size_t i = reset;; i = dir > 0 ? i + 1 : i - 1) {
    const double g = gap[i];
    if (i != reset && !(g > floor)) break;
    if (g > floor && g < window) {
      const double w = g * (1.0 - g / window) * (1.0 - g / window);
      const double t = dir * (sgrid[i] - sgrid[in]) / h;
      const double basis[3] = {1.0, t, t * t};
      const double s = std::sqrt(g);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) m[a][b] += w * basis[a] * basis[b];
        m[a][3] += w * basis[a] * s;
      }
      ++used;
    }
    if ((dir > 0 && i + 1 == n) || (dir < 0 && i == 0)) break;
  }
  const double fallback = sgrid[in] + dir * 0.5 * h;
  if (used < 2) return fallback;
  const int k = used < 3 ? 2 : 3;
  for (int c = 0; c < k; ++c) {
    int piv = c;
    for (int r = c + 1; r < k; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    if (!(std::abs(m[piv][c]) > 0)) return fallback;
    for (int b = 0; b < 4; ++b) std::swap(m[c][b], m[piv][b]);
    for (int r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int b = 0; b < 4; ++b) m[r][b] -= f * m[c][b];
    }
  }
  const double c0 = m[0][3] / m[0][0];
  const double c1 = m[1][3] / m[1][1];
  const double c2 = k == 3 ? m[2][3] / m[2][2] : 0.0;
  // Newton on c0 + c1 t + c2 t^2 from the outermost continuing node.
  double t = 0.0;
  for (int it = 0; it < 30; ++it) {
    const double d = c1 + 2.0 * c2 * t;
    if (!(d < 0)) return fallback;
    const double dt = (c0 + c1 * t + c2 * t * t) / d;
    t -= dt;
    if (std::abs(dt) < 1e-12) break;
  }
  const double edge = sgrid[in] + dir * t * h;
  if (!std::isfinite(edge) || dir * (edge - sgrid[reset]) <= 0) return fallback;
  return edge;
}

struct BandNode {
  double lower, upper, reset;
};

BandNode extract_band(const StateGrid& sgrid, const std::vector<double>& v, const Policy& pol,
                      double psi) {
  const std::size_t n = v.size();
  const std::size_t r = pol.reset;
  std::size_t lo = r, hi = r;
  while (lo > 0 && !pol.adjust[lo - 1]) --lo;
  while (hi + 1 < n && !pol.adjust[hi + 1]) ++hi;
  if (lo == 0 || hi + 1 == n) {
    throw Error(Errc::DegenerateGrid, "inaction band reaches the state-grid boundary; widen x_halfwidth");
  }
  std::vector<double> gap(n);
  for (std::size_t i = 0; i < n; ++i) gap[i] = v[r] + psi - v[i];

  BandNode out{};
  out.reset = refine_reset(sgrid, v, r);
  out.lower = locate_edge(sgrid, gap, lo, r, -1.0, kEdgeWindow * psi);
  out.upper = locate_edge(sgrid, gap, hi, r, +1.0, kEdgeWindow * psi);
  out.lower = std::min(out.lower, out.reset - 0.5 * sgrid.spacing());
  out.upper = std::max(out.upper, out.reset + 0.5 * sgrid.spacing());
  return out;
}

void check_vi_inputs(const ModelParams& params) {
  if (!(params.sigma > 0)) {
    throw Error(Errc::DegenerateGrid, "menu-cost inequality needs sigma > 0");
  }
  if (!(params.rho > 0)) {
    throw Error(Errc::OutOfRange, "stationary menu-cost problem needs rho > 0");
  }
}

Policy initial_policy(const StateGrid& sgrid, double target) {
  Policy pol;
  pol.adjust.assign(sgrid.size(), 0);
  pol.reset = sgrid.nearest(target);
  return pol;
}

MenuCostSolution frictionless(const StateGrid& sgrid, const std::optional<TimeGrid>& tgrid,
                              const std::vector<double>& targets) {
  MenuCostSolution out;
  out.value.sgrid = sgrid;
  out.value.tgrid = tgrid;
  out.value.values.assign(sgrid.size() * targets.size(), 0.0);
  out.band.tgrid = tgrid;
  out.band.lower = targets;
  out.band.upper = targets;
  out.band.reset = targets;
  return out;
}

// Nodes strictly inside (lower, upper) and the Shortley-Weller operator
// I - scale * D * Laplacian with zero Dirichlet data on the band edges.
struct BandOperator {
  std::size_t first = 0;
  std::size_t count = 0;
  detail::Tridiagonal op{0};
};

BandOperator band_operator(const StateGrid& sgrid, double lower, double upper, double diffusion,
                           double shift, double scale) {
  const double h = sgrid.spacing();
  const double tiny = 1e-9 * h;
  BandOperator out;
  std::size_t i = 0;
  while (i < sgrid.size() && sgrid[i] <= lower + tiny) ++i;
  out.first = i;
  while (i < sgrid.size() && sgrid[i] < upper - tiny) ++i;
  out.count = i - out.first;
  out.op = detail::Tridiagonal(out.count);
  for (std::size_t j = 0; j < out.count; ++j) {
    const double x = sgrid[out.first + j];
    const double hl = j == 0 ? std::min(x - lower, h) : h;
    const double hr = j + 1 == out.count ? std::min(upper - x, h) : h;
    const double c = scale * diffusion * 2.0;
    out.op.diag[j] = shift + c / (hl * hr);
    if (j > 0) out.op.lower[j] = -c / (hl * (hl + hr));
    if (j + 1 < out.count) out.op.upper[j] = -c / (hr * (hl + hr));
  }
  return out;
}

// Unit mass at `x`, restricted to the band interior.
std::vector<double> interior_source(const StateGrid& sgrid, const std::vector<double>& w,
                                    const BandOperator& bo, double x) {
  std::vector<double> full(sgrid.size(), 0.0);
  detail::deposit(full, sgrid, w, x, 1.0);
  std::vector<double> local(bo.count);
  double m = 0.0;
  for (std::size_t j = 0; j < bo.count; ++j) {
    local[j] = full[bo.first + j];
    m += w[bo.first + j] * local[j];
  }
  if (!(m > 0)) {
    // Reset sits in a cell cut by an edge; use the nearest interior node.
    const std::size_t near = std::clamp(sgrid.nearest(x), bo.first, bo.first + bo.count - 1);
    local[near - bo.first] = 1.0 / w[near];
    return local;
  }
  for (double& v : local) v /= m;
  return local;
}

}  // namespace

BandAt PolicyBand::at(double s) const {
  if (!tgrid || lower.size() == 1) return {lower[0], upper[0], reset[0]};
  const double pos = std::clamp(s / tgrid->dt(), 0.0, static_cast<double>(tgrid->n_slices()));
  const auto k = std::min(static_cast<std::size_t>(pos), tgrid->n_slices() - 1);
  const double w = pos - static_cast<double>(k);
  auto lerp = [&](const std::vector<double>& v) { return (1.0 - w) * v[k] + w * v[k + 1]; };
  return {lerp(lower), lerp(upper), lerp(reset)};
}

double band_halfwidth_estimate(const ModelParams& params) {
  return std::pow(6.0 * params.sigma * params.sigma * params.psi / params.b_curv, 0.25);
}

StateGrid menu_cost_grid(const ModelParams& params, std::size_t n_points) {
  double half = 4.0 * band_halfwidth_estimate(params);
  if (!(half > 0)) half = params.sigma > 0 ? 6.0 * params.sigma * std::sqrt(params.horizon) : 1.0;
  return StateGrid::symmetric(half, n_points);
}

MenuCostSolution solve_stationary_vi(const ModelParams& params, double target, const StateGrid& sgrid) {
  check_vi_inputs(params);
  if (params.psi == 0.0) return frictionless(sgrid, std::nullopt, {target});

  Obstacle ob{sgrid, 0.5 * params.sigma * params.sigma, params.rho, params.psi,
              std::vector<double>(sgrid.size())};
  for (std::size_t i = 0; i < sgrid.size(); ++i) {
    const double gap = sgrid[i] - target;
    ob.rhs[i] = params.b_curv * gap * gap;
  }
  Policy pol = initial_policy(sgrid, target);
  MenuCostSolution out;
  auto v = solve_obstacle(ob, pol, out.iterations);
  const BandNode b = extract_band(sgrid, v, pol, params.psi);
  out.value = ValueGrid{sgrid, std::nullopt, std::move(v)};
  out.band = PolicyBand{std::nullopt, {b.lower}, {b.upper}, {b.reset}};
  return out;
}

MenuCostSolution solve_time_dependent_vi(const ModelParams& params, const AggregatePath& agg,
                                         const StateGrid& sgrid) {
  check_vi_inputs(params);
  const TimeGrid& tgrid = agg.grid;
  if (agg.values.size() != tgrid.size()) throw Error(Errc::GridMismatch, "aggregate path size");
  for (double x : agg.values) {
    if (!std::isfinite(x)) throw Error(Errc::NonFiniteState, "aggregate path is not finite");
  }
  const std::size_t n = sgrid.size();
  const std::size_t nt = tgrid.size();
  if (params.psi == 0.0) {
    std::vector<double> targets(nt);
    for (std::size_t k = 0; k < nt; ++k) targets[k] = params.alpha * agg.values[k];
    return frictionless(sgrid, tgrid, targets);
  }

  MenuCostSolution out;
  out.value = ValueGrid{sgrid, tgrid, std::vector<double>(n * nt)};
  out.band = PolicyBand{tgrid, std::vector<double>(nt), std::vector<double>(nt), std::vector<double>(nt)};

  const double diffusion = 0.5 * params.sigma * params.sigma;
  const double target_end = params.alpha * agg.values.back();
  Obstacle ob{sgrid, diffusion, params.rho, params.psi, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double gap = sgrid[i] - target_end;
    ob.rhs[i] = params.b_curv * gap * gap;
  }
  Policy pol = initial_policy(sgrid, target_end);
  std::vector<double> v = solve_obstacle(ob, pol, out.iterations);

  auto store = [&](std::size_t k, const std::vector<double>& vk) {
    std::copy(vk.begin(), vk.end(), out.value.values.begin() + static_cast<std::ptrdiff_t>(k * n));
    const BandNode b = extract_band(sgrid, vk, pol, params.psi);
    out.band.lower[k] = b.lower;
    out.band.upper[k] = b.upper;
    out.band.reset[k] = b.reset;
  };
  store(nt - 1, v);

  const double inv_dt = 1.0 / tgrid.dt();
  ob.shift = params.rho + inv_dt;
  for (std::size_t k = nt - 1; k-- > 0;) {
    const double target = params.alpha * agg.values[k];
    for (std::size_t i = 0; i < n; ++i) {
      const double gap = sgrid[i] - target;
      ob.rhs[i] = params.b_curv * gap * gap + inv_dt * v[i];
    }
    v = solve_obstacle(ob, pol, out.iterations);
    store(k, v);
  }
  return out;
}

CrossSection stationary_density(const PolicyBand& band, const ModelParams& params, const StateGrid& sgrid) {
  if (!(params.sigma > 0)) throw Error(Errc::DegenerateGrid, "stationary density needs sigma > 0");
  const BandAt b = band.at(0.0);
  if (!(b.upper > b.lower)) return point_mass(sgrid, b.reset);
  if (b.lower <= sgrid.x_min() || b.upper >= sgrid.x_max()) {
    throw Error(Errc::DegenerateGrid, "band does not fit inside the state grid");
  }
  const auto w = sgrid.trapezoid_weights();
  const BandOperator bo = band_operator(sgrid, b.lower, b.upper, 0.5 * params.sigma * params.sigma, 0.0, 1.0);
  if (bo.count < 3) throw Error(Errc::DegenerateGrid, "band covers fewer than 3 grid nodes");
  std::vector<double> local;
  if (!bo.op.solve(interior_source(sgrid, w, bo, b.reset), local)) {
    throw Error(Errc::DegenerateGrid, "stationary forward system is singular");
  }
  CrossSection out{sgrid, std::vector<double>(sgrid.size(), 0.0)};
  std::copy(local.begin(), local.end(), out.density.begin() + static_cast<std::ptrdiff_t>(bo.first));
  const double m = out.mass();
  for (double& f : out.density) f /= m;
  return out;
}

std::vector<CrossSection> evolve_density(const CrossSection& f0, const PolicyBand& band,
                                         const ModelParams& params, const TimeGrid& grid) {
  if (band.tgrid && !(*band.tgrid == grid)) throw Error(Errc::GridMismatch, "band and evolution grids differ");
  const StateGrid& sgrid = f0.sgrid;
  const auto w = sgrid.trapezoid_weights();
  const double diffusion = 0.5 * params.sigma * params.sigma;

  std::vector<CrossSection> out;
  out.reserve(grid.size());

  // Firms pushed outside the band at s = 0 adjust immediately.
  {
    const BandAt b = band.at(grid[0]);
    CrossSection start{sgrid, f0.density};
    double moved = 0.0;
    for (std::size_t i = 0; i < sgrid.size(); ++i) {
      if (sgrid[i] < b.lower || sgrid[i] > b.upper) {
        moved += w[i] * start.density[i];
        start.density[i] = 0.0;
      }
    }
    if (moved > 0) detail::deposit(start.density, sgrid, w, b.reset, moved);
    out.push_back(std::move(start));
  }

  std::vector<double> rhs, g, unit;
  for (std::size_t k = 0; k < grid.n_slices(); ++k) {
    const BandAt b = band.at(grid[k + 1]);
    const CrossSection& prev = out.back();
    const double m_prev = prev.mass();
    CrossSection next{sgrid, std::vector<double>(sgrid.size(), 0.0)};

    const BandOperator bo = band_operator(sgrid, b.lower, b.upper, diffusion, 1.0, grid.dt());
    if (bo.count == 0 || !(b.upper > b.lower)) {
      detail::deposit(next.density, sgrid, w, b.reset, m_prev);
      out.push_back(std::move(next));
      continue;
    }
    rhs.assign(prev.density.begin() + static_cast<std::ptrdiff_t>(bo.first),
               prev.density.begin() + static_cast<std::ptrdiff_t>(bo.first + bo.count));
    if (!bo.op.solve(rhs, g) || !bo.op.solve(interior_source(sgrid, w, bo, b.reset), unit)) {
      throw Error(Errc::CflViolation, "implicit band step failed at node " + std::to_string(k + 1));
    }
    double mg = 0.0, mu = 0.0;
    for (std::size_t j = 0; j < bo.count; ++j) {
      mg += w[bo.first + j] * g[j];
      mu += w[bo.first + j] * unit[j];
    }
    const double c = (m_prev - mg) / mu;
    for (std::size_t j = 0; j < bo.count; ++j) next.density[bo.first + j] = g[j] + c * unit[j];

    if (std::abs(next.mass() - m_prev) > 1e-6) {
      throw Error(Errc::MassLeak, "density mass drifted at node " + std::to_string(k + 1));
    }
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace stickymfg
