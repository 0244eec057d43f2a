#include "stickymfg/action_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "stickymfg/error.hpp"
#include "tridiagonal.hpp"

namespace stickymfg {

namespace {

using Flow = ControlProblem::Flow;

double eval(const Flow& f, double s, double x, double u) { return f ? f(s, x, u) : 0.0; }

double fd_step(double z) { return 1e-5 * std::max(1.0, std::abs(z)); }

double d_dx(const Flow& f, double s, double x, double u) {
  if (!f) return 0.0;
  const double h = fd_step(x);
  return (f(s, x + h, u) - f(s, x - h, u)) / (2.0 * h);
}

double d_du(const Flow& f, double s, double x, double u) {
  if (!f) return 0.0;
  const double h = fd_step(u);
  return (f(s, x, u + h) - f(s, x, u - h)) / (2.0 * h);
}

double terminal(const ControlProblem& p, double x) { return p.terminal_cost ? p.terminal_cost(x) : 0.0; }

double terminal_slope(const ControlProblem& p, double x) {
  if (!p.terminal_cost) return 0.0;
  const double h = fd_step(x);
  return (p.terminal_cost(x + h) - p.terminal_cost(x - h)) / (2.0 * h);
}

double terminal_curvature(const ControlProblem& p, double x) {
  if (!p.terminal_cost) return 0.0;
  const double h = 1e-3 * std::max(1.0, std::abs(x));
  return (p.terminal_cost(x + h) - 2.0 * p.terminal_cost(x) + p.terminal_cost(x - h)) / (h * h);
}

double volatility(const ControlProblem& p, double s, double x, double u) {
  if (!p.vol) throw Error(Errc::DegenerateVol, "control problem has no volatility");
  const double v = p.vol(s, x, u);
  if (!(v > 0)) {
    throw Error(Errc::DegenerateVol, "vol = " + std::to_string(v) + " at s = " + std::to_string(s) +
                                         ", x = " + std::to_string(x));
  }
  return v;
}

// One slice of the action and its partial derivatives in (x_i, u_i, x_{i+1}).
struct Slice {
  double phi;
  std::array<double, 3> grad;
};

Slice slice(const ControlProblem& p, double s, double dt, double x, double u, double xn) {
  const double v = volatility(p, s, x, u);
  const double mu = eval(p.drift, s, x, u);
  const double e = xn - x - mu * dt;
  const double var = v * v * dt;
  const double dk_de = e / var;
  const double dk_dv = -e * e / (v * var);
  Slice out;
  out.phi = eval(p.lagrangian, s, x, u) * dt + 0.5 * e * e / var;
  out.grad[0] = d_dx(p.lagrangian, s, x, u) * dt + dk_de * (-1.0 - d_dx(p.drift, s, x, u) * dt) +
                dk_dv * d_dx(p.vol, s, x, u);
  out.grad[1] = d_du(p.lagrangian, s, x, u) * dt - dk_de * d_du(p.drift, s, x, u) * dt +
                dk_dv * d_du(p.vol, s, x, u);
  out.grad[2] = dk_de;
  return out;
}

// Symmetric Hessian of a slice by central differences of its gradient.
std::array<std::array<double, 3>, 3> slice_hessian(const ControlProblem& p, double s, double dt,
                                                   std::array<double, 3> z) {
  std::array<std::array<double, 3>, 3> h{};
  for (int j = 0; j < 3; ++j) {
    const double step = 1e-4 * std::max(1e-2, std::abs(z[j]));
    auto zp = z, zm = z;
    zp[j] += step;
    zm[j] -= step;
    const auto gp = slice(p, s, dt, zp[0], zp[1], zp[2]).grad;
    const auto gm = slice(p, s, dt, zm[0], zm[1], zm[2]).grad;
    for (int i = 0; i < 3; ++i) h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) h[i][j] = h[j][i] = 0.5 * (h[i][j] + h[j][i]);
  }
  return h;
}

void check_paths(const TimeGrid& tgrid, const std::vector<double>& x, const std::vector<double>& u) {
  if (x.size() != tgrid.size() || u.size() != tgrid.n_slices()) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(tgrid.size()) + " states and " +
                                             std::to_string(tgrid.n_slices()) + " controls, got " +
                                             std::to_string(x.size()) + " and " + std::to_string(u.size()));
  }
}

// argmin_u L(s, x, u) by Newton on the first-order condition. Problems whose
// lagrangian does not curve in u keep u = 0.
double passive_control(const ControlProblem& p, double s, double x) {
  if (!p.lagrangian) return 0.0;
  double u = 0.0;
  for (int it = 0; it < 20; ++it) {
    const double g = d_du(p.lagrangian, s, x, u);
    const double h = 1e-3 * std::max(1.0, std::abs(u));
    const double curv = (p.lagrangian(s, x, u + h) - 2.0 * p.lagrangian(s, x, u) + p.lagrangian(s, x, u - h)) / (h * h);
    if (!(curv > 0)) return u;
    const double step = g / curv;
    u -= step;
    if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(u))) break;
  }
  return u;
}

}  // namespace

ActionLattice make_lattice(const ControlProblem& problem, std::size_t n_slices, const StateGrid& sgrid) {
  TimeGrid tgrid(problem.horizon, n_slices);
  const double bandwidth = volatility(problem, 0.0, 0.0, 0.0) * std::sqrt(tgrid.dt());
  if (sgrid.spacing() > 0.5 * bandwidth) {
    throw Error(Errc::OutOfRange, "state spacing " + std::to_string(sgrid.spacing()) +
                                      " does not resolve kernel bandwidth " + std::to_string(bandwidth));
  }
  return ActionLattice{tgrid, sgrid, bandwidth};
}

double build_action(const ControlProblem& problem, const TimeGrid& tgrid, const std::vector<double>& x,
                    const std::vector<double>& u) {
  check_paths(tgrid, x, u);
  const double dt = tgrid.dt();
  double total = 0.0;
  for (std::size_t i = 0; i < tgrid.n_slices(); ++i) {
    const double s = tgrid[i];
    const double v = volatility(problem, s, x[i], u[i]);
    const double e = x[i + 1] - x[i] - eval(problem.drift, s, x[i], u[i]) * dt;
    total += eval(problem.lagrangian, s, x[i], u[i]) * dt + e * e / (2.0 * v * v * dt);
  }
  return total + terminal(problem, x.back());
}

ActionGradient action_gradient(const ControlProblem& problem, const TimeGrid& tgrid,
                               const std::vector<double>& x, const std::vector<double>& u) {
  check_paths(tgrid, x, u);
  const std::size_t n = tgrid.n_slices();
  ActionGradient g{std::vector<double>(n + 1, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const Slice sl = slice(problem, tgrid[i], tgrid.dt(), x[i], u[i], x[i + 1]);
    g.dx[i] += sl.grad[0];
    g.du[i] = sl.grad[1];
    g.dx[i + 1] += sl.grad[2];
  }
  g.dx[n] += terminal_slope(problem, x[n]);
  return g;
}

std::vector<double> WaveGrid::value() const {
  std::vector<double> v(amplitude.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = amplitude[i] > 0 ? -normalizer * (std::log(amplitude[i]) + log_scale)
                            : std::numeric_limits<double>::infinity();
  }
  return v;
}

double default_normalizer(const ControlProblem& problem) {
  const double v = volatility(problem, 0.0, 0.0, 0.0);
  return v * v;
}

WaveGrid terminal_wave(const ControlProblem& problem, const StateGrid& sgrid, double normalizer) {
  if (!(normalizer > 0)) throw Error(Errc::OutOfRange, "normalizer must be > 0");
  WaveGrid w{sgrid, std::vector<double>(sgrid.size()), normalizer, 0.0};
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sgrid.size(); ++i) lowest = std::min(lowest, terminal(problem, sgrid[i]));
  for (std::size_t i = 0; i < sgrid.size(); ++i) {
    w.amplitude[i] = std::exp(-(terminal(problem, sgrid[i]) - lowest) / normalizer);
  }
  w.log_scale = -lowest / normalizer;
  return w;
}

WaveGrid propagate_kernel(const WaveGrid& wave, const ControlProblem& problem, double s, double dt) {
  if (!(dt > 0)) throw Error(Errc::OutOfRange, "dt must be > 0");
  const StateGrid& g = wave.sgrid;
  const std::size_t n = g.size();
  const double hbar = wave.normalizer;
  const auto w = g.trapezoid_weights();

  // Half of the potential at the later time, folded into the source amplitude.
  std::vector<double> source(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double x = g[j];
    const double u0 = passive_control(problem, s + dt, x);
    source[j] = w[j] * wave.amplitude[j] * std::exp(-0.5 * eval(problem.lagrangian, s + dt, x, u0) * dt / hbar);
  }

  WaveGrid out{g, std::vector<double>(n, 0.0), hbar, wave.log_scale};
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = g[i];
    const double u0 = passive_control(problem, s, x);
    const double v = volatility(problem, s, x, u0);
    const double var = v * v * dt;
    const double centre = x + eval(problem.drift, s, x, u0) * dt;
    const double reach = 9.0 * std::sqrt(var);
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor((centre - reach - g.x_min()) / g.spacing())));
    const auto hi = std::min(n - 1, static_cast<std::size_t>(std::max(0.0, std::ceil((centre + reach - g.x_min()) / g.spacing()))));
    double acc = 0.0;
    for (std::size_t j = lo; j <= hi && lo < n; ++j) {
      const double d = g[j] - centre;
      acc += source[j] * std::exp(-0.5 * d * d / var);
    }
    acc /= std::sqrt(2.0 * std::numbers::pi * var);
    acc *= std::exp(-0.5 * eval(problem.lagrangian, s, x, u0) * dt / hbar);
    out.amplitude[i] = acc;
    peak = std::max(peak, acc);
  }
  if (!(peak > 0) || !std::isfinite(peak)) {
    throw Error(Errc::KernelUnderflow, "all kernel weights vanished at s = " + std::to_string(s));
  }
  for (double& a : out.amplitude) a /= peak;
  out.log_scale += std::log(peak);
  return out;
}

WaveGrid propagate_to_start(const ControlProblem& problem, const ActionLattice& lattice,
                            std::optional<double> normalizer) {
  WaveGrid wave = terminal_wave(problem, lattice.sgrid, normalizer.value_or(default_normalizer(problem)));
  const TimeGrid& t = lattice.tgrid;
  for (std::size_t k = t.n_slices(); k-- > 0;) wave = propagate_kernel(wave, problem, t[k], t.dt());
  return wave;
}

std::vector<double> feedback_control(const WaveGrid& wave, const ControlProblem& problem, double s) {
  const auto v = wave.value();
  const StateGrid& g = wave.sgrid;
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t l = i == 0 ? 0 : i - 1;
    const std::size_t r = i + 1 == n ? i : i + 1;
    const double slope = (v[r] - v[l]) / (g[r] - g[l]);
    auto hamiltonian = [&](double u) { return eval(problem.lagrangian, s, g[i], u) + eval(problem.drift, s, g[i], u) * slope; };
    double u = 0.0;
    for (int it = 0; it < 30; ++it) {
      const double h = 1e-4 * std::max(1.0, std::abs(u));
      const double d1 = (hamiltonian(u + h) - hamiltonian(u - h)) / (2.0 * h);
      const double d2 = (hamiltonian(u + h) - 2.0 * hamiltonian(u) + hamiltonian(u - h)) / (h * h);
      if (!(d2 > 0)) break;
      const double step = d1 / d2;
      u -= step;
      if (std::abs(step) < 1e-12 * std::max(1.0, std::abs(u))) break;
    }
    out[i] = u;
  }
  return out;
}

FocSolution solve_foc(const ControlProblem& problem, const TimeGrid& tgrid, double init,
                      const FocSettings& settings) {
  const std::size_t n = tgrid.n_slices();
  const double dt = tgrid.dt();
  FocSolution sol;
  sol.x.assign(n + 1, init);
  sol.u.assign(n, 0.0);

  // Minimizes each slice over its control with the states held fixed.
  auto eliminate_controls = [&](const std::vector<double>& x, std::vector<double>& u) {
    for (std::size_t i = 0; i < n; ++i) {
      for (int it = 0; it < 50; ++it) {
        const double gu = slice(problem, tgrid[i], dt, x[i], u[i], x[i + 1]).grad[1];
        const double step = 1e-4 * std::max(1e-2, std::abs(u[i]));
        const double gp = slice(problem, tgrid[i], dt, x[i], u[i] + step, x[i + 1]).grad[1];
        const double gm = slice(problem, tgrid[i], dt, x[i], u[i] - step, x[i + 1]).grad[1];
        const double huu = (gp - gm) / (2.0 * step);
        if (!(huu > 0)) {
          throw Error(Errc::SaddleDetected, "action is not convex in u at slice " + std::to_string(i));
        }
        const double du = gu / huu;
        u[i] -= du;
        if (std::abs(du) <= 1e-15 * std::max(1.0, std::abs(u[i]))) break;
      }
    }
  };

  // State conditions dS/dx_j, j = 1..n, at controls already eliminated.
  auto state_residual = [&](const std::vector<double>& x, const std::vector<double>& u, std::vector<double>& r) {
    const ActionGradient g = action_gradient(problem, tgrid, x, u);
    r.assign(g.dx.begin() + 1, g.dx.end());
    double worst = 0.0;
    for (double v : r) worst = std::max(worst, std::abs(v));
    for (double v : g.du) worst = std::max(worst, std::abs(v));
    return worst;
  };

  auto sum_sq = [](const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
  };

  eliminate_controls(sol.x, sol.u);
  std::vector<double> res, trial_res, step(n);
  double worst = state_residual(sol.x, sol.u, res);

  // Residual level below which the kinetic term is dominated by rounding.
  auto tolerance = [&] {
    double scale = 0.0, stiffness = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = volatility(problem, tgrid[i], sol.x[i], sol.u[i]);
      stiffness = std::max(stiffness, 1.0 / (v * v * dt));
      scale = std::max(scale, std::abs(sol.x[i + 1]));
    }
    return std::max(settings.tolerance, 64.0 * std::numeric_limits<double>::epsilon() * scale * stiffness);
  };

  for (; sol.iterations < settings.max_iterations && worst > tolerance(); ++sol.iterations) {
    // Reduced Hessian in x_1..x_n: Schur complement of each slice's control.
    detail::Tridiagonal hess(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto h = slice_hessian(problem, tgrid[i], dt, {sol.x[i], sol.u[i], sol.x[i + 1]});
      const double huu = h[1][1];
      const double a = h[0][0] - h[0][1] * h[0][1] / huu;
      const double c = h[0][2] - h[0][1] * h[1][2] / huu;
      const double f = h[2][2] - h[1][2] * h[1][2] / huu;
      if (i > 0) {
        hess.diag[i - 1] += a;
        hess.upper[i - 1] += c;
        hess.lower[i] += c;
      }
      hess.diag[i] += f;
    }
    hess.diag[n - 1] += terminal_curvature(problem, sol.x[n]);

    std::vector<double> rhs(n);
    for (std::size_t j = 0; j < n; ++j) rhs[j] = -res[j];
    // The exact Newton step descends on the squared residual whatever the
    // inertia; the shift is only a fallback for a singular system.
    double shift = 0.0;
    detail::Tridiagonal damped = hess;
    while (!(shift == 0.0 ? damped.solve_indefinite(rhs, step) : damped.solve(rhs, step))) {
      shift = shift == 0.0 ? 1e-8 * (1.0 + std::abs(hess.diag[0])) : 10.0 * shift;
      damped = hess;
      for (double& d : damped.diag) d += shift;
      if (shift > 1e12) throw Error(Errc::NoConvergence, "Newton system could not be regularized");
    }

    // Backtracking on the squared first-order residual.
    const double base = sum_sq(res);
    double t = 1.0;
    std::vector<double> x_trial, u_trial;
    double trial_worst = worst;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      x_trial = sol.x;
      for (std::size_t j = 0; j < n; ++j) x_trial[j + 1] += t * step[j];
      u_trial = sol.u;
      eliminate_controls(x_trial, u_trial);
      trial_worst = state_residual(x_trial, u_trial, trial_res);
      if (sum_sq(trial_res) <= (1.0 - 1e-4 * t) * base) break;
    }
    if (!(sum_sq(trial_res) < base)) break;
    sol.x = std::move(x_trial);
    sol.u = std::move(u_trial);
    res = trial_res;
    worst = trial_worst;
  }

  sol.residual = worst;
  if (worst > tolerance()) {
    throw Error(Errc::NoConvergence, "first-order residual " + std::to_string(worst) + " after " +
                                         std::to_string(sol.iterations) + " Newton steps");
  }

  // Second-order check on the reduced state problem.
  detail::Tridiagonal hess(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto h = slice_hessian(problem, tgrid[i], dt, {sol.x[i], sol.u[i], sol.x[i + 1]});
    if (!(h[1][1] > 0)) throw Error(Errc::SaddleDetected, "control curvature is not positive");
    if (i > 0) {
      hess.diag[i - 1] += h[0][0] - h[0][1] * h[0][1] / h[1][1];
      const double c = h[0][2] - h[0][1] * h[1][2] / h[1][1];
      hess.upper[i - 1] += c;
      hess.lower[i] += c;
    }
    hess.diag[i] += h[2][2] - h[1][2] * h[1][2] / h[1][1];
  }
  hess.diag[n - 1] += terminal_curvature(problem, sol.x[n]);
  std::vector<double> probe(n, 1.0), sink;
  if (!hess.solve(probe, sink)) {
    throw Error(Errc::SaddleDetected, "reduced Hessian is not positive definite at the stationary point");
  }

  sol.action = build_action(problem, tgrid, sol.x, sol.u);
  return sol;
}

LqReference lq_reference(double q, double r, double qT, double init, const TimeGrid& grid, double sigma,
                         std::size_t substeps) {
  if (!(q >= 0)) throw Error(Errc::OutOfRange, "q must be >= 0");
  if (!(r > 0)) throw Error(Errc::OutOfRange, "r must be > 0");
  if (!(qT >= 0)) throw Error(Errc::OutOfRange, "qT must be >= 0");
  if (substeps == 0) throw Error(Errc::OutOfRange, "substeps must be >= 1");

  // p on a fine grid of 2 M half-steps, integrated backward with RK4.
  const std::size_t m = grid.n_slices() * substeps;
  const std::size_t fine = 2 * m;
  const double h = grid.horizon() / static_cast<double>(fine);
  auto rhs = [&](double p) { return q - p * p / r; };  // dp/d(time-to-go)
  std::vector<double> p(fine + 1);
  p[fine] = qT;
  for (std::size_t k = fine; k-- > 0;) {
    const double y = p[k + 1];
    const double k1 = rhs(y);
    const double k2 = rhs(y + 0.5 * h * k1);
    const double k3 = rhs(y + 0.5 * h * k2);
    const double k4 = rhs(y + h * k3);
    p[k] = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  }

  // State forward with RK4 on steps of 2h, using p at the half-step nodes;
  // c by Simpson's rule over the same pairs.
  std::vector<double> xf(m + 1), cf(m + 1);
  xf[0] = init;
  for (std::size_t k = 0; k < m; ++k) {
    const double a = -p[2 * k] / r, b = -p[2 * k + 1] / r, c = -p[2 * k + 2] / r;
    const double H = 2.0 * h;
    const double y = xf[k];
    const double k1 = a * y;
    const double k2 = b * (y + 0.5 * H * k1);
    const double k3 = b * (y + 0.5 * H * k2);
    const double k4 = c * (y + H * k3);
    xf[k + 1] = y + H * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
  }
  cf[m] = 0.0;
  for (std::size_t k = m; k-- > 0;) {
    cf[k] = cf[k + 1] + sigma * sigma * (2.0 * h) * (p[2 * k] + 4.0 * p[2 * k + 1] + p[2 * k + 2]) / 6.0;
  }

  LqReference out{grid, {}, {}, {}, {}};
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::size_t j = k * substeps;
    out.p.push_back(p[2 * j]);
    out.c.push_back(cf[j]);
    out.x.push_back(xf[j]);
    out.u.push_back(-p[2 * j] * xf[j] / r);
  }
  return out;
}

ControlProblem lq_problem(double q, double r, double qT, double horizon, double sigma) {
  ControlProblem p;
  p.lagrangian = [q, r](double, double x, double u) { return q * x * x + r * u * u; };
  p.drift = [](double, double, double u) { return u; };
  p.vol = [sigma](double, double, double) { return sigma; };
  p.terminal_cost = [qT](double x) { return qT * x * x; };
  p.horizon = horizon;
  return p;
}

}  // namespace stickymfg
