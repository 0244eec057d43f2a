#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "stickymfg/params.hpp"

namespace stickymfg {

/// Scalar stochastic control problem
///   minimize E[ int_0^H lagrangian(s, x, u) ds + terminal_cost(x(H)) ]
///   subject to dx = drift(s, x, u) ds + vol(s, x, u) dW.
struct ControlProblem {
  using Flow = std::function<double(double s, double x, double u)>;
  Flow lagrangian;
  Flow drift;
  Flow vol;
  std::function<double(double x)> terminal_cost;
  double horizon = 1.0;
};

/// Time slices and state nodes used to discretize the action.
struct ActionLattice {
  TimeGrid tgrid;
  StateGrid sgrid;
  double kernel_bandwidth = 0.0;  // vol * sqrt(dt)
};

/// Builds a lattice and checks that the state spacing resolves the per-slice
/// Gaussian kernel (spacing <= bandwidth / 2). Throws Error{OutOfRange}.
ActionLattice make_lattice(const ControlProblem& problem, std::size_t n_slices, const StateGrid& sgrid);

/// Onsager-Machlup discretization of the constrained action:
///   sum_i [ L(s_i, x_i, u_i) dt + (x_{i+1} - x_i - mu_i dt)^2 / (2 vol_i^2 dt) ] + terminal(x_n)
double build_action(const ControlProblem& problem, const TimeGrid& tgrid, const std::vector<double>& x_path,
                    const std::vector<double>& u_path);

struct ActionGradient {
  std::vector<double> dx;  // dS/dx_i, i = 0..n (entry 0 is for the pinned initial state)
  std::vector<double> du;  // dS/du_i, i = 0..n-1
};

/// Chain-rule gradient of build_action; partial derivatives of the problem's
/// functions are taken by central differences.
ActionGradient action_gradient(const ControlProblem& problem, const TimeGrid& tgrid,
                               const std::vector<double>& x_path, const std::vector<double>& u_path);

/// Positive amplitude psi = exp(-V / normalizer) on the state grid. The peak is
/// kept at 1 and the absolute level is carried in log_scale, so
///   V(x_i) = -normalizer * (log(amplitude_i) + log_scale).
struct WaveGrid {
  StateGrid sgrid;
  std::vector<double> amplitude;
  double normalizer = 1.0;
  double log_scale = 0.0;

  std::vector<double> value() const;
};

/// Default normalizer: vol(0, 0, 0)^2.
double default_normalizer(const ControlProblem& problem);

WaveGrid terminal_wave(const ControlProblem& problem, const StateGrid& sgrid, double normalizer);

/// One backward step of the imaginary-time propagator from s + dt to s:
///   psi_s(x) = e^{-L(s,x) dt / 2h} int G(x'; x + mu dt, vol^2 dt) e^{-L(s+dt,x') dt / 2h} psi_{s+dt}(x') dx'
/// with h the normalizer and (L, mu, vol) taken at the passive control that
/// solves dL/du = 0. Quadrature is the trapezoid rule on the state grid.
/// Throws Error{KernelUnderflow} when every weight vanishes.
WaveGrid propagate_kernel(const WaveGrid& wave, const ControlProblem& problem, double s, double dt);

/// Propagates the terminal wave back to s = 0 across the lattice.
WaveGrid propagate_to_start(const ControlProblem& problem, const ActionLattice& lattice,
                            std::optional<double> normalizer = std::nullopt);

/// Feedback control read off a wave: u(x) = argmin_u [ L(s,x,u) + mu(s,x,u) V'(x) ].
std::vector<double> feedback_control(const WaveGrid& wave, const ControlProblem& problem, double s);

struct FocSolution {
  std::vector<double> x;  // n + 1 states, x[0] = init
  std::vector<double> u;  // n controls
  double action = 0.0;
  double residual = 0.0;  // max-norm of the stacked first-order conditions
  std::size_t iterations = 0;
};

struct FocSettings {
  /// Max-norm of the first-order conditions. Raised to the roundoff floor of
  /// the kinetic term, 64 eps max|x| / (vol^2 dt), when that is larger.
  double tolerance = 1e-11;
  std::size_t max_iterations = 100;
};

/// Stationary point of build_action over x_1..x_n and u_0..u_{n-1} with x_0 pinned.
/// Controls are eliminated slice by slice (dS/du_i = 0) before damped Newton on
/// the state conditions. Throws Error{NoConvergence} or Error{SaddleDetected}.
FocSolution solve_foc(const ControlProblem& problem, const TimeGrid& tgrid, double init,
                      const FocSettings& settings = {});

/// Scalar LQ benchmark: dx = u ds + sigma dW, cost int (q x^2 + r u^2) ds + qT x(H)^2.
/// V(s, x) = p(s) x^2 + c(s), with p' = p^2 / r - q, p(H) = qT and c' = -sigma^2 p.
struct LqReference {
  TimeGrid grid;
  std::vector<double> p;
  std::vector<double> c;
  std::vector<double> x;  // optimal state path from init (noise-free)
  std::vector<double> u;  // -p x / r

  double value(std::size_t k, double state) const { return p[k] * state * state + c[k]; }
};

LqReference lq_reference(double q, double r, double qT, double init, const TimeGrid& grid,
                         double sigma = 0.0, std::size_t substeps = 64);

/// ControlProblem for the LQ benchmark with noise level sigma.
ControlProblem lq_problem(double q, double r, double qT, double horizon, double sigma);

}  // namespace stickymfg
