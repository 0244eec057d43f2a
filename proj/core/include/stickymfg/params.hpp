#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace stickymfg {

/// Structural constants of the sticky-price economy. All quantities live in
/// markup-gap units; time is measured in the same unit as the rates.
struct ModelParams {
  double sigma = 0.1;      // markup-gap volatility per sqrt(time)
  double theta = 1.0;      // Calvo adjustment intensity
  double rho = 0.02;       // discount rate
  double alpha = 0.0;      // strategic complementarity (>0), substitutability (<0)
  double b_curv = 20.0;    // curvature of the flow loss B (x - alpha X)^2
  double psi = 0.01;       // menu cost per adjustment
  double delta = 0.01;     // one-time nominal shock
  double horizon = 10.0;   // analysis horizon
  int m_dim = 1;           // driving-noise dimension; only 1 is supported

  /// Set when alpha >= 1: equilibrium solvers are expected to report a
  /// breakdown rather than a converged path.
  bool breakdown_risk = false;

  /// Period loss of a firm with own gap `x` when the aggregate gap is `agg`.
  double flow_loss(double x, double agg) const {
    const double gap = x - alpha * agg;
    return b_curv * gap * gap;
  }

  bool operator==(const ModelParams&) const = default;
};

/// Builds ModelParams from a name->value map. Required keys: sigma, theta, rho,
/// alpha, b_curv, psi, delta, horizon. `m_dim` is optional and must equal 1.
/// Throws Error{MissingKey} or Error{OutOfRange}.
ModelParams validate_params(const std::map<std::string, double>& raw);

/// Inverse of validate_params.
std::map<std::string, double> to_map(const ModelParams& params);

/// Uniform partition of [0, horizon] into n_slices equal subintervals.
class TimeGrid {
 public:
  TimeGrid() : TimeGrid(1.0, 1) {}
  TimeGrid(double horizon, std::size_t n_slices);

  std::size_t n_slices() const noexcept { return n_slices_; }
  std::size_t size() const noexcept { return n_slices_ + 1; }
  double dt() const noexcept { return dt_; }
  double horizon() const noexcept { return horizon_; }
  double operator[](std::size_t k) const noexcept { return nodes_[k]; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }

  bool operator==(const TimeGrid& other) const {
    return n_slices_ == other.n_slices_ && horizon_ == other.horizon_;
  }

 private:
  double horizon_;
  std::size_t n_slices_;
  double dt_;
  std::vector<double> nodes_;
};

/// Throws Error{OutOfRange} for horizon <= 0 or n_slices == 0.
TimeGrid build_time_grid(double horizon, std::size_t n_slices);

/// Uniform markup-gap grid with an odd node count straddling zero.
class StateGrid {
 public:
  StateGrid() : StateGrid(-1.0, 1.0, 3) {}
  StateGrid(double x_min, double x_max, std::size_t n_points);

  static StateGrid symmetric(double half_width, std::size_t n_points) {
    return StateGrid(-half_width, half_width, n_points);
  }

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  std::size_t size() const noexcept { return n_points_; }
  double spacing() const noexcept { return spacing_; }
  double operator[](std::size_t i) const noexcept {
    return x_min_ + (x_max_ - x_min_) * (static_cast<double>(i) / static_cast<double>(n_points_ - 1));
  }
  std::vector<double> nodes() const;

  /// Index of the node closest to `x`, clamped to the grid.
  std::size_t nearest(double x) const noexcept;

  /// Trapezoid quadrature weights.
  std::vector<double> trapezoid_weights() const;

  bool operator==(const StateGrid& other) const {
    return x_min_ == other.x_min_ && x_max_ == other.x_max_ && n_points_ == other.n_points_;
  }

 private:
  double x_min_;
  double x_max_;
  std::size_t n_points_;
  double spacing_;
};

}  // namespace stickymfg
