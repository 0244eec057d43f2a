#include "stickymfg/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stickymfg/error.hpp"

namespace stickymfg {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingKey: return "MissingKey";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::EmptyEnsemble: return "EmptyEnsemble";
    case Errc::MissingExtrapolation: return "MissingExtrapolation";
    case Errc::EquilibriumBreakdown: return "EquilibriumBreakdown";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::DegenerateGrid: return "DegenerateGrid";
    case Errc::CflViolation: return "CFLViolation";
    case Errc::MassLeak: return "MassLeak";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegenerateVol: return "DegenerateVol";
    case Errc::KernelUnderflow: return "KernelUnderflow";
    case Errc::SaddleDetected: return "SaddleDetected";
    case Errc::NotConverged: return "NotConverged";
    case Errc::InvalidDamping: return "InvalidDamping";
    case Errc::NoBreakdownInRange: return "NoBreakdownInRange";
    case Errc::NoConvergenceInRange: return "NoConvergenceInRange";
    case Errc::ParseError: return "ParseError";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::Io: return "IOError";
  }
  return "Unknown";
}

namespace {

[[noreturn]] void out_of_range(const std::string& name, double value, const std::string& bound) {
  std::ostringstream msg;
  msg << name << " = " << value << " violates " << bound;
  throw Error(Errc::OutOfRange, msg.str());
}

double require(const std::map<std::string, double>& raw, const std::string& key) {
  auto it = raw.find(key);
  if (it == raw.end()) throw Error(Errc::MissingKey, key);
  if (!std::isfinite(it->second)) out_of_range(key, it->second, "finite");
  return it->second;
}

}  // namespace

ModelParams validate_params(const std::map<std::string, double>& raw) {
  ModelParams p;
  p.sigma = require(raw, "sigma");
  p.theta = require(raw, "theta");
  p.rho = require(raw, "rho");
  p.alpha = require(raw, "alpha");
  p.b_curv = require(raw, "b_curv");
  p.psi = require(raw, "psi");
  p.delta = require(raw, "delta");
  p.horizon = require(raw, "horizon");

  if (p.sigma < 0) out_of_range("sigma", p.sigma, ">= 0");
  if (p.theta < 0) out_of_range("theta", p.theta, ">= 0");
  if (p.rho < 0) out_of_range("rho", p.rho, ">= 0");
  if (p.b_curv <= 0) out_of_range("b_curv", p.b_curv, "> 0");
  if (p.psi < 0) out_of_range("psi", p.psi, ">= 0");
  if (p.horizon <= 0) out_of_range("horizon", p.horizon, "> 0");

  if (auto it = raw.find("m_dim"); it != raw.end()) {
    if (it->second != 1.0) out_of_range("m_dim", it->second, "== 1");
  }
  p.m_dim = 1;
  p.breakdown_risk = p.alpha >= 1.0;
  return p;
}

std::map<std::string, double> to_map(const ModelParams& p) {
  return {{"sigma", p.sigma}, {"theta", p.theta},   {"rho", p.rho},
          {"alpha", p.alpha}, {"b_curv", p.b_curv}, {"psi", p.psi},
          {"delta", p.delta}, {"horizon", p.horizon}, {"m_dim", static_cast<double>(p.m_dim)}};
}

TimeGrid::TimeGrid(double horizon, std::size_t n_slices)
    : horizon_(horizon), n_slices_(n_slices), dt_(0.0) {
  if (!(horizon > 0) || !std::isfinite(horizon)) out_of_range("horizon", horizon, "> 0");
  if (n_slices == 0) out_of_range("n_slices", 0.0, ">= 1");
  dt_ = horizon / static_cast<double>(n_slices);
  nodes_.resize(n_slices + 1);
  for (std::size_t k = 0; k <= n_slices; ++k) {
    nodes_[k] = horizon * (static_cast<double>(k) / static_cast<double>(n_slices));
  }
  nodes_.back() = horizon;
}

TimeGrid build_time_grid(double horizon, std::size_t n_slices) { return TimeGrid(horizon, n_slices); }

StateGrid::StateGrid(double x_min, double x_max, std::size_t n_points)
    : x_min_(x_min), x_max_(x_max), n_points_(n_points), spacing_(0.0) {
  if (!(x_min < 0.0) || !std::isfinite(x_min)) out_of_range("x_min", x_min, "< 0");
  if (!(x_max > 0.0) || !std::isfinite(x_max)) out_of_range("x_max", x_max, "> 0");
  if (n_points < 3 || n_points % 2 == 0) {
    out_of_range("n_points", static_cast<double>(n_points), "odd and >= 3");
  }
  spacing_ = (x_max - x_min) / static_cast<double>(n_points - 1);
}

std::vector<double> StateGrid::nodes() const {
  std::vector<double> out(n_points_);
  for (std::size_t i = 0; i < n_points_; ++i) out[i] = (*this)[i];
  return out;
}

std::size_t StateGrid::nearest(double x) const noexcept {
  const double pos = std::round((x - x_min_) / spacing_);
  if (!(pos > 0)) return 0;
  return std::min(static_cast<std::size_t>(pos), n_points_ - 1);
}

std::vector<double> StateGrid::trapezoid_weights() const {
  std::vector<double> w(n_points_, spacing_);
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

}  // namespace stickymfg
