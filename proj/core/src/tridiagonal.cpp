#include "tridiagonal.hpp"

#include <cmath>

namespace stickymfg::detail {

namespace {

template <class Accept>
bool thomas(const Tridiagonal& m, const std::vector<double>& rhs, std::vector<double>& x, Accept accept) {
  const std::size_t n = m.size();
  const auto& lower = m.lower;
  const auto& diag = m.diag;
  const auto& upper = m.upper;
  std::vector<double> c(n), d(n);
  double pivot = diag[0];
  if (!accept(pivot, diag[0])) return false;
  c[0] = upper[0] / pivot;
  d[0] = rhs[0] / pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * c[i - 1];
    if (!accept(pivot, diag[i])) return false;
    c[i] = upper[i] / pivot;
    d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
  }
  x.resize(n);
  x[n - 1] = d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  return true;
}

}  // namespace

bool Tridiagonal::solve(const std::vector<double>& rhs, std::vector<double>& x) const {
  return thomas(*this, rhs, x, [](double pivot, double) { return pivot > 0; });
}

bool Tridiagonal::solve_indefinite(const std::vector<double>& rhs, std::vector<double>& x) const {
  return thomas(*this, rhs, x, [](double pivot, double scale) {
    return std::isfinite(pivot) && std::abs(pivot) > 1e-12 * std::abs(scale);
  });
}

void Tridiagonal::apply(const std::vector<double>& x, std::vector<double>& y) const {
  const std::size_t n = size();
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += lower[i] * x[i - 1];
    if (i + 1 < n) v += upper[i] * x[i + 1];
    y[i] = v;
  }
}

}  // namespace stickymfg::detail
