#pragma once

#include <vector>

namespace stickymfg::detail {

/// Tridiagonal system  lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i].
struct Tridiagonal {
  std::vector<double> lower, diag, upper;

  explicit Tridiagonal(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}
  std::size_t size() const noexcept { return diag.size(); }

  /// Thomas algorithm. Returns false if a pivot is not strictly positive,
  /// which for the M-matrices built here signals a broken discretization.
  bool solve(const std::vector<double>& rhs, std::vector<double>& x) const;
  /// Thomas algorithm accepting pivots of either sign; fails only on a
  /// vanishing or non-finite pivot.
  bool solve_indefinite(const std::vector<double>& rhs, std::vector<double>& x) const;

  /// y = A x
  void apply(const std::vector<double>& x, std::vector<double>& y) const;
};

}  // namespace stickymfg::detail
