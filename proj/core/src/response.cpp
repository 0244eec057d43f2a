#include "stickymfg/response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "parallel.hpp"
#include "stickymfg/error.hpp"

namespace stickymfg {

std::optional<double> fit_decay_rate(std::span<const double> values, const TimeGrid& grid, double fraction) {
  if (values.size() != grid.size()) throw Error(Errc::GridMismatch, "path length does not match the grid");
  if (!(fraction > 0 && fraction <= 1)) throw Error(Errc::OutOfRange, "fit fraction must lie in (0, 1]");
  const std::size_t n = grid.n_slices();
  const auto first = static_cast<std::size_t>(std::floor((1.0 - fraction) * static_cast<double>(n)));
  if (n - first < 1) return std::nullopt;

  const double sign = values[first] > 0 ? 1.0 : -1.0;
  double st = 0, sy = 0, stt = 0, sty = 0;
  double count = 0;
  for (std::size_t k = first; k <= n; ++k) {
    const double v = sign * values[k];
    if (!(v > 0)) return std::nullopt;
    const double y = -std::log(v);
    st += grid[k];
    sy += y;
    stt += grid[k] * grid[k];
    sty += grid[k] * y;
    count += 1;
  }
  const double denom = count * stt - st * st;
  if (!(denom > 0)) return std::nullopt;
  return (count * sty - st * sy) / denom;
}

IrfStats irf_stats(std::span<const double> y, const TimeGrid& grid, double hump_margin) {
  if (y.size() != grid.size()) throw Error(Errc::GridMismatch, "path length does not match the grid");
  IrfStats out;
  const std::size_t n = grid.n_slices();
  const double dt = grid.dt();

  out.tail_rate = fit_decay_rate(y, grid);
  double area = 0.0;
  for (std::size_t k = 0; k < n; ++k) area += 0.5 * dt * (y[k] + y[k + 1]);
  if (y[n] != 0.0) {
    if (out.tail_rate && *out.tail_rate > 0) {
      area += y[n] / *out.tail_rate;
    } else if (out.tail_rate) {
      area = y[n] > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
  }
  out.area = area;

  const double y0 = y[0];
  if (y0 == 0.0) {
    // No impact: any later response is a hump and never falls below half of 0.
    std::size_t peak = 0;
    for (std::size_t k = 1; k <= n; ++k) {
      if (std::abs(y[k]) > std::abs(y[peak])) peak = k;
    }
    if (y[peak] == 0.0) return out;
    out.hump = true;
    out.peak_time = grid[peak];
    out.half_life = std::numeric_limits<double>::infinity();
    return out;
  }

  // Measured relative to the impact value so a negative shock mirrors a positive one.
  auto rel = [&](std::size_t k) { return y[k] / y0; };
  out.half_life = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t k = 1; k <= n; ++k) {
    if (rel(k) <= 0.5) {
      const double a = rel(k - 1), b = rel(k);
      out.half_life = grid[k - 1] + dt * (a - 0.5) / (a - b);
      found = true;
      break;
    }
  }
  if (!found && out.tail_rate && *out.tail_rate > 0 && rel(n) > 0) {
    out.half_life = grid.horizon() + std::log(2.0 * rel(n)) / *out.tail_rate;
  }

  std::size_t peak = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (rel(k) > rel(peak)) peak = k;
  }
  if (peak > 0 && rel(peak) > 1.0 + hump_margin) {
    out.hump = true;
    out.peak_time = grid[peak];
  }
  return out;
}

IRFResult compute_irf(const EquilibriumResult& eq, const ModelParams& params, double hump_margin) {
  (void)params;
  if (eq.status != EquilibriumStatus::Converged) {
    throw Error(Errc::NotConverged, "equilibrium status is " + std::string(to_string(eq.status)));
  }
  IRFResult out{eq.agg.grid, std::vector<double>(eq.agg.values.size()), {}};
  for (std::size_t k = 0; k < out.output.size(); ++k) out.output[k] = -eq.agg.values[k];
  out.stats = irf_stats(out.output, out.grid, hump_margin);
  return out;
}

ConvexityReport convexity_report(const std::vector<SweepRow>& rows) {
  ConvexityReport report;
  std::size_t m = 0;
  while (m < rows.size() && rows[m].status == EquilibriumStatus::Converged && rows[m].error.empty()) ++m;
  if (m >= 2) {
    const double h = rows[1].alpha - rows[0].alpha;
    std::size_t uniform = 2;
    while (uniform < m && std::abs((rows[uniform].alpha - rows[uniform - 1].alpha) - h) <= 1e-9 * std::abs(h)) {
      ++uniform;
    }
    m = uniform;
  }
  report.prefix = m;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    report.second_differences.push_back(rows[i + 1].stats.area - 2.0 * rows[i].stats.area + rows[i - 1].stats.area);
  }
  report.strictly_convex = !report.second_differences.empty() &&
                           std::all_of(report.second_differences.begin(), report.second_differences.end(),
                                       [](double d) { return d > 0; });
  return report;
}

SweepTable sweep_alpha(const ModelParams& params, const TimeGrid& grid, const std::vector<double>& alphas,
                       const EquilibriumSettings& settings) {
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!std::isfinite(alphas[i])) throw Error(Errc::OutOfRange, "alpha values must be finite");
    if (i > 0 && !(alphas[i] > alphas[i - 1])) throw Error(Errc::OutOfRange, "alpha values must be sorted");
  }
  SweepTable table;
  table.rows.resize(alphas.size());
  detail::parallel_for(alphas.size(), [&](std::size_t i) {
    SweepRow& row = table.rows[i];
    row.alpha = alphas[i];
    ModelParams p = params;
    p.alpha = alphas[i];
    p.breakdown_risk = alphas[i] >= 1.0;
    try {
      const EquilibriumResult eq = solve_equilibrium(p, grid, settings);
      row.status = eq.status;
      if (eq.status == EquilibriumStatus::Converged) row.stats = compute_irf(eq, p).stats;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  table.convexity = convexity_report(table.rows);
  return table;
}

}  // namespace stickymfg
