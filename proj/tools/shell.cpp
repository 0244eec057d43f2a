#include "shell.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

#include "stickymfg/action_solver.hpp"
#include "stickymfg/calvo.hpp"
#include "stickymfg/error.hpp"
#include "stickymfg/forward_equation.hpp"
#include "stickymfg/jump_diffusion.hpp"
#include "stickymfg/menu_cost.hpp"
#include "stickymfg/response.hpp"

namespace stickymfg::shell {

namespace fs = std::filesystem;

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Simulate: return "simulate";
    case Command::PolicyCalvo: return "policy-calvo";
    case Command::PolicyMenuCost: return "policy-menucost";
    case Command::PathIntegralCheck: return "pathintegral-check";
    case Command::Equilibrium: return "equilibrium";
    case Command::Irf: return "irf";
    case Command::Sweep: return "sweep";
    case Command::CriticalAlpha: return "critical-alpha";
  }
  return "unknown";
}

namespace {

const std::set<std::string, std::less<>> kStructural = {"sigma", "theta", "rho",   "alpha",
                                                        "b_curv", "psi",  "delta", "horizon"};
const std::set<std::string, std::less<>> kNumeric = {"n_slices", "x_points", "x_halfwidth", "n_paths",
                                                     "seed",     "damping",  "tol",         "max_iter"};
const std::set<std::string, std::less<>> kText = {"command", "aggregation", "model", "output_dir"};

constexpr std::size_t kPathsWritten = 100;
constexpr std::size_t kSweepPoints = 7;
constexpr std::size_t kCriticalProbes = 6;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::optional<double> to_number(std::string_view text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

std::optional<Command> to_command(std::string_view name) {
  for (Command c : {Command::Simulate, Command::PolicyCalvo, Command::PolicyMenuCost, Command::PathIntegralCheck,
                    Command::Equilibrium, Command::Irf, Command::Sweep, Command::CriticalAlpha}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::size_t count_value(const std::string& key, double v, double minimum) {
  if (!(v >= minimum) || v != std::floor(v) || v > 1e15) {
    throw Error(Errc::OutOfRange, key + " = " + format_number(v) + " must be an integer >= " + format_number(minimum));
  }
  return static_cast<std::size_t>(v);
}

// Module named in error messages for each command.
std::string_view module_of(Command command) {
  switch (command) {
    case Command::Simulate: return "jump_diffusion";
    case Command::PolicyCalvo: return "calvo_policy";
    case Command::PolicyMenuCost: return "menu_cost_policy";
    case Command::PathIntegralCheck: return "action_solver";
    case Command::Equilibrium:
    case Command::CriticalAlpha: return "mean_field";
    case Command::Irf:
    case Command::Sweep: return "response";
  }
  return "shell";
}

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Session {
 public:
  explicit Session(const RunSpec& spec) : spec_(spec) {}

  fs::path emit(const std::string& name, const CsvTable& table) {
    std::error_code ec;
    fs::create_directories(spec_.output_dir, ec);
    if (ec) throw IoFailure("cannot create output directory " + spec_.output_dir.string() + ": " + ec.message());
    const fs::path path = spec_.output_dir / name;
    try {
      table.write(path);
    } catch (const Error& e) {
      throw IoFailure(e.what());
    }
    files.push_back(path);
    return path;
  }

  std::vector<fs::path> files;

 private:
  const RunSpec& spec_;
};

TimeGrid time_grid(const RunSpec& spec) { return build_time_grid(spec.params.horizon, spec.numerics.n_slices); }

EquilibriumSettings settings_of(const RunSpec& spec) {
  EquilibriumSettings s;
  s.model = spec.numerics.model;
  s.aggregation = spec.numerics.aggregation;
  s.damping = spec.numerics.damping;
  s.tol = spec.numerics.tol;
  s.max_iter = spec.numerics.max_iter;
  s.seed = spec.numerics.seed;
  s.n_paths = spec.numerics.n_paths;
  s.x_points = spec.numerics.x_points;
  s.x_halfwidth = spec.numerics.x_halfwidth;
  return s;
}

CsvTable path_table(const std::string& column, const TimeGrid& grid, const std::vector<double>& values) {
  CsvTable t({"t", column});
  for (std::size_t k = 0; k < grid.size(); ++k) t.add_row(std::vector<double>{grid[k], values[k]});
  return t;
}

CsvTable density_table(const CrossSection& f) {
  CsvTable t({"x", "f"});
  for (std::size_t i = 0; i < f.sgrid.size(); ++i) t.add_row(std::vector<double>{f.sgrid[i], f.density[i]});
  return t;
}

CsvTable band_table(const PolicyBand& band) {
  if (!band.tgrid) {
    CsvTable t({"lower", "upper", "reset"});
    t.add_row(std::vector<double>{band.lower[0], band.upper[0], band.reset[0]});
    return t;
  }
  CsvTable t({"t", "lower", "upper", "reset"});
  for (std::size_t k = 0; k < band.tgrid->size(); ++k) {
    t.add_row(std::vector<double>{(*band.tgrid)[k], band.lower[k], band.upper[k], band.reset[k]});
  }
  return t;
}

RunOutcome simulate(const RunSpec& spec, Session& out) {
  const TimeGrid grid = time_grid(spec);
  ModelParams params = spec.params;
  SimulationOptions opt;
  opt.n_paths = spec.numerics.n_paths;
  opt.seed = spec.numerics.seed;
  opt.initial = constant_initial(-params.delta);
  if (spec.numerics.model == ModelKind::Calvo) {
    opt.reset_rule = [](double, double) { return 0.0; };
  } else {
    const StateGrid sgrid = spec.numerics.x_halfwidth
                                ? StateGrid::symmetric(*spec.numerics.x_halfwidth, spec.numerics.x_points)
                                : menu_cost_grid(params, spec.numerics.x_points);
    const PolicyBand band = solve_stationary_vi(params, 0.0, sgrid).band;
    opt.band = [band](double) { return band.at(0.0); };
    params.theta = 0.0;
  }

  SimulationOptions shown = opt;
  shown.n_paths = std::min(opt.n_paths, kPathsWritten);
  const PathEnsemble ens = simulate_markup_paths(params, grid, shown);
  CsvTable paths({"t", "path_id", "x"});
  for (std::size_t p = 0; p < ens.paths.size(); ++p) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      paths.add_row(std::vector<double>{grid[k], static_cast<double>(p), ens.paths[p][k]});
    }
  }
  out.emit("paths.csv", paths);

  const EnsembleMoments m = simulate_markup_moments(params, grid, opt);
  out.emit("aggregate.csv", path_table("X", grid, m.mean));
  return {0, "simulate: ok paths=" + std::to_string(m.n_paths) + " mean_at_horizon=" + format_number(m.mean.back()) +
                 " se=" + format_number(m.standard_error(grid.n_slices())),
          {}};
}

RunOutcome policy_calvo(const RunSpec& spec, Session& out) {
  const TimeGrid grid = time_grid(spec);
  const ModelParams& p = spec.params;
  double lambda = 0.0;
  try {
    lambda = decay_rate(p);
  } catch (const Error& e) {
    if (e.code() != Errc::EquilibriumBreakdown) throw;
    return {2, "policy-calvo: Breakdown (" + std::string(e.what()) + ")", {}};
  }
  AggregatePath agg{grid, std::vector<double>(grid.size()), lambda};
  for (std::size_t k = 0; k < grid.size(); ++k) agg.values[k] = -p.delta * std::exp(-lambda * grid[k]);
  const ResetSchedule resets = reset_schedule(agg, p);
  out.emit("x_star.csv", path_table("x_star", grid, resets.values));
  if (p.theta > 0) {
    EquilibriumSettings s = settings_of(spec);
    s.model = ModelKind::Calvo;
    out.emit("density.csv", density_table(calvo_stationary_density(p, equilibrium_state_grid(p, grid, s))));
  }
  return {0, "policy-calvo: ok lambda=" + format_number(lambda) + " x_star0=" + format_number(resets.values[0]), {}};
}

RunOutcome policy_menucost(const RunSpec& spec, Session& out) {
  const ModelParams& p = spec.params;
  const StateGrid sgrid = spec.numerics.x_halfwidth
                              ? StateGrid::symmetric(*spec.numerics.x_halfwidth, spec.numerics.x_points)
                              : menu_cost_grid(p, spec.numerics.x_points);
  const MenuCostSolution sol = solve_stationary_vi(p, 0.0, sgrid);
  CsvTable value({"x", "v"});
  for (std::size_t i = 0; i < sgrid.size(); ++i) value.add_row(std::vector<double>{sgrid[i], sol.value.values[i]});
  out.emit("value.csv", value);
  out.emit("band.csv", band_table(sol.band));
  out.emit("density.csv", density_table(stationary_density(sol.band, p, sgrid)));
  return {0, "policy-menucost: ok half_width=" + format_number(sol.band.half_width()) +
                 " reset=" + format_number(sol.band.reset[0]),
          {}};
}

RunOutcome pathintegral_check(const RunSpec& spec, Session& out) {
  const ModelParams& p = spec.params;
  const TimeGrid grid = time_grid(spec);
  const double q = p.b_curv, r = 0.5, qT = 0.0;
  const ControlProblem problem = lq_problem(q, r, qT, p.horizon, p.sigma);

  const FocSolution foc = solve_foc(problem, grid, p.delta);
  const LqReference ref = lq_reference(q, r, qT, p.delta, grid, p.sigma);
  double foc_error = 0.0;
  CsvTable path({"t", "x", "u"});
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double u = k < grid.n_slices() ? foc.u[k] : -qT * foc.x[k] / r;
    path.add_row(std::vector<double>{grid[k], foc.x[k], u});
    foc_error = std::max(foc_error, std::abs(foc.x[k] - ref.x[k]));
  }
  out.emit("foc_path.csv", path);

  const double half = spec.numerics.x_halfwidth.value_or(6.0 * p.sigma * std::sqrt(p.horizon));
  const StateGrid sgrid = StateGrid::symmetric(half, spec.numerics.x_points);
  const ActionLattice lattice = make_lattice(problem, spec.numerics.n_slices, sgrid);
  const std::vector<double> v = propagate_to_start(problem, lattice).value();
  double kernel_error = 0.0;
  CsvTable value({"x", "v"});
  for (std::size_t i = 0; i < sgrid.size(); ++i) {
    value.add_row(std::vector<double>{sgrid[i], v[i]});
    if (std::abs(sgrid[i]) <= 0.5 * half) kernel_error = std::max(kernel_error, std::abs(v[i] - ref.value(0, sgrid[i])));
  }
  out.emit("value.csv", value);
  return {0, "pathintegral-check: ok foc_error=" + format_number(foc_error) + " kernel_error=" +
                 format_number(kernel_error) + " action=" + format_number(foc.action),
          {}};
}

std::string status_line(const RunSpec& spec, const EquilibriumResult& eq) {
  std::string line = std::string(to_string(spec.command)) + ": " + std::string(to_string(eq.status)) + " after " +
                     std::to_string(eq.iterations) + " sweeps, residual " +
                     format_number(eq.residual_history.empty() ? 0.0 : eq.residual_history.back());
  if (!eq.diagnosis.empty()) line += " (" + eq.diagnosis + ")";
  return line;
}

EquilibriumResult equilibrium_files(const RunSpec& spec, Session& out) {
  const TimeGrid grid = time_grid(spec);
  EquilibriumResult eq = solve_equilibrium(spec.params, grid, settings_of(spec));
  out.emit("aggregate.csv", path_table("X", grid, eq.agg.values));
  CsvTable residuals({"iter", "residual"});
  for (std::size_t i = 0; i < eq.residual_history.size(); ++i) {
    residuals.add_row(std::vector<double>{static_cast<double>(i + 1), eq.residual_history[i]});
  }
  out.emit("residuals.csv", residuals);
  if (eq.iterations > 0) {
    if (const auto* resets = std::get_if<ResetSchedule>(&eq.policy)) {
      out.emit("x_star.csv", path_table("x_star", resets->grid, resets->values));
    } else if (const auto* band = std::get_if<PolicyBand>(&eq.policy); band && !band->lower.empty()) {
      out.emit("band.csv", band_table(*band));
    }
  }
  return eq;
}

RunOutcome equilibrium(const RunSpec& spec, Session& out) {
  const EquilibriumResult eq = equilibrium_files(spec, out);
  return {eq.status == EquilibriumStatus::Converged ? 0 : 2, status_line(spec, eq), {}};
}

RunOutcome irf(const RunSpec& spec, Session& out) {
  const EquilibriumResult eq = equilibrium_files(spec, out);
  if (eq.status != EquilibriumStatus::Converged) return {2, status_line(spec, eq), {}};
  const IRFResult res = compute_irf(eq, spec.params);
  out.emit("irf.csv", path_table("Y", res.grid, res.output));
  return {0, "irf: Converged area=" + format_number(res.stats.area) + " half_life=" +
                 format_number(res.stats.half_life) + " hump=" + (res.stats.hump ? "true" : "false"),
          {}};
}

RunOutcome sweep(const RunSpec& spec, Session& out) {
  const double a = spec.params.alpha;
  std::vector<double> alphas;
  if (a == 0.0) {
    alphas = {0.0};
  } else {
    const double lo = std::min(0.0, a), hi = std::max(0.0, a);
    for (std::size_t i = 0; i < kSweepPoints; ++i) {
      alphas.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kSweepPoints - 1));
    }
  }
  const SweepTable table = sweep_alpha(spec.params, time_grid(spec), alphas, settings_of(spec));
  CsvTable csv({"alpha", "status", "area", "half_life", "peak_time", "hump"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const SweepRow& row : table.rows) {
    const bool ok = row.error.empty() && row.status == EquilibriumStatus::Converged;
    csv.add_row(std::vector<std::string>{format_number(row.alpha),
                                         row.error.empty() ? std::string(to_string(row.status)) : "Error",
                                         format_number(ok ? row.stats.area : nan),
                                         format_number(ok ? row.stats.half_life : nan),
                                         format_number(ok ? row.stats.peak_time : nan),
                                         ok ? (row.stats.hump ? "true" : "false") : ""});
  }
  out.emit("sweep.csv", csv);
  std::size_t converged = 0;
  for (const SweepRow& row : table.rows) converged += row.error.empty() && row.status == EquilibriumStatus::Converged;
  return {0, "sweep: ok rows=" + std::to_string(table.rows.size()) + " converged=" + std::to_string(converged) +
                 " convex=" + (table.convexity.strictly_convex ? "true" : "false"),
          {}};
}

RunOutcome critical_alpha(const RunSpec& spec, Session& out) {
  const double a = spec.params.alpha;
  const CriticalAlphaReport rep =
      find_critical_alpha(spec.params, time_grid(spec), a, a + 1.0, kCriticalProbes, settings_of(spec));
  CsvTable csv({"alpha", "status", "area"});
  for (const CriticalProbe& p : rep.probes) {
    csv.add_row(std::vector<std::string>{format_number(p.alpha), std::string(to_string(p.status)),
                                         format_number(p.area.value_or(std::numeric_limits<double>::quiet_NaN()))});
  }
  out.emit("critical.csv", csv);
  return {0, "critical-alpha: ok bracket=[" + format_number(rep.alpha_low) + ", " + format_number(rep.alpha_high) + "]",
          {}};
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += '\n';
}

void CsvTable::add_row(const std::vector<double>& row) {
  std::vector<std::string> cells;
  cells.reserve(row.size());
  for (double v : row) cells.push_back(format_number(v));
  add_row(cells);
}

void CsvTable::add_row(const std::vector<std::string>& row) {
  if (row.size() != columns_) {
    throw Error(Errc::DimensionMismatch, "row has " + std::to_string(row.size()) + " cells, header has " +
                                             std::to_string(columns_));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) text_ += ',';
    text_ += row[i];
  }
  text_ += '\n';
}

void CsvTable::write(const fs::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::Io, "cannot open " + path.string() + " for writing");
  f.write(text_.data(), static_cast<std::streamsize>(text_.size()));
  if (!f) throw Error(Errc::Io, "write failed for " + path.string());
}

RunSpec parse_config(std::string_view text) {
  std::map<std::string, std::pair<std::string, std::size_t>> entries;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parse_error(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) parse_error(line_no, "missing key");
    if (!kStructural.contains(key) && !kNumeric.contains(key) && !kText.contains(key)) {
      throw Error(Errc::UnknownKey, key);
    }
    if (value.empty()) parse_error(line_no, "missing value for '" + key + "'");
    if (entries.contains(key)) parse_error(line_no, "duplicate key '" + key + "'");
    if (!kText.contains(key) && !to_number(value)) {
      parse_error(line_no, "'" + value + "' is not a number (key '" + key + "')");
    }
    entries.emplace(key, std::make_pair(value, line_no));
  }

  RunSpec spec;
  const auto cmd = entries.find("command");
  if (cmd == entries.end()) throw Error(Errc::MissingKey, "command");
  const auto command = to_command(cmd->second.first);
  if (!command) parse_error(cmd->second.second, "unknown command '" + cmd->second.first + "'");
  spec.command = *command;

  if (const auto it = entries.find("model"); it != entries.end()) {
    const std::string& m = it->second.first;
    if (m == "calvo") {
      spec.numerics.model = ModelKind::Calvo;
    } else if (m == "menu_cost" || m == "menu-cost" || m == "menucost") {
      spec.numerics.model = ModelKind::MenuCost;
    } else {
      parse_error(it->second.second, "unknown model '" + m + "'");
    }
  }
  if (const auto it = entries.find("aggregation"); it != entries.end()) {
    const std::string& a = it->second.first;
    if (a == "forward_pde") {
      spec.numerics.aggregation = AggregationKind::ForwardPde;
    } else if (a == "monte_carlo") {
      spec.numerics.aggregation = AggregationKind::MonteCarlo;
    } else {
      parse_error(it->second.second, "unknown aggregation '" + a + "'");
    }
  }
  if (const auto it = entries.find("output_dir"); it != entries.end()) spec.output_dir = it->second.first;

  std::map<std::string, double> raw;
  for (const auto& [key, entry] : entries) {
    if (kStructural.contains(key)) raw[key] = *to_number(entry.first);
  }
  spec.params = validate_params(raw);

  Numerics& n = spec.numerics;
  auto number = [&](const char* key) -> std::optional<double> {
    const auto it = entries.find(key);
    if (it == entries.end()) return std::nullopt;
    return to_number(it->second.first);
  };
  if (auto v = number("n_slices")) n.n_slices = count_value("n_slices", *v, 1);
  if (auto v = number("x_points")) {
    n.x_points = count_value("x_points", *v, 3);
    if (n.x_points % 2 == 0) throw Error(Errc::OutOfRange, "x_points must be odd");
  }
  if (auto v = number("x_halfwidth")) {
    if (!(*v > 0) || !std::isfinite(*v)) throw Error(Errc::OutOfRange, "x_halfwidth must be > 0");
    n.x_halfwidth = *v;
  }
  if (auto v = number("n_paths")) n.n_paths = count_value("n_paths", *v, 1);
  if (auto v = number("seed")) n.seed = count_value("seed", *v, 0);
  if (auto v = number("damping")) {
    if (!(*v > 0 && *v <= 1)) throw Error(Errc::InvalidDamping, "damping must lie in (0, 1]");
    n.damping = *v;
  }
  if (auto v = number("tol")) {
    if (!(*v > 0) || !std::isfinite(*v)) throw Error(Errc::OutOfRange, "tol must be > 0");
    n.tol = *v;
  }
  if (auto v = number("max_iter")) n.max_iter = count_value("max_iter", *v, 1);
  return spec;
}

RunOutcome run_command(const RunSpec& spec) {
  Session session(spec);
  RunOutcome outcome;
  try {
    switch (spec.command) {
      case Command::Simulate: outcome = simulate(spec, session); break;
      case Command::PolicyCalvo: outcome = policy_calvo(spec, session); break;
      case Command::PolicyMenuCost: outcome = policy_menucost(spec, session); break;
      case Command::PathIntegralCheck: outcome = pathintegral_check(spec, session); break;
      case Command::Equilibrium: outcome = equilibrium(spec, session); break;
      case Command::Irf: outcome = irf(spec, session); break;
      case Command::Sweep: outcome = sweep(spec, session); break;
      case Command::CriticalAlpha: outcome = critical_alpha(spec, session); break;
    }
  } catch (const IoFailure& e) {
    outcome = {1, "error in shell: IOError: " + std::string(e.what()), {}};
  } catch (const std::exception& e) {
    outcome = {1, "error in " + std::string(module_of(spec.command)) + ": " + e.what(), {}};
  }
  outcome.files = std::move(session.files);
  return outcome;
}

}  // namespace stickymfg::shell
