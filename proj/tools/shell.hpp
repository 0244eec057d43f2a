#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stickymfg/mean_field.hpp"
#include "stickymfg/params.hpp"

namespace stickymfg::shell {

enum class Command {
  Simulate,
  PolicyCalvo,
  PolicyMenuCost,
  PathIntegralCheck,
  Equilibrium,
  Irf,
  Sweep,
  CriticalAlpha,
};

std::string_view to_string(Command command);

struct Numerics {
  std::size_t n_slices = 400;
  std::size_t x_points = 801;
  std::optional<double> x_halfwidth;
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  double damping = 0.5;
  double tol = 1e-6;
  std::size_t max_iter = 500;
  AggregationKind aggregation = AggregationKind::ForwardPde;
  ModelKind model = ModelKind::Calvo;
};

struct RunSpec {
  Command command = Command::Irf;
  ModelParams params;
  Numerics numerics;
  std::filesystem::path output_dir = ".";
};

/// Parses `key = value` lines; `#` starts a comment. Throws Error{ParseError},
/// Error{UnknownKey} and the parameter validation errors.
RunSpec parse_config(std::string_view text);

struct RunOutcome {
  int exit_code = 0;    // 0 success, 2 model breakdown, 1 error
  std::string summary;  // one line
  std::vector<std::filesystem::path> files;
};

/// Runs one command and writes its CSV files into spec.output_dir. Never
/// throws; errors become exit code 1 with the module named in the summary.
RunOutcome run_command(const RunSpec& spec);

/// Shortest decimal that round-trips to the same double.
std::string format_number(double value);

/// Numeric columns written with format_number, `\n` line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(const std::vector<double>& row);
  void add_row(const std::vector<std::string>& row);
  std::string str() const { return text_; }
  void write(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

}  // namespace stickymfg::shell
