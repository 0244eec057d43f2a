#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "shell.hpp"
#include "test_helpers.hpp"

using namespace stickymfg;
using namespace stickymfg::shell;
using testing::error_code;
namespace fs = std::filesystem;

namespace {

const std::string kBase =
    "sigma = 0.1\ntheta = 1\nrho = 0.02\nalpha = 0.5\nb_curv = 20\npsi = 0.01\ndelta = 0.01\nhorizon = 10\n";

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stickymfg_shell_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunSpec spec_for(const std::string& extra, const fs::path& dir) {
  RunSpec spec = parse_config(kBase + extra);
  spec.output_dir = dir;
  return spec;
}

}  // namespace

TEST_SUITE("shell") {
  TEST_CASE("defaults and comments") {
    const RunSpec spec = parse_config("# run\ncommand = irf  # trailing\n\n" + kBase);
    CHECK(spec.command == Command::Irf);
    CHECK(spec.params.alpha == 0.5);
    CHECK(spec.numerics.n_slices == 400);
    CHECK(spec.numerics.x_points == 801);
    CHECK(spec.numerics.n_paths == 100000);
    CHECK(spec.numerics.seed == 1);
    CHECK(spec.numerics.damping == 0.5);
    CHECK(spec.numerics.tol == 1e-6);
    CHECK(spec.numerics.max_iter == 500);
    CHECK(spec.numerics.aggregation == AggregationKind::ForwardPde);
    CHECK(spec.numerics.model == ModelKind::Calvo);
    CHECK_FALSE(spec.numerics.x_halfwidth);
  }

  TEST_CASE("numeric controls and enumerations") {
    const RunSpec spec = parse_config(kBase +
                                      "command = equilibrium\nmodel = menu_cost\naggregation = monte_carlo\n"
                                      "n_slices = 50\nx_points = 201\nx_halfwidth = 0.3\nn_paths = 1000\n"
                                      "seed = 7\ndamping = 1\ntol = 1e-5\nmax_iter = 20\noutput_dir = out\n");
    CHECK(spec.command == Command::Equilibrium);
    CHECK(spec.numerics.model == ModelKind::MenuCost);
    CHECK(spec.numerics.aggregation == AggregationKind::MonteCarlo);
    CHECK(spec.numerics.n_slices == 50);
    CHECK(spec.numerics.x_points == 201);
    CHECK(spec.numerics.x_halfwidth == 0.3);
    CHECK(spec.numerics.seed == 7);
    CHECK(spec.numerics.max_iter == 20);
    CHECK(spec.output_dir == fs::path("out"));
    for (const char* cmd : {"simulate", "policy-calvo", "policy-menucost", "pathintegral-check", "equilibrium", "irf",
                            "sweep", "critical-alpha"}) {
      CHECK(to_string(parse_config(kBase + "command = " + cmd + "\n").command) == cmd);
    }
  }

  TEST_CASE("configuration errors") {
    auto code = [](const std::string& text) { return error_code([&] { parse_config(text); }); };
    CHECK(code(kBase) == Errc::MissingKey);
    CHECK(code("command = irf\n") == Errc::MissingKey);
    CHECK(code(kBase + "command = irf\nbogus = 1\n") == Errc::UnknownKey);
    CHECK(code(kBase + "command = irf\nn_slices 5\n") == Errc::ParseError);
    CHECK(code(kBase + "command = irf\nsigma = 0.2\n") == Errc::ParseError);
    CHECK(code(kBase + "command = irf\ntol = fast\n") == Errc::ParseError);
    CHECK(code(kBase + "command = irf\ntol =\n") == Errc::ParseError);
    CHECK(code(kBase + "command = dance\n") == Errc::ParseError);
    CHECK(code(kBase + "command = irf\nmodel = taylor\n") == Errc::ParseError);
    CHECK(code(kBase + "command = irf\nx_points = 800\n") == Errc::OutOfRange);
    CHECK(code(kBase + "command = irf\nn_slices = 2.5\n") == Errc::OutOfRange);
    CHECK(code(kBase + "command = irf\ndamping = 0\n") == Errc::InvalidDamping);
    try {
      parse_config(kBase + "command = irf\n\nseed 3\n");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 11") != std::string::npos);
    }
  }

  TEST_CASE("number formatting round-trips") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(-0.0125) == "-0.0125");
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
      CHECK(std::stod(format_number(v)) == v);
    }
  }

  TEST_CASE("csv tables") {
    CsvTable t({"t", "X"});
    t.add_row(std::vector<double>{0.0, -0.01});
    t.add_row(std::vector<std::string>{"0.5", "nan"});
    CHECK(t.str() == "t,X\n0,-0.01\n0.5,nan\n");
    CHECK(error_code([&] { t.add_row(std::vector<double>{1.0}); }) == Errc::DimensionMismatch);
  }

  TEST_CASE("irf run writes a reproducible golden file") {
    const fs::path a = scratch_dir("irf_a"), b = scratch_dir("irf_b");
    const RunOutcome first = run_command(spec_for("command = irf\nn_slices = 100\ntol = 1e-9\n", a));
    const RunOutcome second = run_command(spec_for("command = irf\nn_slices = 100\ntol = 1e-9\n", b));
    REQUIRE(first.exit_code == 0);
    REQUIRE(second.exit_code == 0);
    CHECK(first.summary.find("area") != std::string::npos);
    REQUIRE(fs::exists(a / "irf.csv"));
    CHECK(fs::exists(a / "aggregate.csv"));
    CHECK(fs::exists(a / "residuals.csv"));
    CHECK(fs::exists(a / "x_star.csv"));
    const std::string golden = slurp(a / "irf.csv");
    CHECK(golden.rfind("t,Y\n0,", 0) == 0);
    CHECK(golden == slurp(b / "irf.csv"));
  }

  TEST_CASE("breakdown maps to exit code 2") {
    RunSpec spec = spec_for("command = equilibrium\nn_slices = 100\n", scratch_dir("breakdown"));
    spec.params.alpha = 1.2;
    spec.params.breakdown_risk = true;
    const RunOutcome out = run_command(spec);
    CHECK(out.exit_code == 2);
    CHECK(out.summary.find("Breakdown") != std::string::npos);
    spec.command = Command::PolicyCalvo;
    CHECK(run_command(spec).exit_code == 2);
  }

  TEST_CASE("errors name the module or the path") {
    const RunOutcome io = run_command(spec_for("command = policy-calvo\n", "/proc/stickymfg/denied"));
    CHECK(io.exit_code == 1);
    CHECK(io.summary.find("/proc/stickymfg/denied") != std::string::npos);
    const RunOutcome narrow =
        run_command(spec_for("command = policy-menucost\nx_halfwidth = 0.05\n", scratch_dir("narrow")));
    CHECK(narrow.exit_code == 1);
    CHECK(narrow.summary.find("error in menu_cost_policy") != std::string::npos);
  }

  TEST_CASE("policy and simulation outputs") {
    const fs::path dir = scratch_dir("outputs");
    CHECK(run_command(spec_for("command = policy-calvo\nn_slices = 50\n", dir)).exit_code == 0);
    CHECK(fs::exists(dir / "x_star.csv"));
    CHECK(fs::exists(dir / "density.csv"));
    const RunOutcome menu = run_command(spec_for("command = policy-menucost\nx_points = 401\n", dir));
    CHECK(menu.exit_code == 0);
    CHECK(slurp(dir / "band.csv").rfind("lower,upper,reset\n", 0) == 0);
    CHECK(fs::exists(dir / "value.csv"));
    const RunOutcome sim = run_command(spec_for("command = simulate\nn_slices = 20\nn_paths = 300\n", dir));
    CHECK(sim.exit_code == 0);
    std::ifstream paths(dir / "paths.csv");
    std::size_t lines = 0;
    for (std::string line; std::getline(paths, line);) ++lines;
    CHECK(lines > 1);
    CHECK(fs::exists(dir / "aggregate.csv"));
    const RunOutcome check = run_command(spec_for("command = pathintegral-check\nn_slices = 100\nx_points = 401\n", dir));
    CHECK(check.exit_code == 0);
    CHECK(slurp(dir / "foc_path.csv").rfind("t,x,u\n", 0) == 0);
  }
}
