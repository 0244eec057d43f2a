#include <fstream>
#include <iostream>
#include <iterator>
#include <string>

#include "CLI11.hpp"
#include "shell.hpp"
#include "stickymfg/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sticky-price mean-field solver"};
  std::string config;
  std::string output_dir;
  app.add_option("config", config, "configuration file ('-' reads standard input)")->required();
  app.add_option("-o,--output-dir", output_dir, "overrides output_dir from the configuration");
  CLI11_PARSE(app, argc, argv);

  std::string text;
  if (config == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream in(config, std::ios::binary);
    if (!in) {
      std::cerr << "error in shell: IOError: cannot read " << config << "\n";
      return 1;
    }
    text.assign(std::istreambuf_iterator<char>(in), {});
  }

  stickymfg::shell::RunSpec spec;
  try {
    spec = stickymfg::shell::parse_config(text);
  } catch (const std::exception& e) {
    std::cerr << "error in shell: " << e.what() << "\n";
    return 1;
  }
  if (!output_dir.empty()) spec.output_dir = output_dir;

  const auto outcome = stickymfg::shell::run_command(spec);
  (outcome.exit_code == 1 ? std::cerr : std::cout) << outcome.summary << "\n";
  return outcome.exit_code;
}
