// bloch-homog: command-line driver for the verification pipelines.

#include <CLI11.hpp>
#include <bloch_homog/cli.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace bh = bloch_homog;
namespace cli = bloch_homog::cli;

namespace {

void print_error(const std::string& reason, const std::string& message) {
  std::cerr << cli::json{{"error", reason}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogenization tensors, Bloch-wave checks and 1D flux convergence"};
  std::string mode_name, config_path, out_dir = ".";
  std::optional<int> resolution;
  std::optional<double> tol;
  app.add_option("mode", mode_name, "tensors | bloch-verify | bounds | transform-check | converge-1d | variational | all")
      ->required();
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--resolution", resolution, "grid points per axis (overrides the config)");
  app.add_option("--tol", tol, "solver tolerance (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  cli::RunConfig cfg;
  try {
    const auto mode = cli::parse_mode(mode_name);
    std::ifstream in(config_path);
    if (!in) throw cli::ConfigError("cannot open config file " + config_path);
    cli::json j;
    try {
      in >> j;
    } catch (const cli::json::parse_error& e) {
      throw cli::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = cli::parse_config(j, mode, std::filesystem::path(config_path).parent_path());
    cli::apply_overrides(cfg, resolution, tol);
  } catch (const bh::Error& e) {
    print_error(e.reason(), e.what());
    return 3;
  }

  cli::RunReport report;
  try {
    report = cli::run(cfg);
  } catch (const bh::Error& e) {
    print_error(e.reason(), e.what());
    return cli::exit_code_for(e);
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 2;
  }

  try {
    cli::emit_report(report, out_dir);
  } catch (const bh::Error& e) {
    print_error(e.reason(), e.what());
    return 2;
  }
  for (const auto& [name, c] : report.report["checks"].items())
    std::printf("%s %s\n", c["pass"].get<bool>() ? "PASS" : "FAIL", name.c_str());
  return report.exit_code();
}
