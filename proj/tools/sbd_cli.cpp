// sbd: run, validate and emit experiment configurations.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sbd/config.hpp"
#include "sbd/experiments.hpp"

namespace fs = std::filesystem;
using namespace sbd;

namespace {

constexpr const char* kOutputEnv = "SBD_OUTPUT_DIR";

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::UnsupportedRegime: return 2;
    case ErrorKind::IOError: return 3;
    default: return 4;
  }
}

void report_error(const std::string& kind, const std::string& message) {
  json j{{"status", "error"}, {"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

fs::path output_dir(const ExperimentConfig& cfg, const std::optional<std::string>& cli_out) {
  if (cli_out) return *cli_out;
  fs::path base = ".";
  if (const char* env = std::getenv(kOutputEnv); env && *env) base = env;
  const std::string leaf = cfg.output_dir.empty() ? cfg.experiment : cfg.output_dir;
  const fs::path p(leaf);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Becker-Doring simulations and their Lifshitz-Slyozov limit"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<double> budget;
  app.add_option("--seed", seed, "Override the master seed");
  app.add_option("--workers", workers, "Override the worker count")->check(CLI::PositiveNumber);
  app.add_option("--budget", budget, "Override the per-trajectory event ceiling")->check(CLI::PositiveNumber);

  std::string config_path;
  std::optional<std::string> run_out;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", run_out, "Output directory (default: $SBD_OUTPUT_DIR/<output_dir>)");

  auto* validate = app.add_subcommand("validate", "Dry-run validation of a JSON config");
  validate->add_option("config", config_path, "Config file")->required();

  std::string preset_name;
  std::string preset_out;
  auto* pre = app.add_subcommand("preset", "Write a preset config");
  pre->add_option("name", preset_name, "fig1, fig2 or fig3")->required()->check(CLI::IsMember(preset_names()));
  pre->add_option("--out", preset_out, "Directory for <name>.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*pre) {
      fs::create_directories(preset_out);
      const fs::path file = fs::path(preset_out) / (preset_name + ".json");
      std::ofstream os(file, std::ios::binary);
      if (!os) fail(ErrorKind::IOError, "cannot write " + file.string());
      os << apply_overrides(preset(preset_name), seed, workers, budget).dump(2) << "\n";
      std::cout << file.string() << "\n";
      return 0;
    }

    const json doc = apply_overrides(read_json_file(config_path), seed, workers, budget);
    if (*validate) {
      ValidationReport rep;
      try {
        rep = validate_config(parse_config(doc));
      } catch (const Error& e) {
        rep.errors.push_back(e.what());
      }
      std::cout << rep.to_json().dump(2) << "\n";
      return rep.ok() ? 0 : 2;
    }

    const auto cfg = parse_config(doc);
    const auto outcome = run_experiment(cfg, output_dir(cfg, run_out));
    json done{{"status", "ok"}, {"directory", outcome.directory.string()}, {"artifacts", outcome.files},
              {"summary", outcome.summary}};
    std::cout << done.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    report_error(std::string(to_string(e.kind())), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    report_error("IOError", e.what());
    return 3;
  } catch (const std::exception& e) {
    report_error("InternalError", e.what());
    return 5;
  }
}
