#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dnnaif/experiment.hpp"

namespace {

int run_command(const std::string& config_path, const std::optional<std::string>& output,
                const std::optional<std::uint64_t>& seed, const std::optional<int>& runs) {
  dnnaif::ExperimentConfig cfg = dnnaif::parse_config(config_path);
  if (output) cfg.output_dir = *output;
  if (seed) cfg.seed = *seed;
  if (runs) cfg.runs = *runs;
  cfg.validate();
  std::cout << "problem " << dnnaif::to_string(cfg.problem) << ", method "
            << dnnaif::to_string(cfg.method) << ", " << cfg.runs << " run(s), threads "
            << dnnaif::evaluation_threads() << "\n";
  const dnnaif::RunReport report =
      dnnaif::run_experiment(cfg, std::filesystem::path(cfg.output_dir));
  for (const dnnaif::RunResult& r : report.runs) {
    std::printf("seed %llu: %zu evaluations, %.2f s\n", static_cast<unsigned long long>(r.seed),
                r.evaluations, r.wall_seconds);
  }
  std::cout << "wrote " << cfg.output_dir << " (config " << dnnaif::config_hash(cfg) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit filtering with a residual-network surrogate"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  auto* run = app.add_subcommand("run", "Run an experiment and write metrics");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--output", output, "Output directory (overrides output_dir)");
  run->add_option("--seed", seed, "Base seed (overrides seed)");
  run->add_option("--runs", runs, "Number of runs (overrides runs)");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, output, seed, runs);
    const dnnaif::ExperimentConfig cfg = dnnaif::parse_config(config_path);
    std::cout << "ok " << dnnaif::config_hash(cfg) << "\n";
    return 0;
  } catch (const dnnaif::Error& e) {
    std::cerr << e.what() << "\n";
    return dnnaif::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}
