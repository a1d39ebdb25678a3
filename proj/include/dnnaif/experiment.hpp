#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnnaif/cdg.hpp"
#include "dnnaif/optimize.hpp"

namespace dnnaif {

enum class Problem { RosenbrockNoisy, RosenbrockClean, CdgToy };
enum class Method { ImplicitFiltering, DnnOnly, Dnnaif, Dirichlet };

std::string_view to_string(Problem problem);
std::string_view to_string(Method method);
Problem problem_from_string(std::string_view name);
Method method_from_string(std::string_view name);

struct RosenbrockSettings {
  double a = 1.0;
  double b = 100.0;
  double sigma = 1.0;  // ignored by rosenbrock-clean
  std::vector<double> start{-6.0, 6.0};
};

struct CdgExperimentSettings {
  int n_cycles = 1000;
  double epsilon = 0.01;
  double threshold = 0.05;
  std::array<double, 5> alpha{1.0, 1.0, 1.0, 1.0, 1.0};
  // Empty means the built-in manifest.
  std::string events_path;
};

struct ExperimentConfig {
  Problem problem = Problem::RosenbrockNoisy;
  Method method = Method::ImplicitFiltering;
  int runs = 10;
  std::uint64_t seed = 0;
  std::string output_dir = "results";
  // Evaluations per run; unset means unbounded.
  std::optional<std::size_t> budget;

  IFConfig if_cfg;  // n_s is the per-iteration point count for if and dnn-only
  // DNNAIF: exploration + filtered points per iteration (the try point is
  // extra). if_cfg, arch.input_dim and the seeds inside are filled per run.
  int pool_points = 10;
  DNNAIFConfig dnnaif;

  RosenbrockSettings rosenbrock;
  CdgExperimentSettings cdg;

  void validate() const;
};

/// Problem defaults: the Rosenbrock preset (h0 = 30, tau = 0.9, 11 points,
/// 10 iterations, 10 runs) or the CDG preset.
ExperimentConfig default_config(Problem problem);

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(std::string_view text);
/// Every field, so that parse_config_text(config_to_string(c)) reproduces c.
std::string config_to_string(const ExperimentConfig& cfg);
/// SHA-256 over the canonical config without output_dir.
std::string config_hash(const ExperimentConfig& cfg);

std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t run);
DNNAIFConfig effective_dnnaif_config(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<IterationTrace> traces;
  std::vector<int> coverage;  // cdg-toy: unhit count after each test
  std::vector<FilterRecord> filter_log;
  std::vector<TryPointRecord> try_log;
  std::vector<EvaluationRecord> history;  // every true evaluation (empty for dirichlet)
  std::size_t evaluations = 0;
  bool truncated = false;
  int training_failures = 0;
  double wall_seconds = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<RunResult> runs;
  std::optional<std::string> aborted;
};

RunResult run_single(const ExperimentConfig& cfg, std::size_t run);

/// Runs cfg.runs seeded runs. With persist_dir, each run's files are written
/// as soon as it finishes, and a failing run still leaves the aggregate and
/// manifest of the completed ones behind before the error propagates.
RunReport run_experiment(const ExperimentConfig& cfg,
                         const std::optional<std::filesystem::path>& persist_dir = {});

inline constexpr double kGapFloor = 1e-16;

struct GapRow {
  std::size_t iter = 0;
  double h = 0.0;
  double mean_log10_gap = 0.0;
  double std_log10_gap = 0.0;
  double mean_evals = 0.0;
};

struct CoverageRow {
  std::size_t tests = 0;
  double mean_unhit = 0.0;
  double std_unhit = 0.0;
};

/// One row per trace row; shorter runs carry their last row forward.
std::vector<GapRow> aggregate_gap(const std::vector<std::vector<IterationTrace>>& runs,
                                  double f_star = 0.0);
std::vector<CoverageRow> aggregate_coverage(const std::vector<std::vector<int>>& runs);

std::string gap_table(const std::vector<GapRow>& rows);
std::string coverage_table(const std::vector<CoverageRow>& rows);

std::string trace_line(const IterationTrace& trace);
IterationTrace parse_trace_line(std::string_view line);
std::vector<IterationTrace> read_traces(const std::filesystem::path& path);
std::vector<int> read_coverage(const std::filesystem::path& path);

/// Writes per-run traces, the aggregate table and manifest.json. Returns the
/// written paths.
std::vector<std::filesystem::path> emit_metrics(const RunReport& report,
                                                const std::filesystem::path& dir);

/// Process exit code for an error kind (0 is success).
int exit_code(ErrorKind kind);

}  // namespace dnnaif
