#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnnaif/common.hpp"

namespace dnnaif {

/// Why a point was sent to the true objective.
enum class Origin { Initial, TryPoint, Exploration, Exploitation };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view name);

/// An expensive, possibly noisy, black-box objective.
///
/// The evaluator receives the global evaluation index (the ledger position the
/// result will occupy). Stochastic objectives draw their randomness from a
/// substream keyed on that index, which makes batch evaluation order-free.
/// Throwing Error(EvaluationFailed) or returning a non-finite value signals a
/// failed evaluation.
struct Objective {
  using Evaluator = std::function<double(const Vector& x, std::uint64_t eval_index)>;
  using Truth = std::function<double(const Vector& x)>;

  int dimension = 0;
  Evaluator evaluator;
  std::string descriptor;
  // Noiseless value for reporting only; never charged to a ledger.
  Truth truth;
  // False forces evaluate_batch to run sequentially.
  bool concurrent_safe = true;
};

struct NoiseSpec {
  enum class Kind { None, AdditiveGaussian };
  Kind kind = Kind::None;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct EvaluationRecord {
  Vector x;
  double f = 0.0;
  std::size_t iteration = 0;
  Origin origin = Origin::Initial;
};

/// Append-only record of true-function evaluations with an optional budget.
class Ledger {
 public:
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

  explicit Ledger(std::size_t budget = kUnbounded) : budget_(budget) {}

  std::size_t count() const noexcept { return records_.size(); }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t remaining() const noexcept { return budget_ - records_.size(); }
  bool exhausted() const noexcept { return records_.size() >= budget_; }
  const std::vector<EvaluationRecord>& records() const noexcept { return records_; }

 private:
  friend double evaluate(const Objective&, const Vector&, Ledger&, std::size_t, Origin);
  friend std::vector<double> evaluate_batch(const Objective&, std::span<const Vector>, Ledger&,
                                            std::size_t, Origin, int);

  std::vector<EvaluationRecord> records_;
  std::size_t budget_;
};

/// Evaluates obj at x and appends exactly one record.
double evaluate(const Objective& obj, const Vector& x, Ledger& ledger, std::size_t iteration,
                Origin origin);

/// Evaluates all points, possibly concurrently. Either every record is
/// appended (in input order) or none is. threads <= 0 uses evaluation_threads().
std::vector<double> evaluate_batch(const Objective& obj, std::span<const Vector> xs,
                                   Ledger& ledger, std::size_t iteration, Origin origin,
                                   int threads = 0);

/// Thread count for batch evaluation: DNNAIF_THREADS if set, else hardware cores.
int evaluation_threads();

double rosenbrock(const Vector& x, double a = 1.0, double b = 100.0);

Objective rosenbrock_objective(double a = 1.0, double b = 100.0);

/// Wraps obj with additive noise f_s(x) + phi, phi ~ N(0, sigma^2). The noise
/// for evaluation i comes from a substream keyed on (seed, i).
Objective noisy_wrap(const Objective& obj, const NoiseSpec& spec);

/// The noise value the wrapper adds at evaluation index i.
double noise_sample(const NoiseSpec& spec, std::uint64_t eval_index);

struct History {
  Matrix X;  // one row per record
  Vector f;
};

History history_snapshot(const Ledger& ledger);

double optimality_gap(double f_best_true, double f_star, double tolerance = 1e-9);

// Line-delimited JSON: {"iter":..,"origin":..,"x":[..],"f":..} per record.
void write_history(const std::string& path, std::span<const EvaluationRecord> records);
std::vector<EvaluationRecord> read_history(const std::string& path);

std::string history_line(const EvaluationRecord& record);
EvaluationRecord parse_history_line(std::string_view line);

}  // namespace dnnaif
