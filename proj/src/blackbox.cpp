#include "dnnaif/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace dnnaif {

using json = nlohmann::json;

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::Initial: return "initial";
    case Origin::TryPoint: return "try-point";
    case Origin::Exploration: return "exploration";
    case Origin::Exploitation: return "exploitation";
  }
  return "initial";
}

Origin origin_from_string(std::string_view name) {
  if (name == "initial") return Origin::Initial;
  if (name == "try-point") return Origin::TryPoint;
  if (name == "exploration") return Origin::Exploration;
  if (name == "exploitation") return Origin::Exploitation;
  throw Error(ErrorKind::ParseError, "unknown origin '" + std::string(name) + "'");
}

namespace {

void check_dimension(const Objective& obj, const Vector& x) {
  if (x.size() != obj.dimension) {
    throw Error(ErrorKind::DimensionMismatch,
                "objective '" + obj.descriptor + "' expects dimension " +
                    std::to_string(obj.dimension) + ", got " + std::to_string(x.size()));
  }
}

double call_evaluator(const Objective& obj, const Vector& x, std::uint64_t index) {
  double value = obj.evaluator(x, index);
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::EvaluationFailed,
                "objective '" + obj.descriptor + "' returned a non-finite value");
  }
  return value;
}

}  // namespace

double evaluate(const Objective& obj, const Vector& x, Ledger& ledger, std::size_t iteration,
                Origin origin) {
  if (ledger.exhausted()) {
    throw Error(ErrorKind::BudgetExhausted,
                "budget of " + std::to_string(ledger.budget()) + " evaluations used");
  }
  check_dimension(obj, x);
  const double value = call_evaluator(obj, x, ledger.count());
  ledger.records_.push_back({x, value, iteration, origin});
  return value;
}

int evaluation_threads() {
  if (const char* env = std::getenv("DNNAIF_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> evaluate_batch(const Objective& obj, std::span<const Vector> xs,
                                   Ledger& ledger, std::size_t iteration, Origin origin,
                                   int threads) {
  for (const Vector& x : xs) check_dimension(obj, x);
  if (xs.size() > ledger.remaining()) {
    throw Error(ErrorKind::BudgetExhausted,
                "batch of " + std::to_string(xs.size()) + " exceeds remaining budget of " +
                    std::to_string(ledger.remaining()));
  }
  const std::size_t base = ledger.count();
  std::vector<double> values(xs.size());
  if (threads <= 0) threads = evaluation_threads();
  const std::size_t workers =
      obj.concurrent_safe ? std::min<std::size_t>(static_cast<std::size_t>(threads), xs.size())
                          : 1;

  if (workers <= 1) {
    for (std::size_t i = 0; i < xs.size(); ++i) values[i] = call_evaluator(obj, xs[i], base + i);
  } else {
    std::vector<std::exception_ptr> failures(workers);
    {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < xs.size(); i += workers) {
              values[i] = call_evaluator(obj, xs[i], base + i);
            }
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& failure : failures) {
      if (failure) std::rethrow_exception(failure);
    }
  }

  for (std::size_t i = 0; i < xs.size(); ++i) {
    ledger.records_.push_back({xs[i], values[i], iteration, origin});
  }
  return values;
}

double rosenbrock(const Vector& x, double a, double b) {
  if (x.size() != 2) {
    throw Error(ErrorKind::DimensionMismatch, "rosenbrock is defined on R^2");
  }
  const double r1 = a - x[0];
  const double r2 = x[1] - x[0] * x[0];
  return r1 * r1 + b * r2 * r2;
}

Objective rosenbrock_objective(double a, double b) {
  Objective obj;
  obj.dimension = 2;
  obj.descriptor = "rosenbrock";
  obj.truth = [a, b](const Vector& x) { return rosenbrock(x, a, b); };
  obj.evaluator = [a, b](const Vector& x, std::uint64_t) { return rosenbrock(x, a, b); };
  return obj;
}

double noise_sample(const NoiseSpec& spec, std::uint64_t eval_index) {
  if (spec.kind == NoiseSpec::Kind::None || spec.sigma == 0.0) return 0.0;
  Rng rng = make_rng(spec.seed, streams::kNoise, eval_index);
  std::normal_distribution<double> normal(0.0, spec.sigma);
  return normal(rng);
}

Objective noisy_wrap(const Objective& obj, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "noise sigma must be nonnegative");
  }
  Objective wrapped = obj;
  if (!wrapped.truth) {
    auto base = obj.evaluator;
    wrapped.truth = [base](const Vector& x) { return base(x, 0); };
  }
  if (spec.kind == NoiseSpec::Kind::None) {
    return wrapped;
  }
  wrapped.descriptor = obj.descriptor + "+gaussian";
  wrapped.evaluator = [base = obj.evaluator, spec](const Vector& x, std::uint64_t index) {
    return base(x, index) + noise_sample(spec, index);
  };
  return wrapped;
}

History history_snapshot(const Ledger& ledger) {
  const auto& records = ledger.records();
  History history;
  const Eigen::Index n = records.empty() ? 0 : records.front().x.size();
  history.X.resize(static_cast<Eigen::Index>(records.size()), n);
  history.f.resize(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    history.X.row(row) = records[i].x.transpose();
    history.f[row] = records[i].f;
  }
  return history;
}

double optimality_gap(double f_best_true, double f_star, double tolerance) {
  const double gap = f_best_true - f_star;
  if (gap < -tolerance) {
    throw Error(ErrorKind::NegativeGap, "best value " + std::to_string(f_best_true) +
                                            " lies below the known optimum " +
                                            std::to_string(f_star));
  }
  return std::max(gap, 0.0);
}

std::string history_line(const EvaluationRecord& record) {
  json j;
  j["iter"] = record.iteration;
  j["origin"] = to_string(record.origin);
  j["x"] = std::vector<double>(record.x.data(), record.x.data() + record.x.size());
  j["f"] = record.f;
  return j.dump();
}

EvaluationRecord parse_history_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    EvaluationRecord record;
    record.iteration = j.at("iter").get<std::size_t>();
    record.origin = origin_from_string(j.at("origin").get<std::string>());
    const auto x = j.at("x").get<std::vector<double>>();
    record.x = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    record.f = j.at("f").get<double>();
    return record;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("history record: ") + e.what());
  }
}

void write_history(const std::string& path, std::span<const EvaluationRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path + " for writing");
  for (const auto& record : records) out << history_line(record) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "write to " + path + " failed");
}

std::vector<EvaluationRecord> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::vector<EvaluationRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(parse_history_line(line));
  }
  return records;
}

}  // namespace dnnaif
