#include "dnnaif/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

namespace dnnaif {

namespace {

using json = nlohmann::json;

[[noreturn]] void parse_fail(const std::string& field, const std::string& message) {
  throw Error(ErrorKind::ParseError, field + ": " + message);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed access to one JSON object that remembers which keys were consumed,
// so that leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) parse_fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  void read(const char* key, int& out) { read_with(key, out, &json::is_number_integer, "an integer"); }
  void read(const char* key, double& out) { read_with(key, out, &json::is_number, "a number"); }
  void read(const char* key, bool& out) { read_with(key, out, &json::is_boolean, "a boolean"); }
  void read(const char* key, std::string& out) {
    read_with(key, out, &json::is_string, "a string");
  }
  void read(const char* key, std::uint64_t& out) {
    read_with(key, out, &json::is_number_unsigned, "a nonnegative integer");
  }

  void read(const char* key, std::optional<double>& out) {
    if (!mark(key)) return;
    const json& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
    } else if (v.is_number()) {
      out = v.get<double>();
    } else {
      parse_fail(join(path_, key), "expected a number or null");
    }
  }

  void read(const char* key, std::optional<std::size_t>& out) {
    if (!mark(key)) return;
    const json& v = j_.at(key);
    if (v.is_null()) {
      out.reset();
    } else if (v.is_number_unsigned()) {
      out = v.get<std::size_t>();
    } else {
      parse_fail(join(path_, key), "expected a nonnegative integer or null");
    }
  }

  void read(const char* key, std::vector<double>& out) {
    if (!mark(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) parse_fail(join(path_, key), "expected an array of numbers");
    std::vector<double> values;
    for (const json& e : v) {
      if (!e.is_number()) parse_fail(join(path_, key), "expected an array of numbers");
      values.push_back(e.get<double>());
    }
    out = std::move(values);
  }

  template <typename Enum>
  void read_enum(const char* key, Enum& out, Enum (*convert)(std::string_view)) {
    std::string name;
    if (!has(key)) return;
    read(key, name);
    try {
      out = convert(name);
    } catch (const Error&) {
      parse_fail(join(path_, key), "unknown value '" + name + "'");
    }
  }

  std::optional<Section> child(const char* key) {
    if (!mark(key)) return std::nullopt;
    return Section(j_.at(key), join(path_, key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.contains(item.key())) parse_fail(join(path_, item.key()), "unknown key");
    }
  }

 private:
  bool mark(const char* key) {
    if (!j_.contains(key)) return false;
    used_.insert(key);
    return true;
  }

  template <typename T>
  void read_with(const char* key, T& out, bool (json::*check)() const noexcept,
                 const char* expected) {
    if (!mark(key)) return;
    const json& v = j_.at(key);
    if (!(v.*check)()) parse_fail(join(path_, key), std::string("expected ") + expected);
    out = v.get<T>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

void read_if(Section s, IFConfig& c) {
  s.read("h0", c.h0);
  s.read("h_min", c.h_min);
  s.read("tau_tr", c.tau_tr);
  s.read("points", c.n_s);
  s.read("iterations", c.max_iterations);
  s.read_enum("directions", c.direction_kind, &direction_kind_from_string);
  s.finish();
}

void read_dnnaif(Section s, ExperimentConfig& cfg) {
  DNNAIFConfig& d = cfg.dnnaif;
  s.read("pool_points", cfg.pool_points);
  s.read("try_steps", d.s);
  s.read("filter_draws", d.n_s_filter);
  s.read("retrain_every", d.retrain_every);
  s.read("initial_points", d.initial_points);
  s.read("initial_radius", d.initial_radius);
  if (auto sched = s.child("schedule")) {
    sched->read("initial_fraction", d.schedule.initial_fraction);
    sched->read("final_fraction", d.schedule.final_fraction);
    sched->read("decay_iterations", d.schedule.decay_iterations);
    sched->finish();
  }
  if (auto armijo = s.child("armijo")) {
    armijo->read("mu0", d.armijo.mu0);
    armijo->read("c", d.armijo.c);
    armijo->read("backtrack", d.armijo.backtrack);
    armijo->read("max_backtracks", d.armijo.max_backtracks);
    armijo->finish();
  }
  s.finish();
}

void read_network(Section s, Architecture& a) {
  s.read("hidden_dim", a.hidden_dim);
  s.read("depth", a.depth);
  s.read("alpha", a.alpha);
  s.read_enum("g_mode", a.g_mode, &g_mode_from_string);
  s.read_enum("head", a.head, &head_from_string);
  s.finish();
}

void read_training(Section s, TrainingConfig& t) {
  s.read("iterations", t.iterations);
  s.read("batch_size", t.batch_size);
  s.read("learning_rate", t.learning_rate);
  s.read("warm_start", t.warm_start);
  s.read("normalize_inputs", t.normalize_inputs);
  s.read("normalize_targets", t.normalize_targets);
  s.finish();
}

void read_rosenbrock(Section s, RosenbrockSettings& r) {
  s.read("a", r.a);
  s.read("b", r.b);
  s.read("sigma", r.sigma);
  s.read("start", r.start);
  s.finish();
}

void read_cdg(Section s, CdgExperimentSettings& c) {
  s.read("n_cycles", c.n_cycles);
  s.read("epsilon", c.epsilon);
  s.read("threshold", c.threshold);
  std::vector<double> alpha(c.alpha.begin(), c.alpha.end());
  s.read("alpha", alpha);
  if (alpha.size() != c.alpha.size()) parse_fail("cdg.alpha", "expected 5 entries");
  std::copy(alpha.begin(), alpha.end(), c.alpha.begin());
  s.read("events", c.events_path);
  s.finish();
}

json config_json(const ExperimentConfig& cfg, bool with_output_dir) {
  const IFConfig& i = cfg.if_cfg;
  const DNNAIFConfig& d = cfg.dnnaif;
  json j;
  j["problem"] = to_string(cfg.problem);
  j["method"] = to_string(cfg.method);
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  if (with_output_dir) j["output_dir"] = cfg.output_dir;
  j["budget"] = cfg.budget ? json(*cfg.budget) : json(nullptr);
  j["if"] = {{"h0", i.h0},
             {"h_min", i.h_min ? json(*i.h_min) : json(nullptr)},
             {"tau_tr", i.tau_tr},
             {"points", i.n_s},
             {"iterations", i.max_iterations},
             {"directions", to_string(i.direction_kind)}};
  j["dnnaif"] = {{"pool_points", cfg.pool_points},
                 {"try_steps", d.s},
                 {"filter_draws", d.n_s_filter},
                 {"retrain_every", d.retrain_every},
                 {"initial_points", d.initial_points},
                 {"initial_radius", d.initial_radius},
                 {"schedule",
                  {{"initial_fraction", d.schedule.initial_fraction},
                   {"final_fraction", d.schedule.final_fraction},
                   {"decay_iterations", d.schedule.decay_iterations}}},
                 {"armijo",
                  {{"mu0", d.armijo.mu0},
                   {"c", d.armijo.c},
                   {"backtrack", d.armijo.backtrack},
                   {"max_backtracks", d.armijo.max_backtracks}}}};
  j["network"] = {{"hidden_dim", d.arch.hidden_dim},
                  {"depth", d.arch.depth},
                  {"alpha", d.arch.alpha},
                  {"g_mode", to_string(d.arch.g_mode)},
                  {"head", to_string(d.arch.head)}};
  j["training"] = {{"iterations", d.training.iterations},
                   {"batch_size", d.training.batch_size},
                   {"learning_rate", d.training.learning_rate},
                   {"warm_start", d.training.warm_start},
                   {"normalize_inputs", d.training.normalize_inputs},
                   {"normalize_targets", d.training.normalize_targets}};
  j["rosenbrock"] = {{"a", cfg.rosenbrock.a},
                     {"b", cfg.rosenbrock.b},
                     {"sigma", cfg.rosenbrock.sigma},
                     {"start", cfg.rosenbrock.start}};
  j["cdg"] = {{"n_cycles", cfg.cdg.n_cycles},
              {"epsilon", cfg.cdg.epsilon},
              {"threshold", cfg.cdg.threshold},
              {"alpha", cfg.cdg.alpha},
              {"events", cfg.cdg.events_path}};
  return j;
}

bool is_rosenbrock(Problem p) { return p != Problem::CdgToy; }

cdg::CdgSettings cdg_settings(const ExperimentConfig& cfg, std::uint64_t seed) {
  cdg::CdgSettings s;
  s.n_cycles = cfg.cdg.n_cycles;
  s.epsilon = cfg.cdg.epsilon;
  s.threshold = cfg.cdg.threshold;
  s.seed = seed;
  if (!cfg.cdg.events_path.empty()) s.events = cdg::load_event_manifest(cfg.cdg.events_path);
  return s;
}

template <typename Result>
void absorb(RunResult& out, const Result& r) {
  out.traces = r.traces;
  out.truncated = r.state.truncated;
}

}  // namespace

std::string_view to_string(Problem problem) {
  switch (problem) {
    case Problem::RosenbrockNoisy: return "rosenbrock-noisy";
    case Problem::RosenbrockClean: return "rosenbrock-clean";
    case Problem::CdgToy: return "cdg-toy";
  }
  return "rosenbrock-noisy";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::ImplicitFiltering: return "if";
    case Method::DnnOnly: return "dnn-only";
    case Method::Dnnaif: return "dnnaif";
    case Method::Dirichlet: return "dirichlet";
  }
  return "if";
}

Problem problem_from_string(std::string_view name) {
  for (Problem p : {Problem::RosenbrockNoisy, Problem::RosenbrockClean, Problem::CdgToy}) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorKind::ParseError, "unknown problem '" + std::string(name) + "'");
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::ImplicitFiltering, Method::DnnOnly, Method::Dnnaif, Method::Dirichlet}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorKind::ParseError, "unknown method '" + std::string(name) + "'");
}

ExperimentConfig default_config(Problem problem) {
  ExperimentConfig cfg;
  cfg.problem = problem;
  DNNAIFConfig& d = cfg.dnnaif;
  d.arch.hidden_dim = 16;
  d.arch.g_mode = GMode::NegAlphaKTranspose;
  d.arch.alpha = 1.0;
  d.training.batch_size = 32;
  d.training.iterations = 1000;
  if (is_rosenbrock(problem)) {
    cfg.runs = 10;
    cfg.if_cfg.h0 = 30.0;
    cfg.if_cfg.tau_tr = 0.9;
    cfg.if_cfg.n_s = 11;
    cfg.if_cfg.max_iterations = 10;
    cfg.pool_points = 10;
    d.schedule = {1.0, 0.2, 10};
    d.n_s_filter = 100;
    d.initial_points = 10;
    d.initial_radius = 1.0;
    d.arch.depth = 30;
    d.training.learning_rate = 1e-2;
  } else {
    cfg.runs = 8;
    cfg.budget = 3000;
    cfg.if_cfg.h0 = 0.7;
    cfg.if_cfg.tau_tr = 0.99;
    cfg.if_cfg.n_s = 20;
    cfg.if_cfg.max_iterations = 1000;
    cfg.pool_points = 20;
    d.schedule = {0.5, 0.5, 0};
    d.n_s_filter = 200;
    d.initial_points = 0;
    d.arch.depth = 4;
    d.training.learning_rate = 2e-2;
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& message) { throw Error(ErrorKind::ValidationError, message); };
  if (runs < 1) fail("runs must be positive");
  if (method == Method::Dirichlet && problem != Problem::CdgToy) {
    fail("method dirichlet is only defined for cdg-toy");
  }
  if (budget && *budget == 0) fail("budget must be positive when set");
  if_cfg.validate();
  if (method == Method::Dnnaif || method == Method::DnnOnly) {
    if (pool_points < 1) fail("pool_points must be positive");
    effective_dnnaif_config(*this, 0).validate();
  }
  if (is_rosenbrock(problem)) {
    if (rosenbrock.start.empty()) fail("rosenbrock.start must not be empty");
    if (!(rosenbrock.sigma >= 0.0)) fail("rosenbrock.sigma must be >= 0");
  } else {
    if (!budget) fail("cdg-toy needs a budget");
    if (cdg.n_cycles < 1) fail("cdg.n_cycles must be positive");
    if (!(cdg.epsilon > 0.0)) fail("cdg.epsilon must be positive");
    if (!(cdg.threshold > 0.0 && cdg.threshold <= 1.0)) fail("cdg.threshold must lie in (0, 1]");
    for (double a : cdg.alpha) {
      if (!(a > 0.0)) fail("cdg.alpha entries must be positive");
    }
  }
}

ExperimentConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ", column " +
                                           std::to_string(column) + ": malformed JSON");
  }
  Section root(doc, "");
  if (!root.has("problem")) parse_fail("problem", "missing required key");
  if (!root.has("method")) parse_fail("method", "missing required key");
  Problem problem = Problem::RosenbrockNoisy;
  root.read_enum("problem", problem, &problem_from_string);
  ExperimentConfig cfg = default_config(problem);
  root.read_enum("method", cfg.method, &method_from_string);
  root.read("runs", cfg.runs);
  root.read("seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  root.read("budget", cfg.budget);
  if (auto s = root.child("if")) read_if(*s, cfg.if_cfg);
  if (auto s = root.child("dnnaif")) read_dnnaif(*s, cfg);
  if (auto s = root.child("network")) read_network(*s, cfg.dnnaif.arch);
  if (auto s = root.child("training")) read_training(*s, cfg.dnnaif.training);
  if (auto s = root.child("rosenbrock")) read_rosenbrock(*s, cfg.rosenbrock);
  if (auto s = root.child("cdg")) read_cdg(*s, cfg.cdg);
  root.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string config_to_string(const ExperimentConfig& cfg) {
  return config_json(cfg, true).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canonical = config_json(cfg, false).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(canonical.data(), canonical.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t run) { return cfg.seed + run; }

DNNAIFConfig effective_dnnaif_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  DNNAIFConfig d = cfg.dnnaif;
  d.if_cfg = cfg.if_cfg;
  d.if_cfg.n_s = cfg.pool_points;
  d.if_cfg.seed = seed;
  d.training.seed = seed;
  return d;
}

RunResult run_single(const ExperimentConfig& cfg, std::size_t run) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunResult out;
  out.seed = run_seed(cfg, run);
  Ledger ledger(cfg.budget.value_or(Ledger::kUnbounded));

  Objective obj;
  Vector x0;
  std::optional<cdg::CdgProblem> problem;
  if (is_rosenbrock(cfg.problem)) {
    obj = rosenbrock_objective(cfg.rosenbrock.a, cfg.rosenbrock.b);
    if (cfg.problem == Problem::RosenbrockNoisy) {
      obj = noisy_wrap(obj, {NoiseSpec::Kind::AdditiveGaussian, cfg.rosenbrock.sigma, out.seed});
    }
    x0 = Eigen::Map<const Vector>(cfg.rosenbrock.start.data(),
                                  static_cast<Eigen::Index>(cfg.rosenbrock.start.size()));
  } else {
    problem = cdg::make_cdg_problem(cdg_settings(cfg, out.seed));
    obj = problem->objective;
    x0 = cdg::default_start();
  }

  switch (cfg.method) {
    case Method::ImplicitFiltering: {
      IFConfig icfg = cfg.if_cfg;
      icfg.seed = out.seed;
      absorb(out, implicit_filtering(obj, x0, icfg, ledger));
      break;
    }
    case Method::DnnOnly: {
      const DNNAIFResult r = dnn_only(obj, x0, effective_dnnaif_config(cfg, out.seed), ledger);
      absorb(out, r);
      out.training_failures = r.training_failures;
      break;
    }
    case Method::Dnnaif: {
      DNNAIFResult r = dnnaif(obj, x0, effective_dnnaif_config(cfg, out.seed), ledger);
      absorb(out, r);
      out.training_failures = r.training_failures;
      out.filter_log = std::move(r.filter_log);
      out.try_log = std::move(r.try_log);
      break;
    }
    case Method::Dirichlet: {
      const auto budget = static_cast<int>(*cfg.budget);
      out.coverage = cdg::dirichlet_baseline(budget, cfg.cdg.alpha, problem->settings);
      out.evaluations = static_cast<std::size_t>(budget);
      break;
    }
  }
  if (cfg.method != Method::Dirichlet) {
    out.evaluations = ledger.count();
    out.history = ledger.records();
    if (problem) out.coverage = problem->coverage_trace(ledger.count());
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace detail {
std::vector<std::filesystem::path> write_run_files(const RunReport& report, std::size_t index,
                                                   const std::filesystem::path& dir);
}

RunReport run_experiment(const ExperimentConfig& cfg,
                         const std::optional<std::filesystem::path>& persist_dir) {
  cfg.validate();
  RunReport report;
  report.config = cfg;
  for (int i = 0; i < cfg.runs; ++i) {
    try {
      report.runs.push_back(run_single(cfg, static_cast<std::size_t>(i)));
    } catch (const std::exception& e) {
      if (persist_dir) {
        report.aborted = e.what();
        emit_metrics(report, *persist_dir);
      }
      throw;
    }
    if (persist_dir) detail::write_run_files(report, report.runs.size() - 1, *persist_dir);
  }
  if (persist_dir) emit_metrics(report, *persist_dir);
  return report;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError: return 2;
    case ErrorKind::ValidationError: return 3;
    case ErrorKind::BudgetExhausted: return 4;
    case ErrorKind::IoError: return 5;
    default: return 1;
  }
}

}  // namespace dnnaif
