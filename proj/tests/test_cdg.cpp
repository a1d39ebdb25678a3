#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <doctest.h>

#include "dnnaif/cdg.hpp"

using namespace dnnaif;
using namespace dnnaif::cdg;

namespace {

// mix then every other knob at `rest`
Vector input(std::array<double, 5> mix, double rest) {
  Vector x = Vector::Constant(kInputDim, rest);
  for (int i = 0; i < 5; ++i) x(i) = mix[static_cast<std::size_t>(i)];
  return x;
}

Vector complex_only() {
  Vector x = input({0, 1, 0, 0, 0}, 0.0);
  return x;
}

// Predicate evaluation written against the raw state fields.
bool brute_hit(const EventDef& e, const PipelineState& s) {
  const std::array<bool, 6> occ{s.s[0].has_value(), s.s[1].has_value(), s.s[2].has_value(),
                                s.c[0].has_value(), s.c[1].has_value(), s.c[2].has_value()};
  for (std::size_t i = 0; i < 6; ++i) {
    if (e.stages[i] == '1' && !occ[i]) return false;
    if (e.stages[i] == '0' && occ[i]) return false;
  }
  if (s.buffer < e.min_buffer || s.buffer > e.max_buffer) return false;
  for (const auto& [flag, want] : e.flags) {
    bool v = false;
    switch (flag) {
      case Flag::LsBusy: v = s.ls_busy; break;
      case Flag::BranchActive: v = s.branch_active; break;
      case Flag::Flush: v = s.flush; break;
      case Flag::StallS: v = s.stall_s; break;
      case Flag::StallC: v = s.stall_c; break;
      case Flag::DepStall: v = s.dep_stall; break;
      case Flag::SerializeWait: v = s.serialize_wait; break;
      case Flag::DualDispatch: v = s.dispatched == 2; break;
      case Flag::ComplexChain:
        v = s.c[0] && s.c[1] && s.c[0]->type == InstrType::Complex &&
            s.c[1]->type == InstrType::Complex;
        break;
    }
    if (v != want) return false;
  }
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("manifest") {
  const EventManifest& ev = default_events();
  CHECK(ev.size() == 35);
  std::set<std::string> names;
  for (const EventDef& e : ev) names.insert(e.name);
  CHECK(names.size() == 35);
  CHECK(parse_event_manifest(event_manifest_to_string(ev)) == ev);
  const std::string path = std::string(DNNAIF_SOURCE_DIR) + "/data/events.json";
  CHECK(load_event_manifest(path) == ev);
  CHECK(slurp(path) == event_manifest_to_string(ev));
}

TEST_CASE("manifest errors") {
  CHECK_THROWS_AS(parse_event_manifest("{\"events\": []}"), Error);
  CHECK_THROWS_AS(parse_event_manifest("{\"events\": [{\"name\": \"a\", \"stages\": \"10\"}]}"), Error);
  CHECK_THROWS_AS(parse_event_manifest("{\"events\": [{\"name\": \"a\", \"colour\": 1}]}"), Error);
  CHECK_THROWS_AS(parse_event_manifest("{\"events\": [{\"name\": \"a\", \"min_buffer\": 5}]}"), Error);
  CHECK_THROWS_AS(
      parse_event_manifest("{\"events\": [{\"name\": \"a\", \"flags\": {\"warp\": true}}]}"), Error);
  CHECK_THROWS_AS(load_event_manifest("/nonexistent/events.json"), Error);
  const auto one = parse_event_manifest(
      "{\"events\": [{\"name\": \"a\", \"stages\": \"1xxxx0\", \"flags\": {\"flush\": false}}]}");
  REQUIRE(one.size() == 1);
  CHECK(one[0].flags.size() == 1);
}

TEST_CASE("nop-only input hits only the all-empty predicates") {
  const Vector x = input({0, 0, 0, 0, 1}, 0.5);
  const int n = 500;
  const auto counts = simulate(x, n, 3);
  const PipelineState empty{};
  const EventManifest& ev = default_events();
  int hit_events = 0;
  for (std::size_t j = 0; j < ev.size(); ++j) {
    const bool expect = brute_hit(ev[j], empty);
    CHECK(counts[j] == (expect ? n : 0u));
    hit_events += expect;
  }
  CHECK(hit_events == 1);
  CHECK(counts[0] == static_cast<std::uint32_t>(n));
  const Vector p = estimate_probabilities(x, n, 3);
  for (Eigen::Index j = 1; j < p.size(); ++j) CHECK(p(j) == 0.0);
}

TEST_CASE("complex-only input keeps the complex pipe full") {
  for (int n : {100, 1000}) {
    std::vector<PipelineState> trace;
    const auto counts = simulate(complex_only(), n, 11, default_events(), {.trace = &trace});
    REQUIRE(trace.size() == static_cast<std::size_t>(n));
    int full = 0;
    for (const PipelineState& s : trace) full += s.c[0] && s.c[1] && s.c[2];
    std::size_t c_full = 0;
    while (default_events()[c_full].name != "c_full") ++c_full;
    CHECK(counts[c_full] == static_cast<std::uint32_t>(full));
    CHECK(static_cast<double>(full) / n >= 0.9);
  }
}

TEST_CASE("every predicate agrees with the brute-force evaluation") {
  Rng rng(5);
  const std::array<double, 5> alpha{1, 1, 1, 1, 1};
  const EventManifest& ev = default_events();
  for (int trial = 0; trial < 40; ++trial) {
    const Vector x = dirichlet_sample(alpha, rng);
    std::vector<PipelineState> trace;
    const auto counts = simulate(x, 300, static_cast<std::uint64_t>(trial), ev, {.trace = &trace});
    std::vector<std::uint32_t> brute(ev.size(), 0);
    for (const PipelineState& s : trace) {
      CHECK(s.buffer >= 0);
      CHECK(s.buffer <= kBufferCapacity);
      for (std::size_t j = 0; j < ev.size(); ++j) brute[j] += brute_hit(ev[j], s);
    }
    CHECK(counts == brute);
  }
}

TEST_CASE("simulate determinism and bounds") {
  Rng rng(8);
  const Vector x = dirichlet_sample(std::array<double, 5>{1, 1, 1, 1, 1}, rng);
  const auto a = simulate(x, 400, 77);
  CHECK(a == simulate(x, 400, 77));
  for (auto c : a) CHECK(c <= 400u);
  const Vector p = estimate_probabilities(x, 400, 77);
  CHECK(p.minCoeff() >= 0.0);
  CHECK(p.maxCoeff() <= 1.0);
  // an event that holds every cycle has p = 1
  EventManifest always{EventDef{"anything", "xxxxxx", 0, kBufferCapacity, {}}};
  CHECK(estimate_probabilities(x, 50, 1, always)(0) == 1.0);
}

TEST_CASE("input projection") {
  Vector x = input({2, -1, 0, 0, 2}, 1.7);
  x(9) = -0.3;
  CHECK_FALSE(is_valid_input(x));
  const Vector p = project_input(x);
  CHECK(is_valid_input(p));
  CHECK(p(0) == 0.5);
  CHECK(p(1) == 0.0);
  CHECK(p(9) == 0.0);
  CHECK(p(10) == 1.0);
  const Vector z = project_input(input({-1, -1, -1, -1, -1}, 0.5));
  for (int i = 0; i < 5; ++i) CHECK(z(i) == 0.2);

  try {
    simulate(x, 10, 0, default_events(), {.project = false});
    FAIL("expected InvalidInput");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
  }
  CHECK_NOTHROW(simulate(x, 10, 0));
  CHECK_THROWS_AS(simulate(p, 0, 0), Error);
}

TEST_CASE("weights, objective and unhit count") {
  CHECK(weight(0.0, 0.01) == doctest::Approx(100.0));
  CHECK(weight(1.0, 0.01) == doctest::Approx(0.990099).epsilon(1e-6));
  for (double eps : {1e-3, 0.01, 1.0}) CHECK(weight(0.2, eps) > weight(0.8, eps));

  CHECK(coverage_objective_value(Vector::Zero(35)) == 0.0);
  CHECK(coverage_objective_value(Vector::Ones(35)) == doctest::Approx(-34.653).epsilon(1e-4));
  Vector one = Vector::Zero(35);
  one(4) = 0.5;
  CHECK(coverage_objective_value(one) == doctest::Approx(-0.98039).epsilon(1e-5));

  CHECK(unhit_count(Vector::Zero(35), 0.1) == 35);
  Vector half = Vector::Constant(35, 0.5);
  half(0) = 0.0;
  CHECK(unhit_count(half, 0.1) == 1);
  CHECK(unhit_count(Vector::Zero(35), 0.0) == 0);
}

TEST_CASE("raising an unhit probability improves the objective") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector p(35);
    for (int j = 0; j < 35; ++j) p(j) = u(rng) < 0.3 ? 0.0 : u(rng);
    for (int j = 0; j < 35; ++j) {
      if (p(j) != 0.0) continue;
      for (double delta : {1e-6, 0.01, 0.5, 1.0}) {
        Vector q = p;
        q(j) = delta;
        CHECK(coverage_objective_value(q) < coverage_objective_value(p));
      }
    }
  }
}

TEST_CASE("dirichlet sampling") {
  const std::array<double, 5> alpha{1, 1, 1, 1, 1};
  Rng rng(21);
  Vector mean = Vector::Zero(5);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Vector x = dirichlet_sample(alpha, rng);
    CHECK(std::abs(x.head(5).sum() - 1.0) < 1e-12);
    CHECK(x.head(5).minCoeff() >= 0.0);
    CHECK(is_valid_input(x));
    mean += x.head(5);
  }
  mean /= n;
  for (int i = 0; i < 5; ++i) CHECK(std::abs(mean(i) - 0.2) < 0.02);

  Rng a(4);
  Rng b(4);
  CHECK(dirichlet_sample(alpha, a) == dirichlet_sample(alpha, b));

  Rng c(1);
  const std::array<double, 5> bad{1, 1, 0, 1, 1};
  CHECK_THROWS_AS(dirichlet_sample(bad, c), Error);
  CHECK_THROWS_AS(dirichlet_sample(std::array<double, 3>{1, 1, 1}, c), Error);
}

TEST_CASE("dirichlet baseline") {
  CdgSettings s;
  s.n_cycles = 200;
  s.seed = 2;
  const std::array<double, 5> alpha{1, 1, 1, 1, 1};
  const auto trace = dirichlet_baseline(30, alpha, s);
  REQUIRE(trace.size() == 30);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
  CHECK(trace == dirichlet_baseline(30, alpha, s));
  CHECK(dirichlet_baseline(1, alpha, s).size() == 1);
}

TEST_CASE("coverage trace matches a recount from the logs") {
  CdgSettings s;
  s.n_cycles = 300;
  s.seed = 6;
  const CdgProblem problem = make_cdg_problem(s);
  Ledger ledger;
  Rng rng(9);
  for (int i = 0; i < 25; ++i) {
    const Vector x = dirichlet_sample(std::array<double, 5>{1, 1, 1, 1, 1}, rng);
    evaluate(problem.objective, x, ledger, 0, Origin::Exploration);
  }
  CHECK(problem.coverage_trace(0).empty());
  CHECK(problem.coverage_trace(1).size() == 1);
  const auto trace = problem.coverage_trace(25);
  REQUIRE(problem.log->size() == 25);

  std::vector<double> best(35, 0.0);
  for (std::size_t i = 0; i < 25; ++i) {
    const auto counts = problem.log->counts(i);
    REQUIRE(counts.size() == 35);
    int unhit = 0;
    for (std::size_t j = 0; j < 35; ++j) {
      best[j] = std::max(best[j], counts[j] / 300.0);
      unhit += best[j] < s.threshold;
    }
    CHECK(trace[i] == unhit);
    if (i > 0) CHECK(trace[i] <= trace[i - 1]);
  }

  // the objective value is the weighted sum over that evaluation's counts
  const auto c0 = problem.log->counts(0);
  Vector p(35);
  for (int j = 0; j < 35; ++j) p(j) = c0[static_cast<std::size_t>(j)] / 300.0;
  CHECK(ledger.records()[0].f == doctest::Approx(coverage_objective_value(p)).epsilon(1e-12));
  // and the simulator seed is the per-evaluation substream
  CHECK(c0 == simulate(ledger.records()[0].x, 300, derive_seed(6, streams::kSimulator, 0)));
}

TEST_CASE("flag names") {
  for (Flag f : kAllFlags) CHECK(flag_from_string(to_string(f)) == f);
  CHECK_THROWS_AS(flag_from_string("nope"), Error);
}
