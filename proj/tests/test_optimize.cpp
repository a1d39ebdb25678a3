#include <cmath>
#include <set>

#include <doctest.h>

#include "dnnaif/optimize.hpp"

using namespace dnnaif;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

Objective quadratic(int n, double scale = 1.0) {
  Objective o;
  o.dimension = n;
  o.descriptor = "quadratic";
  o.evaluator = [scale](const Vector& x, std::uint64_t) { return scale * x.squaredNorm(); };
  o.truth = [scale](const Vector& x) { return scale * x.squaredNorm(); };
  return o;
}

IFConfig coordinate_if(double h0, int n) {
  IFConfig c;
  c.h0 = h0;
  c.tau_tr = 0.5;
  c.n_s = 2 * n;
  c.direction_kind = DirectionKind::Coordinate;
  c.max_iterations = 200;
  return c;
}

SurrogateModel quadratic_model() {
  return {[](const Vector& x) { return 0.5 * x.squaredNorm(); }, [](const Vector& x) { return x; }};
}

// Every point charged in iteration k lies within h_{k-1} of the incumbent x_{k-1}.
void check_containment(const Ledger& ledger, const std::vector<IterationTrace>& traces) {
  for (const EvaluationRecord& r : ledger.records()) {
    if (r.iteration == 0) continue;
    REQUIRE(r.iteration < traces.size());
    const IterationTrace& prev = traces[r.iteration - 1];
    CHECK((r.x - prev.x).norm() <= prev.h * (1.0 + 1e-12) + 1e-12);
  }
}

void check_monotone(const std::vector<IterationTrace>& traces, double h0, double tau) {
  int failures = 0;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    CHECK(traces[k].iteration == k);
    if (k > 0) {
      CHECK(traces[k].best_f <= traces[k - 1].best_f);
      if (!traces[k].accepted_origin) {
        ++failures;
        CHECK(traces[k].x == traces[k - 1].x);
      }
    }
    double expect = h0;
    for (int i = 0; i < failures; ++i) expect *= tau;
    CHECK(traces[k].h == expect);
  }
}

}  // namespace

TEST_CASE("IF first step on the quadratic") {
  const Objective f = quadratic(2);
  IFConfig cfg = coordinate_if(1.0, 2);
  cfg.max_iterations = 1;
  Ledger ledger;
  const IFResult r = implicit_filtering(f, v2(1, 0), cfg, ledger);
  REQUIRE(ledger.count() == 5);
  const std::vector<Vector> want{v2(2, 0), v2(1, 1), v2(0, 0), v2(1, -1)};
  for (int i = 0; i < 4; ++i) CHECK(ledger.records()[i + 1].x == want[i]);
  CHECK(r.state.x == v2(0, 0));
  CHECK(r.state.f == 0.0);
  REQUIRE(r.traces.size() == 2);
  CHECK(r.traces[1].accepted_origin == Origin::Exploration);
}

TEST_CASE("IF at the minimum is a stencil failure") {
  IFConfig cfg = coordinate_if(0.3, 2);
  cfg.max_iterations = 1;
  Ledger ledger;
  const IFResult r = implicit_filtering(quadratic(2), v2(0, 0), cfg, ledger);
  CHECK(r.state.x == v2(0, 0));
  CHECK(r.state.h == 0.3 * 0.5);
  CHECK(r.state.stencil_failures == 1);
  CHECK_FALSE(r.traces.back().accepted_origin.has_value());
}

TEST_CASE("IF with zero iterations evaluates only the start") {
  IFConfig cfg = coordinate_if(1.0, 2);
  cfg.max_iterations = 0;
  Ledger ledger;
  const IFResult r = implicit_filtering(quadratic(2), v2(3, 4), cfg, ledger);
  CHECK(ledger.count() == 1);
  CHECK(r.state.f == 25.0);
  CHECK(r.traces.size() == 1);
}

TEST_CASE("IF errors and truncation") {
  IFConfig cfg = coordinate_if(1.0, 2);
  Ledger big;
  try {
    implicit_filtering(quadratic(2), Vector::Zero(3), cfg, big);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
  Ledger none(0);
  CHECK_THROWS_AS(implicit_filtering(quadratic(2), v2(1, 1), cfg, none), Error);

  Ledger small(7);
  const IFResult r = implicit_filtering(quadratic(2), v2(3, 4), cfg, small);
  CHECK(r.state.truncated);
  CHECK(small.count() == 7);
  CHECK(r.traces.back().evals_cumulative == 7);

  cfg.tau_tr = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("IF invariants on a noisy problem") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Objective f =
        noisy_wrap(rosenbrock_objective(), {NoiseSpec::Kind::AdditiveGaussian, 1.0, seed});
    IFConfig cfg;
    cfg.h0 = 30;
    cfg.tau_tr = 0.9;
    cfg.n_s = 11;
    cfg.max_iterations = 30;
    cfg.seed = seed;
    Ledger ledger;
    const IFResult r = implicit_filtering(f, v2(-6, 6), cfg, ledger);
    check_monotone(r.traces, cfg.h0, cfg.tau_tr);
    check_containment(ledger, r.traces);
    for (const IterationTrace& t : r.traces) {
      CHECK(t.evals_cumulative == 1 + 11 * t.iteration);
      CHECK(t.best_f_true == rosenbrock(t.x));
    }
    CHECK(r.traces.back().evals_cumulative == ledger.count());
  }
}

TEST_CASE("stencil failures respect the gradient bound") {
  for (int n : {2, 5}) {
    Objective half;
    half.dimension = n;
    half.evaluator = [](const Vector& x, std::uint64_t) { return 0.5 * x.squaredNorm(); };
    IFConfig cfg = coordinate_if(1.0, n);
    cfg.tau_tr = 0.7;
    Ledger ledger;
    const IFResult r = implicit_filtering(half, Vector::LinSpaced(n, 0.3, 2.9), cfg, ledger);
    int failures = 0;
    for (std::size_t k = 1; k < r.traces.size(); ++k) {
      if (r.traces[k].accepted_origin) continue;
      ++failures;
      const double h = r.traces[k - 1].h;
      CHECK(r.traces[k].x.norm() <= stencil_failure_bound(kappa_coordinate(n), 1.0, h, 0.0) + 1e-12);
    }
    CHECK(failures > 5);
  }
}

TEST_CASE("armijo examples") {
  ArmijoConfig cfg;
  cfg.mu0 = 1.0;
  cfg.c = 1e-4;
  cfg.backtrack = 0.5;
  const Vector one = Vector::Constant(1, 1.0);
  const auto square = [](const Vector& x) { return x.squaredNorm(); };
  const ArmijoResult r = armijo_search(square, one, Vector::Constant(1, 2.0), cfg);
  CHECK(r.accepted);
  CHECK(r.mu == 0.5);

  const auto linear = [](const Vector& x) { return x(0); };
  cfg.mu0 = 3.7;
  const ArmijoResult l = armijo_search(linear, one, one, cfg);
  CHECK(l.accepted);
  CHECK(l.mu == 3.7);

  cfg.mu0 = 1.0;
  cfg.max_backtracks = 0;
  CHECK_FALSE(armijo_search(square, one, Vector::Constant(1, 2.0), cfg).accepted);
}

TEST_CASE("surrogate descent") {
  SUBCASE("zero gradient returns x_k") {
    const SurrogateModel flat{[](const Vector&) { return 1.0; },
                              [](const Vector& x) { return Vector::Zero(x.size()).eval(); }};
    CHECK(surrogate_descent(v2(1, 2), flat, 5, 1.0) == v2(1, 2));
  }
  SUBCASE("steep linear model never leaves the ball") {
    const Vector c = v2(1e6, -3e5);
    const SurrogateModel lin{[c](const Vector& x) { return c.dot(x); },
                             [c](const Vector&) { return c; }};
    for (double h : {1e-9, 1e-3, 0.5}) {
      const Vector x = surrogate_descent(v2(0.2, 0.2), lin, 10, h);
      CHECK((x - v2(0.2, 0.2)).norm() <= h + 1e-12);
      if (x != v2(0.2, 0.2)) CHECK(lin.value(x) < lin.value(v2(0.2, 0.2)));
    }
  }
  SUBCASE("one exact step on the half-squared norm") {
    ArmijoConfig a;
    a.mu0 = 1.0;
    CHECK(surrogate_descent(v2(1, 0), quadratic_model(), 1, 10.0, a) == v2(0, 0));
  }
  SUBCASE("network surrogate stays in the ball") {
    Architecture arch;
    arch.input_dim = 2;
    arch.hidden_dim = 8;
    arch.depth = 4;
    const NetworkParams t = init_network(arch, 3);
    for (int i = 0; i < 20; ++i) {
      const Vector xk = v2(0.1 * i, -0.2 * i);
      const double h = 0.05 * (i + 1);
      const Vector x = surrogate_descent(xk, t, 5, h);
      CHECK((x - xk).norm() <= h + 1e-12);
      if (x != xk) CHECK(surrogate_value(t, x) < surrogate_value(t, xk));
    }
  }
}

TEST_CASE("filtered sampling") {
  Rng rng(1);
  SUBCASE("equality passes") {
    const auto r = filtered_sampling(v2(0, 0), 2.0, 1.0, [](const Vector&) { return 2.0; }, 3, 10,
                                     DirectionKind::SphereUniform, rng);
    CHECK(r.points.size() == 3);
    CHECK(r.draws == 3);
  }
  SUBCASE("always rejected") {
    const auto r = filtered_sampling(v2(0, 0), 2.0, 1.0, [](const Vector&) { return 3.0; }, 3, 10,
                                     DirectionKind::SphereUniform, rng);
    CHECK(r.points.empty());
    CHECK(r.draws == 10);
  }
  SUBCASE("n_f zero needs no model calls") {
    int calls = 0;
    const auto r = filtered_sampling(
        v2(0, 0), 2.0, 1.0, [&](const Vector&) { return ++calls, 0.0; }, 0, 10,
        DirectionKind::SphereUniform, rng);
    CHECK(r.points.empty());
    CHECK(calls == 0);
  }
  SUBCASE("accepted points satisfy the filter") {
    const auto model = [](const Vector& x) { return x(0) + x(1); };
    const auto r = filtered_sampling(v2(1, 1), 2.0, 0.5, model, 5, 50,
                                     DirectionKind::SphereUniform, rng);
    CHECK(r.points.size() == 5);
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      CHECK(model(r.points[i]) <= 2.0);
      CHECK(r.surrogate_values[i] == model(r.points[i]));
      CHECK((r.points[i] - v2(1, 1)).norm() == doctest::Approx(0.5));
    }
  }
}

TEST_CASE("exploration schedule") {
  ExplorationSchedule s{1.0, 0.2, 10};
  CHECK(exploration_schedule(0, 10, s) == std::pair{10, 0});
  CHECK(exploration_schedule(10, 10, s) == std::pair{2, 8});
  CHECK(exploration_schedule(50, 10, s) == std::pair{2, 8});
  CHECK(exploration_schedule(5, 10, s) == std::pair{6, 4});
  // a tiny positive fraction still keeps one exploration point
  ExplorationSchedule tiny{0.01, 0.01, 0};
  CHECK(exploration_schedule(3, 10, tiny) == std::pair{1, 9});
  for (std::size_t k = 0; k < 20; ++k) {
    const auto [e, f] = exploration_schedule(k, 7, s);
    CHECK(e + f == 7);
  }
}

namespace {

DNNAIFConfig small_dnnaif(std::uint64_t seed) {
  DNNAIFConfig c;
  c.if_cfg.h0 = 1.0;
  c.if_cfg.tau_tr = 0.7;
  c.if_cfg.n_s = 4;
  c.if_cfg.max_iterations = 40;
  c.if_cfg.seed = seed;
  c.if_cfg.direction_kind = DirectionKind::Coordinate;
  c.arch.hidden_dim = 8;
  c.arch.depth = 3;
  c.training.iterations = 100;
  c.training.learning_rate = 1e-2;
  c.training.seed = seed;
  c.schedule = {1.0, 0.5, 4};
  c.n_s_filter = 30;
  return c;
}

}  // namespace

TEST_CASE("DNNAIF collapses to IF without exploitation") {
  DNNAIFConfig c = small_dnnaif(3);
  c.if_cfg.direction_kind = DirectionKind::SphereUniform;
  c.if_cfg.n_s = 6;
  c.schedule = {1.0, 1.0, 0};
  // a step too small to move any coordinate: the try point is x_k itself
  c.armijo.mu0 = 1e-300;
  c.armijo.max_backtracks = 0;
  const Objective f = quadratic(2);
  Ledger a;
  Ledger b;
  const DNNAIFResult d = dnnaif::dnnaif(f, v2(3, -2), c, a);
  const IFResult i = implicit_filtering(f, v2(3, -2), c.if_cfg, b);
  REQUIRE(d.traces.size() == i.traces.size());
  for (std::size_t k = 0; k < d.traces.size(); ++k) {
    CHECK(d.traces[k].x == i.traces[k].x);
    CHECK(d.traces[k].h == i.traces[k].h);
  }
  for (const TryPointRecord& t : d.try_log) CHECK(t.x_try == t.x_incumbent);
}

TEST_CASE("DNNAIF invariants") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Objective f =
        noisy_wrap(rosenbrock_objective(), {NoiseSpec::Kind::AdditiveGaussian, 1.0, seed});
    DNNAIFConfig c = small_dnnaif(seed);
    c.if_cfg.h0 = 5.0;
    c.if_cfg.n_s = 6;
    c.if_cfg.max_iterations = 15;
    c.if_cfg.direction_kind = DirectionKind::SphereUniform;
    Ledger ledger;
    const DNNAIFResult r = dnnaif::dnnaif(f, v2(-2, 2), c, ledger);
    check_monotone(r.traces, c.if_cfg.h0, c.if_cfg.tau_tr);
    check_containment(ledger, r.traces);
    CHECK(r.traces.back().evals_cumulative == ledger.count());

    for (const FilterRecord& fr : r.filter_log) {
      CHECK(fr.surrogate <= fr.f_incumbent);
      CHECK(ledger.records()[fr.eval_index].origin == Origin::Exploitation);
      CHECK(ledger.records()[fr.eval_index].x == fr.x);
    }
    for (const TryPointRecord& t : r.try_log) CHECK((t.x_try - t.x_incumbent).norm() <= t.h + 1e-12);

    // per-iteration charges: 1 when the try point wins, else 1 + n_e + n_f
    std::vector<std::size_t> per_iter(r.traces.size(), 0);
    std::vector<std::size_t> exploit(r.traces.size(), 0);
    for (const EvaluationRecord& rec : ledger.records()) {
      ++per_iter[rec.iteration];
      if (rec.origin == Origin::Exploitation) ++exploit[rec.iteration];
    }
    for (std::size_t k = 1; k < r.traces.size(); ++k) {
      if (r.traces[k].try_point_accepted) {
        CHECK(per_iter[k] == 1);
      } else {
        const auto [n_e, n_f] = exploration_schedule(k - 1, c.if_cfg.n_s, c.schedule);
        CHECK(exploit[k] <= static_cast<std::size_t>(n_f));
        CHECK(per_iter[k] == 1 + static_cast<std::size_t>(n_e) + exploit[k]);
      }
      CHECK(r.traces[k].evals_cumulative - r.traces[k - 1].evals_cumulative == per_iter[k]);
    }
  }
}

TEST_CASE("DNNAIF reaches the stencil failure bound on the quadratic") {
  DNNAIFConfig c = small_dnnaif(1);
  c.schedule = {1.0, 1.0, 0};
  c.if_cfg.max_iterations = 500;
  c.if_cfg.h_min = 1e-4;
  Ledger ledger;
  const DNNAIFResult r = dnnaif::dnnaif(quadratic(2), v2(3, 4), c, ledger);
  CHECK(r.state.h <= 1e-4);
  CHECK_FALSE(r.state.truncated);
  // the last iteration was a failure with the radius before the shrink
  REQUIRE(r.traces.size() >= 2);
  CHECK_FALSE(r.traces.back().accepted_origin.has_value());
  const double h_used = r.traces[r.traces.size() - 2].h;
  CHECK(r.state.x.norm() <= kappa_coordinate(2) * h_used / 2.0 + 1e-9);
}

TEST_CASE("DNNAIF is deterministic and truncates on budget") {
  const Objective f =
      noisy_wrap(rosenbrock_objective(), {NoiseSpec::Kind::AdditiveGaussian, 1.0, 9});
  DNNAIFConfig c = small_dnnaif(9);
  c.if_cfg.max_iterations = 8;
  Ledger a;
  Ledger b;
  const DNNAIFResult ra = dnnaif::dnnaif(f, v2(-2, 2), c, a);
  const DNNAIFResult rb = dnnaif::dnnaif(f, v2(-2, 2), c, b);
  REQUIRE(ra.traces.size() == rb.traces.size());
  for (std::size_t k = 0; k < ra.traces.size(); ++k) {
    CHECK(ra.traces[k].x == rb.traces[k].x);
    CHECK(ra.traces[k].best_f == rb.traces[k].best_f);
  }
  CHECK(ra.theta == rb.theta);

  Ledger tight(12);
  const DNNAIFResult t = dnnaif::dnnaif(f, v2(-2, 2), c, tight);
  CHECK(t.state.truncated);
  CHECK(tight.count() <= 12);
}

TEST_CASE("dnn-only charges n_s + 1 points per iteration") {
  DNNAIFConfig c = small_dnnaif(2);
  c.if_cfg.n_s = 4;
  c.if_cfg.max_iterations = 5;
  Ledger ledger;
  const DNNAIFResult r = dnn_only(quadratic(2), v2(3, 4), c, ledger);
  REQUIRE(r.traces.size() == 6);
  for (std::size_t k = 1; k < r.traces.size(); ++k) {
    CHECK(r.traces[k].evals_cumulative - r.traces[k - 1].evals_cumulative == 5);
    CHECK(r.traces[k].best_f <= r.traces[k - 1].best_f);
  }
}

TEST_CASE("DNNAIF falls back to plain exploration when training blows up") {
  DNNAIFConfig c = small_dnnaif(4);
  c.training.learning_rate = 1e6;
  c.training.iterations = 300;
  c.if_cfg.max_iterations = 10;
  Ledger ledger;
  const DNNAIFResult r = dnnaif::dnnaif(quadratic(2, 1e3), v2(3, 4), c, ledger);
  REQUIRE(r.training_failures > 0);
  for (const Matrix& k : r.theta.K) CHECK(k.allFinite());
  for (const Vector& b : r.theta.b) CHECK(b.allFinite());
  CHECK(r.traces.size() == 11);
  check_monotone(r.traces, c.if_cfg.h0, c.if_cfg.tau_tr);
}
