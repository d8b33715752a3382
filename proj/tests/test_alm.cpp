#include <cmath>
#include <random>

#include "doctest.h"
#include "stellbench/alm.hpp"
#include "stellbench/errors.hpp"
#include "stellbench/geometry.hpp"
#include "stellbench/stellarator_alm.hpp"

using namespace stellbench;

namespace {

AlmConfig small_config(int outer, int budget) {
  AlmConfig c;
  c.outer_iterations = outer;
  c.budget_base = budget;
  c.budget_slope = 0;
  return c;
}

// min x1^2 + x2^2 s.t. x1 >= 1.
AlmEvaluation toy(const Eigen::VectorXd& x) {
  AlmEvaluation e;
  e.objective = x.squaredNorm();
  e.constraints = Eigen::VectorXd::Constant(1, 1.0 - x(0));
  e.ok = true;
  return e;
}

}  // namespace

TEST_CASE("augmented Lagrangian arithmetic") {
  const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 1.0);
  CHECK(augmented_lagrangian(3.0, one, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.0)) == 4.0);
  CHECK(augmented_lagrangian(3.0, -one, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.0)) == 3.0);
  // Inactive with a multiplier: max(0, 1 - 10) = 0, so the term is -y^2 / (2 rho).
  CHECK(augmented_lagrangian(0.0, -one, one, Eigen::VectorXd::Constant(1, 10.0)) == doctest::Approx(-0.05));
  CHECK(augmented_lagrangian(1.5, Eigen::VectorXd(), Eigen::VectorXd(), Eigen::VectorXd()) == 1.5);
}

TEST_CASE("penalty gradient matches central differences") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1), pos(0.1, 20);
  for (int trial = 0; trial < 200; ++trial) {
    const double y = std::abs(u(rng)), rho = pos(rng), c = u(rng);
    const Eigen::VectorXd yy = Eigen::VectorXd::Constant(1, y), rr = Eigen::VectorXd::Constant(1, rho);
    auto L = [&](double cc) { return augmented_lagrangian(0.0, Eigen::VectorXd::Constant(1, cc), yy, rr); };
    const double h = 1e-6;
    const double fd = (L(c + h) - L(c - h)) / (2 * h);
    const double analytic = std::max(0.0, y + rho * c);
    if (std::abs(y + rho * c) < 10 * h * rho) continue;
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("dual and penalty updates") {
  AlmConfig cfg;
  AlmState s = initial_state(Eigen::VectorXd::Zero(2), 2, cfg);
  CHECK(s.rho(0) == 10.0);
  CHECK(s.y(0) == 0.0);
  CHECK(s.delta == 0.5);

  const Eigen::Vector2d prev(0.2, 0.2);
  dual_and_penalty_update(s, Eigen::Vector2d(0.1, 0.2), prev, cfg);
  CHECK(s.rho(0) == 10.0);
  CHECK(s.rho(1) == 50.0);
  CHECK(s.y(0) == doctest::Approx(1.0));
  CHECK(s.y(1) == doctest::Approx(2.0));
  CHECK(s.delta == doctest::Approx(0.45));

  dual_and_penalty_update(s, Eigen::Vector2d(-1.0, -1.0), Eigen::Vector2d(0.1, 0.2), cfg);
  CHECK(s.y(0) == 0.0);
  CHECK(s.y(1) == 0.0);
  CHECK(s.rho(1) == 50.0);

  s.delta = 0.06;
  dual_and_penalty_update(s, Eigen::Vector2d(-1.0, -1.0), Eigen::Vector2d(-1.0, -1.0), cfg);
  CHECK(s.delta == doctest::Approx(0.054));
  dual_and_penalty_update(s, Eigen::Vector2d(-1.0, -1.0), Eigen::Vector2d(-1.0, -1.0), cfg);
  CHECK(s.delta == 0.05);

  s.rho(0) = 5e8;
  dual_and_penalty_update(s, Eigen::Vector2d(1.0, -1.0), Eigen::Vector2d(1.0, -1.0), cfg);
  CHECK(s.rho(0) == 1e9);
}

TEST_CASE("inner budget schedule and defaults") {
  const AlmConfig geo = AlmConfig::for_problem("geometric");
  CHECK(inner_budget_schedule(0, geo) == 1500);
  CHECK(inner_budget_schedule(10, geo) == 4100);
  CHECK(inner_budget_schedule(100, geo) == 20000);
  CHECK_THROWS_AS(inner_budget_schedule(-1, geo), DomainError);
  CHECK(geo.rho0 == 10.0);
  CHECK(geo.rho_max == 1e9);
  CHECK(geo.delta0 == 0.5);
  CHECK(geo.gamma == 0.9);
  CHECK(geo.delta_min == 0.05);
  CHECK(geo.tau == 0.8);
  CHECK(geo.sigma == 5.0);
  CHECK(geo.y0 == 0.0);
  const AlmConfig mhd = AlmConfig::for_problem("mhd");
  CHECK(mhd.budget_slope == 300);
  CHECK(inner_budget_schedule(1, mhd) == 1800);
}

TEST_CASE("ALM config validation and JSON") {
  AlmConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
  bad = c;
  bad.sigma = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
  bad = c;
  bad.tau = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
  bad = c;
  bad.delta_min = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigurationError);
  const auto j = alm_config_to_json(c);
  CHECK(alm_config_to_json(alm_config_from_json(j)) == j);
  CHECK(alm_config_from_json({{"outer_iterations", 3}}).outer_iterations == 3);
  CHECK_THROWS_AS(alm_config_from_json({{"learning_rate", 3}}), ConfigurationError);
  CHECK_THROWS_AS(alm_config_from_json({{"gamma", "x"}}), ConfigurationError);
}

TEST_CASE("preconditioner") {
  const BoundaryLayout layout{3, 4, 4, true};
  const auto p = Preconditioner::exponential(layout);
  const auto modes = free_modes(layout);
  REQUIRE(p.lambda.size() == Eigen::Index(modes.size()));
  for (std::size_t i = 0; i < modes.size(); ++i) {
    CHECK(p.lambda(Eigen::Index(i)) > 0.0);
    CHECK(p.lambda(Eigen::Index(i)) == std::pow(0.5, modes[i].m + std::abs(modes[i].n)));
    for (std::size_t j = 0; j < modes.size(); ++j) {
      if (modes[j].m + std::abs(modes[j].n) > modes[i].m + std::abs(modes[i].n))
        CHECK(p.lambda(Eigen::Index(j)) <= p.lambda(Eigen::Index(i)));
    }
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(p.lambda.size());
    for (auto& v : x) v = g(rng);
    CHECK((p.unprecondition(p.precondition(x)) - x).lpNorm<Eigen::Infinity>() < 1e-14);
    const auto id = Preconditioner::identity(x.size());
    CHECK(id.precondition(x) == x);
  }
  CHECK_THROWS_AS(p.precondition(Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("log-transformed QI constraint is measured in log space") {
  const ConstraintSpec qi{"qi", Direction::less_equal, 1e-3, Transform::log10};
  CHECK(normalized_violation(1e-4, qi) == doctest::Approx((-4.0 - -3.0) / 3.0));
}

TEST_CASE("primal update on an unconstrained quadratic") {
  const Eigen::Vector3d target(0.3, -0.2, 0.1);
  AlmProblem quad = [&](const Eigen::VectorXd& x) {
    return AlmEvaluation{(x - target).squaredNorm(), Eigen::VectorXd(), true};
  };
  AlmConfig cfg;
  cfg.delta0 = 2.0;
  AlmState s = initial_state(Eigen::VectorXd::Zero(3), 0, cfg);
  DiagonalEvolutionStrategy es;
  const auto r = primal_update(s, quad(s.theta_tilde), quad, es, 2000, 1);
  CHECK((r.theta_tilde - target).lpNorm<Eigen::Infinity>() < 1e-3);
  CHECK(r.evaluations == 2000);
  CHECK_FALSE(r.stalled);
}

TEST_CASE("primal update lands on the trust-region face") {
  AlmProblem far = [](const Eigen::VectorXd& x) {
    return AlmEvaluation{(x(0) - 3.0) * (x(0) - 3.0), Eigen::VectorXd(), true};
  };
  AlmConfig cfg;
  AlmState s = initial_state(Eigen::VectorXd::Zero(1), 0, cfg);
  DiagonalEvolutionStrategy es;
  const auto r = primal_update(s, far(s.theta_tilde), far, es, 500, 2);
  CHECK(r.theta_tilde(0) == doctest::Approx(0.5).epsilon(1e-6).scale(1.0));
  CHECK(std::abs(r.theta_tilde(0) - 0.5) < 1e-6);
}

TEST_CASE("primal update with zero budget or all failures keeps the incumbent") {
  AlmConfig cfg;
  AlmState s = initial_state(Eigen::Vector2d(0.1, 0.2), 1, cfg);
  DiagonalEvolutionStrategy es;
  const auto inc = toy(s.theta_tilde);
  auto r = primal_update(s, inc, toy, es, 0, 3);
  CHECK(r.theta_tilde == s.theta_tilde);
  CHECK(r.evaluations == 0);
  CHECK(r.stalled);
  AlmProblem fail = [](const Eigen::VectorXd&) { return AlmEvaluation{}; };
  r = primal_update(s, inc, fail, es, 100, 3);
  CHECK(r.theta_tilde == s.theta_tilde);
  CHECK(r.evaluations == 100);
  CHECK(r.stalled);
}

TEST_CASE("inner solver stays inside the box") {
  DiagonalEvolutionStrategy es;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd center(6), target(6);
    for (auto& v : center) v = g(rng);
    for (auto& v : target) v = 5 * g(rng);
    const double radius = 0.05 + 0.1 * trial;
    int outside = 0, calls = 0;
    auto f = [&](const Eigen::VectorXd& x) {
      ++calls;
      if ((x - center).lpNorm<Eigen::Infinity>() > radius + 1e-12) ++outside;
      return (x - target).squaredNorm();
    };
    const auto r = es.minimize(f, center, f(center), radius, 300, trial);
    CHECK(outside == 0);
    CHECK(calls == 301);
    CHECK((r.x - center).lpNorm<Eigen::Infinity>() <= radius + 1e-12);
  }
}

TEST_CASE("ALM solves the two-variable toy problem") {
  DiagonalEvolutionStrategy es;
  const auto cfg = small_config(30, 300);
  AlmRunOptions opts;
  opts.feasibility_tolerance = 1e-4;
  opts.seed = 5;
  const auto r = minimize_alm(toy, Eigen::Vector2d(3.0, 2.0), 1, cfg, es, opts);
  CHECK(r.feasible);
  CHECK(r.theta_tilde(0) == doctest::Approx(1.0).epsilon(1e-3).scale(1.0));
  CHECK(std::abs(r.theta_tilde(0) - 1.0) < 1e-3);
  CHECK(std::abs(r.theta_tilde(1)) < 1e-3);
  CHECK(std::abs(r.final_state.y(0) - 2.0) < 0.1);
}

TEST_CASE("ALM invariants hold every iteration") {
  DiagonalEvolutionStrategy es;
  AlmConfig cfg = small_config(25, 200);
  cfg.rho_max = 1e4;
  AlmProblem two = [](const Eigen::VectorXd& x) {
    AlmEvaluation e;
    e.objective = -x(0) - x(1);
    e.constraints = Eigen::Vector2d(x.squaredNorm() - 1.0, x(0) - 0.5);
    e.ok = x.allFinite();
    return e;
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AlmRunOptions opts;
    opts.seed = seed;
    opts.feasibility_tolerance = 1e-3;
    double best_feasible = std::numeric_limits<double>::infinity();
    std::vector<double> best_trace;
    opts.on_iteration = [&](const AlmIterationRecord& rec) {
      CHECK(rec.y.minCoeff() >= 0.0);
      CHECK(rec.rho.maxCoeff() <= cfg.rho_max);
      CHECK(rec.delta >= cfg.delta_min);
      CHECK(rec.step_inf_norm <= rec.delta + 1e-12);
      if (rec.feasible) best_feasible = std::min(best_feasible, rec.objective);
      best_trace.push_back(best_feasible);
    };
    const auto r = minimize_alm(two, Eigen::Vector2d(2.0, 2.0), 2, cfg, es, opts);
    for (std::size_t i = 1; i < best_trace.size(); ++i) CHECK(best_trace[i] <= best_trace[i - 1]);
    CHECK(r.history.size() == 25);
    if (r.feasible) CHECK(r.evaluation.objective == best_feasible);
  }
}

TEST_CASE("without constraints ALM reduces to the inner solver") {
  const Eigen::Vector3d target(0.7, -0.4, 1.1);
  auto f = [&](const Eigen::VectorXd& x) { return (x - target).squaredNorm(); };
  AlmProblem p = [&](const Eigen::VectorXd& x) { return AlmEvaluation{f(x), Eigen::VectorXd(), true}; };
  const Eigen::Vector3d x0 = Eigen::Vector3d::Zero();
  const auto cfg = small_config(1, 400);
  DiagonalEvolutionStrategy es1, es2;
  AlmRunOptions opts;
  opts.seed = 17;
  const auto r = minimize_alm(p, x0, 0, cfg, es1, opts);
  const auto bare = es2.minimize(f, x0, f(x0), cfg.delta0, 400, inner_seed(17, 0));
  CHECK(r.evaluation.objective == bare.value);
  CHECK(r.theta_tilde == bare.x);
  CHECK(r.total_evaluations == 401);
}

TEST_CASE("oracle budget accounting is exact") {
  SyntheticOracle synth;
  CountingOracle counter(synth);
  const auto spec = builtin_problem("geometric");
  AlmConfig cfg = AlmConfig::for_problem("geometric");
  cfg.outer_iterations = 3;
  cfg.budget_base = 40;
  cfg.budget_slope = 7;
  const auto init = make_rotating_ellipse(3, 6.0, 1.5, 0.0);
  std::vector<int> budgets;
  StellaratorAlmOptions opts;
  opts.on_iteration = [&](const AlmIterationRecord& rec) { budgets.push_back(rec.budget); };
  const auto r = run_alm(spec, counter, cfg, init, opts);
  CHECK(budgets == std::vector<int>{40, 47, 54});
  CHECK(counter.calls() == 1 + 40 + 47 + 54 + 1);
  CHECK(r.oracle_calls == counter.calls());
  CHECK(r.alm.total_evaluations == 1 + 40 + 47 + 54);
}

TEST_CASE("run_alm rejects multi-objective problems") {
  SyntheticOracle synth;
  const auto mhd = builtin_problem("mhd");
  CHECK_THROWS_AS(run_alm(mhd, synth, small_config(1, 10), default_initial_boundary(mhd)), ConfigurationError);
  const auto single = with_aspect_constraint(mhd, 8.0);
  CHECK(single.objectives.size() == 1);
  CHECK(single.constraints.size() == mhd.constraints.size() + 1);
  CHECK(single.constraints.back().metric == "aspect_ratio");
  CHECK(single.constraints.back().target == 8.0);
  CHECK(aspect_ratio(default_initial_boundary(builtin_problem("geometric"))) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("trace records carry the convergence fields") {
  AlmIterationRecord rec;
  rec.k = 2;
  rec.violations = Eigen::Vector2d(0.1, std::numeric_limits<double>::infinity());
  rec.rho = Eigen::Vector2d(10, 50);
  rec.y = Eigen::Vector2d(0, 1);
  const auto j = trace_record_to_json(rec);
  for (const char* key : {"k", "objective", "violations", "aggregate_violation", "feasible", "rho", "y", "delta",
                          "step_inf_norm", "budget", "evaluations", "stalled"})
    CHECK(j.contains(key));
  CHECK(j["violations"][1].is_null());
  CHECK(j["rho"][1] == 50.0);
}

TEST_CASE("composite data-generation objective") {
  MagneticWell well = sample_well(3.0, 3.0, 0.2, 8, 1);
  OmnigenousTargetField target{well, MorphingCoefficients::zeros(0, 2, 2), 3};
  TargetPropertySet props;
  props.n_fp = 3;
  props.aspect = 8.0;
  props.iota_tilde = 0.2;
  props.max_elongation = 5.0;
  EquilibriumMetrics m;
  m.aspect_ratio = 8.0;
  m.iota_edge_over_nfp = 0.2;
  m.max_elongation = 4.0;
  m.boozer_b = target_on_boozer_grid(target, 16, 32);
  auto t = composite_objective_terms(m, target, props);
  CHECK(t.total() == doctest::Approx(0.0).scale(1.0));
  CHECK(t.elongation == 0.0);

  m.aspect_ratio = 8.8;
  t = composite_objective_terms(m, target, props);
  CHECK(t.total() == doctest::Approx(0.01).epsilon(1e-9));

  m.aspect_ratio = 8.0;
  m.max_elongation = 6.0;
  CHECK(composite_objective_terms(m, target, props).elongation == doctest::Approx(0.04));

  m.boozer_b.reset();
  CHECK_THROWS_AS(composite_objective_terms(m, target, props), UnsupportedConfigurationError);

  SyntheticOracle synth;
  const double v = composite_datagen_objective(make_rotating_ellipse(3, 8.0, 1.5, 0.0), target, props, synth);
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
}

TEST_CASE("Pareto sweep keeps only non-dominated feasible runs") {
  SyntheticOracle synth;
  AlmConfig cfg = AlmConfig::for_problem("mhd");
  cfg.outer_iterations = 2;
  cfg.budget_base = 30;
  cfg.budget_slope = 0;
  StellaratorAlmOptions opts;
  opts.final_high_fidelity = false;
  const auto spec = builtin_problem("mhd");
  const auto sweep = pareto_sweep(spec, {6.0, 8.0, 10.0, 12.0}, synth, cfg, opts);
  REQUIRE(sweep.runs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(sweep.runs[i].aspect_target == 6.0 + 2.0 * i);
  for (auto i : sweep.front) {
    CHECK(sweep.runs[i].evaluation.feasible);
    for (const auto& other : sweep.runs) {
      if (!other.evaluation.feasible) continue;
      const auto& a = other.evaluation.objectives;
      const auto& b = sweep.runs[i].evaluation.objectives;
      CHECK_FALSE((a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])));
    }
  }
  std::vector<EvaluationResult> evals;
  for (const auto& r : sweep.runs) evals.push_back(r.evaluation);
  CHECK(sweep.hypervolume == score_multi_objective(evals, spec));
  CHECK_THROWS_AS(pareto_sweep(spec, {}, synth, cfg, opts), ConfigurationError);
  CHECK_THROWS_AS(pareto_sweep(builtin_problem("geometric"), {6.0}, synth, cfg, opts), ConfigurationError);

  const std::vector<Point2> eq{{-2.0, 6.0}, {-3.0, 6.0}};
  CHECK(pareto_front_indices(eq) == std::vector<std::size_t>{1});
}
