#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "stellbench/errors.hpp"
#include "stellbench/geometry.hpp"
#include "stellbench/problems.hpp"
#include "support.hpp"

using namespace stellbench;

namespace {

ConstraintSpec le(std::string metric, double target, Transform t = Transform::identity) {
  return {std::move(metric), Direction::less_equal, target, t};
}
ConstraintSpec ge(std::string metric, double target) {
  return {std::move(metric), Direction::greater_equal, target, Transform::identity};
}

EquilibriumMetrics geometric_metrics(double a, double eps, double delta, double iota) {
  EquilibriumMetrics m;
  m.aspect_ratio = a;
  m.max_elongation = eps;
  m.average_triangularity = delta;
  m.iota_edge_over_nfp = iota;
  return m;
}

double monte_carlo_hv(const std::vector<Point2>& pts, const Point2& lo, const Point2& ref, int samples,
                      std::mt19937_64& rng, double* stderr_out) {
  std::uniform_real_distribution<double> ux(lo[0], ref[0]), uy(lo[1], ref[1]);
  int hits = 0;
  for (int s = 0; s < samples; ++s) {
    const double x = ux(rng), y = uy(rng);
    for (const auto& p : pts) {
      if (p[0] <= x && p[1] <= y) {
        ++hits;
        break;
      }
    }
  }
  const double box = (ref[0] - lo[0]) * (ref[1] - lo[1]);
  const double p = double(hits) / samples;
  *stderr_out = box * std::sqrt(p * (1 - p) / samples);
  return box * p;
}

}  // namespace

TEST_CASE("normalized violation arithmetic") {
  CHECK(normalized_violation(1.2, le("aspect_ratio", 1.0)) == doctest::Approx(0.2));
  CHECK(normalized_violation(1.0, le("aspect_ratio", 1.0)) == 0.0);
  CHECK(normalized_violation(0.2, ge("edge_rotational_transform_over_n_field_periods", 0.3)) ==
        doctest::Approx(1.0 / 3.0));
  CHECK(normalized_violation(-0.6, le("average_triangularity", -0.5)) == doctest::Approx(-0.2));
  CHECK(normalized_violation(-0.4, le("average_triangularity", -0.5)) == doctest::Approx(0.2));
  CHECK(normalized_violation(1e-3, le("qi", 1e-4, Transform::log10)) == doctest::Approx(0.25));
  CHECK(normalized_violation(1e-5, le("qi", 1e-4, Transform::log10)) == doctest::Approx(-0.25));
  CHECK(normalized_violation(-0.02, ge("vacuum_well", 0.0)) == doctest::Approx(0.02));
  CHECK(normalized_violation(0.05, ge("vacuum_well", 0.0)) == doctest::Approx(-0.05));
  CHECK_THROWS_AS(normalized_violation(1.0, le("aspect_ratio", 0.0)), ConfigurationError);
  CHECK_THROWS_AS(le("aspect_ratio", 0.0).validate(), ConfigurationError);
  CHECK_NOTHROW(ge("vacuum_well", 0.0).validate());
  CHECK_THROWS_AS(le("bogus", 1.0).validate(), ConfigurationError);
  CHECK_THROWS_AS(le("qi", -1.0, Transform::log10).validate(), ConfigurationError);
}

TEST_CASE("normalized violation is scale invariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5), scale(1e-3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    double c = u(rng), t = u(rng);
    if (std::abs(t) < 1e-3) continue;
    const double lam = scale(rng);
    for (auto spec : {le("aspect_ratio", t), ge("aspect_ratio", t)}) {
      const double v = normalized_violation(c, spec);
      spec.target *= lam;
      CHECK(normalized_violation(c * lam, spec) == doctest::Approx(v).epsilon(1e-9));
    }
  }
}

TEST_CASE("aggregate violation and feasibility") {
  CHECK(aggregate_violation({}) == 0.0);
  CHECK(aggregate_violation({-0.5, -0.1}) == 0.0);
  CHECK(aggregate_violation({-0.5, 0.3, 0.1}) == 0.3);
  CHECK(std::isinf(aggregate_violation({0.0, std::nan("")})));
  CHECK(is_feasible({0.01}, 0.01));
  CHECK_FALSE(is_feasible({0.0100001}, 0.01));
  CHECK(is_feasible({0.0, -1.0}, 0.0));
  CHECK_FALSE(is_feasible({1e-15}, 0.0));
}

TEST_CASE("single-objective score case split and anchors") {
  const auto spec = builtin_problem("geometric");
  CHECK(score_single_objective(geometric_metrics(3.5, 1.0, -0.6, 0.4), spec) == 1.0);
  CHECK(score_single_objective(geometric_metrics(3.5, 10.0, -0.6, 0.4), spec) == 0.0);
  CHECK(score_single_objective(geometric_metrics(3.5, 5.5, -0.6, 0.4), spec) == doctest::Approx(0.5));
  CHECK(score_single_objective(geometric_metrics(3.5, 0.5, -0.6, 0.4), spec) == 1.0);
  CHECK(score_single_objective(geometric_metrics(3.5, 20.0, -0.6, 0.4), spec) == 0.0);
  CHECK(score_single_objective(geometric_metrics(4.1, 2.0, -0.6, 0.4), spec) == 0.0);
  CHECK(score_single_objective(geometric_metrics(4.03, 2.0, -0.6, 0.4), spec) > 0.0);
  CHECK(score_single_objective(geometric_metrics(3.5, 2.0, -0.6, 0.2), spec) == 0.0);
  CHECK_THROWS_AS(score_single_objective(EquilibriumMetrics{}, builtin_problem("mhd")), ConfigurationError);
  CHECK(anchor_map(0.0, {0.0, -20.0}) == 0.0);
  CHECK(anchor_map(-20.0, {0.0, -20.0}) == 1.0);
}

TEST_CASE("published single-objective leaderboard scores follow from the anchors") {
  const auto geo = builtin_problem("geometric");
  CHECK(score_single_objective(geometric_metrics(3.9, 1.27, -0.55, 0.31), geo) == doctest::Approx(0.969).epsilon(2e-3));
  const auto simple = builtin_problem("simple");
  EquilibriumMetrics m;
  m.min_normalized_grad_scale_length = 8.61;
  m.iota_edge_over_nfp = 0.3;
  m.qi_residual = 5e-5;
  m.edge_mirror_ratio = 0.15;
  m.aspect_ratio = 9.0;
  m.max_elongation = 4.0;
  CHECK(score_single_objective(m, simple) == doctest::Approx(0.431).epsilon(1e-3));
}

TEST_CASE("score is monotone in the objective and zero once infeasible") {
  const auto spec = builtin_problem("geometric");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> eps(0.5, 12.0);
  for (int i = 0; i < 500; ++i) {
    const double a = eps(rng), b = eps(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(score_single_objective(geometric_metrics(3.9, lo, -0.6, 0.35), spec) >=
          score_single_objective(geometric_metrics(3.9, hi, -0.6, 0.35), spec));
    CHECK(score_single_objective(geometric_metrics(4.5, lo, -0.6, 0.35), spec) == 0.0);
  }
}

TEST_CASE("hypervolume fixtures") {
  CHECK(hypervolume_2d({{1, 1}}, {2, 2}) == 1.0);
  CHECK(hypervolume_2d({{1, 3}, {2, 2}, {3, 1}}, {4, 4}) == 6.0);
  CHECK(hypervolume_2d({}, {4, 4}) == 0.0);
  std::size_t excluded = 0;
  CHECK(hypervolume_2d({{1, 1}, {5, 1}, {1, 4}}, {4, 4}, &excluded) == 9.0);
  CHECK(excluded == 1);
  CHECK(hypervolume_2d({{std::numeric_limits<double>::infinity(), 1}}, {4, 4}, &excluded) == 0.0);
  CHECK(excluded == 1);
}

TEST_CASE("hypervolume agrees with Monte Carlo on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 12);
  int outside = 0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<Point2> pts(count(rng));
    for (auto& p : pts) p = {u(rng), u(rng)};
    const Point2 ref{1.0, 1.0};
    double se = 0.0;
    const double mc = monte_carlo_hv(pts, {0.0, 0.0}, ref, 200000, rng, &se);
    const double hv = hypervolume_2d(pts, ref);
    if (std::abs(hv - mc) > 3 * se + 1e-12) ++outside;
  }
  // About 0.3 of 100 expected beyond 3 standard errors.
  CHECK(outside <= 2);
}

TEST_CASE("hypervolume monotone and invariant under permutation and duplication") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const Point2 ref{10.0, 10.0};
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<Point2> pts(8);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const double hv = hypervolume_2d(pts, ref);
    auto shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(hypervolume_2d(shuffled, ref) == doctest::Approx(hv).epsilon(1e-14));
    auto dup = pts;
    dup.insert(dup.end(), pts.begin(), pts.begin() + 3);
    CHECK(hypervolume_2d(dup, ref) == doctest::Approx(hv).epsilon(1e-14));
    auto more = pts;
    more.push_back({u(rng), u(rng)});
    CHECK(hypervolume_2d(more, ref) >= hv);
    CHECK(hypervolume_2d({ref}, ref) == 0.0);
  }
}

TEST_CASE("Pareto front") {
  const std::vector<Point2> pts{{1, 3}, {2, 2}, {3, 1}, {3, 3}, {2, 2}, {0.5, 5}};
  const auto front = pareto_front_indices(pts);
  CHECK(front == std::vector<std::size_t>{0, 1, 2, 4, 5});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<Point2> r(20);
    for (auto& p : r) p = {u(rng), u(rng)};
    const auto f = pareto_front_indices(r);
    std::vector<Point2> fp;
    for (auto i : f) fp.push_back(r[i]);
    CHECK(hypervolume_2d(fp, {1, 1}) == doctest::Approx(hypervolume_2d(r, {1, 1})).epsilon(1e-14));
  }
}

TEST_CASE("multi-objective leaderboard filter") {
  const auto spec = builtin_problem("mhd");
  struct Row {
    double a, l, viol;
  };
  const std::vector<Row> rows{{6.02, 2.98, 0.104}, {7.93, 5.60, 0.00130}, {9.98, 8.45, 0.0}, {11.9, 11.1, 0.00210}};
  std::vector<EvaluationResult> results;
  for (const auto& row : rows) {
    EvaluationResult r;
    r.objectives = {-row.l, row.a};
    r.violations = {row.viol};
    r.aggregate_violation = row.viol;
    r.feasible = is_feasible(r.violations, spec.epsilon);
    results.push_back(r);
  }
  CHECK_FALSE(results[0].feasible);
  CHECK(results[1].feasible);
  CHECK(results[2].feasible);
  CHECK(results[3].feasible);
  const double hv = score_multi_objective(results, spec);
  // Sweep by hand: 12.1*8.1 + 9.45*1.92 + 6.6*2.05.
  CHECK(hv == doctest::Approx(129.684).epsilon(1e-12));
  CHECK(hv == doctest::Approx(130.0).epsilon(5e-3));
  CHECK(score_multi_objective({}, spec) == 0.0);
  CHECK_THROWS_AS(score_multi_objective(results, builtin_problem("geometric")), ConfigurationError);
}

TEST_CASE("built-in problems match the constraint table") {
  const auto geo = builtin_problem("geometric");
  REQUIRE(geo.constraints.size() == 3);
  CHECK(geo.objectives[0].metric == "max_elongation");
  CHECK(geo.constraints[0].target == 4.0);
  CHECK(geo.constraints[1].target == -0.5);
  CHECK(geo.constraints[2].direction == Direction::greater_equal);
  CHECK(geo.constraints[2].target == 0.3);
  CHECK(geo.epsilon == 0.01);

  const auto simple = builtin_problem("simple-to-build");
  CHECK(simple.name == "simple_to_build_qi");
  REQUIRE(simple.constraints.size() == 5);
  CHECK(simple.objectives[0].sign == -1.0);
  CHECK(simple.constraints[1].transform == Transform::log10);
  CHECK(simple.constraints[1].target == 1e-4);
  CHECK(simple.constraints[2].target == 0.2);
  CHECK(simple.constraints[3].target == 10.0);
  CHECK(simple.constraints[4].target == 5.0);

  const auto mhd = builtin_problem("mhd_stable_qi");
  REQUIRE(mhd.objectives.size() == 2);
  CHECK(mhd.objectives[1].metric == "aspect_ratio");
  CHECK(mhd.constraints[1].target == doctest::Approx(std::pow(10.0, -3.5)).epsilon(1e-12));
  CHECK(mhd.constraints[3].metric == "vacuum_well");
  CHECK(mhd.constraints[3].target == 0.0);
  CHECK(mhd.constraints[4].target == 0.9);
  CHECK((*mhd.hv_reference == Point2{1.0, 20.0}));
  CHECK(problem_constants_version() == "1.0.0");
  CHECK_THROWS_AS(builtin_problem("nonsense"), ConfigurationError);
}

TEST_CASE("relaxed problems accept the loosened region") {
  const auto geo = builtin_problem("geometric");
  const auto relaxed = relaxed_problem(geo, {1.0, 1.0, 0.5});
  CHECK(relaxed.constraints[0].target == 8.0);
  CHECK(relaxed.constraints[1].target == 0.0);
  CHECK(relaxed.constraints[2].target == doctest::Approx(0.15));
  const auto mhd = builtin_problem("mhd");
  const auto rm = relaxed_problem(mhd, {0.5, 0.5, 0.5, 0.05, 0.5});
  CHECK(rm.constraints[1].target == doctest::Approx(std::pow(10.0, -3.5 * 0.5)).epsilon(1e-12));
  CHECK(rm.constraints[3].target == doctest::Approx(-0.05));
  CHECK_THROWS_AS(relaxed_problem(geo, {1.0}), ConfigurationError);
  CHECK_THROWS_AS(relaxed_problem(geo, {1.0, -1.0, 0.5}), ConfigurationError);
  CHECK(rm.constraints[3].scale == 1.0);
  CHECK(normalized_violation(-0.08, rm.constraints[3]) == doctest::Approx(0.03));

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> f(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<double> factors{f(rng), f(rng), f(rng), f(rng), f(rng)};
    const auto loose = relaxed_problem(mhd, factors);
    CHECK_NOTHROW(loose.validate());
    EquilibriumMetrics m;
    m.iota_edge_over_nfp = f(rng) * 0.3;
    m.qi_residual = std::pow(10.0, -5.0 + f(rng));
    m.edge_mirror_ratio = f(rng) * 0.3;
    m.vacuum_well = f(rng) * 0.1 - 0.1;
    m.flux_compression = f(rng);
    for (std::size_t i = 0; i < factors.size(); ++i) {
      const auto& c = mhd.constraints[i];
      CHECK(normalized_violation(m.get(c.metric), loose.constraints[i]) ==
            doctest::Approx(normalized_violation(m.get(c.metric), c) - factors[i]).scale(1.0).epsilon(1e-12));
    }
  }
  const auto geo_loose = relaxed_problem(geo, {1.0, 1.0, 0.5});
  CHECK(normalized_violation(0.25, geo_loose.constraints[1]) == doctest::Approx(0.5));
  CHECK(problem_from_json("r", {{"objectives", {{{"metric", "aspect_ratio"}, {"sign", 1.0}}}},
                                {"constraints", {constraint_to_json(geo_loose.constraints[1])}}})
            .constraints[0]
            .scale == 0.5);
  const auto zero = relaxed_problem(geo, {0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(zero.constraints[i].target == geo.constraints[i].target);
}

TEST_CASE("evaluate boundary through an oracle") {
  const auto spec = builtin_problem("geometric");
  SyntheticOracle oracle;
  auto circle = make_boundary({3, 4, 4, true});
  circle.r(1, 0) = 0.3;
  circle.z(1, 0) = 0.3;
  const auto r1 = evaluate_boundary(circle, spec, oracle);
  const auto r2 = evaluate_boundary(circle, spec, oracle);
  CHECK_FALSE(r1.failed);
  CHECK(evaluation_to_json(r1, spec) == evaluation_to_json(r2, spec));
  CHECK(r1.objectives[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(r1.feasible);

  auto fat = circle;
  fat.r(1, 0) = 0.9;
  fat.z(1, 0) = 0.9;
  const auto f = evaluate_boundary(fat, spec, oracle);
  CHECK(f.failed);
  CHECK_FALSE(f.feasible);
  CHECK(f.score == 0.0);
  CHECK(f.failure == OracleErrorKind::solver_failed);
  const auto j = evaluation_to_json(f, spec);
  CHECK(j.at("aggregate_violation").is_null());
  CHECK(j.at("error") == "solver_failed");
}

TEST_CASE("problem JSON validation") {
  nlohmann::json j = {{"objectives", {{{"metric", "aspect_ratio"}, {"sign", 1.0}}}},
                      {"constraints", nlohmann::json::array()},
                      {"score_anchors", {{"worst", 10.0}, {"best", 1.0}}}};
  CHECK_NOTHROW(problem_from_json("x", j));
  auto bad = j;
  bad["objectives"][0]["sign"] = 2.0;
  CHECK_THROWS_AS(problem_from_json("x", bad), ConfigurationError);
  bad = j;
  bad["score_anchors"] = {{"worst", 1.0}, {"best", 1.0}};
  CHECK_THROWS_AS(problem_from_json("x", bad), ConfigurationError);
  bad = j;
  bad["constraints"] = {{{"metric", "aspect_ratio"}, {"direction", "<"}, {"target", 1.0}}};
  CHECK_THROWS_AS(problem_from_json("x", bad), ConfigurationError);
  bad = j;
  bad.erase("objectives");
  CHECK_THROWS_AS(problem_from_json("x", bad), ConfigurationError);
}
