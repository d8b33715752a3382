#include "stellbench/stellarator_alm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "stellbench/errors.hpp"

namespace stellbench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<double> aspect_bound(const ProblemSpec& spec) {
  for (const auto& c : spec.constraints)
    if (c.metric == "aspect_ratio" && c.direction == Direction::less_equal) return c.target;
  return std::nullopt;
}

}  // namespace

PlasmaBoundary default_initial_boundary(const ProblemSpec& spec) {
  const double aspect = aspect_bound(spec).value_or(8.0);
  return make_rotating_ellipse(3, aspect, 1.5, 0.0);
}

StellaratorAlmResult run_alm(const ProblemSpec& spec, Oracle& oracle, const AlmConfig& config,
                             const PlasmaBoundary& initial, const StellaratorAlmOptions& options,
                             InnerSolver* solver) {
  if (spec.objectives.size() != 1) throw ConfigurationError("run_alm needs a single-objective problem");
  validate(initial);
  const BoundaryLayout layout = layout_of(initial);
  const double r00 = initial.major_radius();
  Preconditioner pre = Preconditioner::exponential(layout, options.preconditioner_base);
  pre.qi_log_transform = options.qi_log_transform;

  std::vector<ConstraintSpec> constraints = spec.constraints;
  if (!pre.qi_log_transform)
    for (auto& c : constraints) c.transform = Transform::identity;
  const ObjectiveSpec objective = spec.objectives.front();

  CountingOracle counter(oracle);
  auto to_boundary = [&](const Eigen::VectorXd& x) {
    PlasmaBoundary b = unflatten(pre.unprecondition(x), layout, r00);
    b.n_field_periods = initial.n_field_periods;
    return b;
  };
  AlmProblem problem = [&](const Eigen::VectorXd& x) {
    AlmEvaluation e;
    const OracleResponse r = counter.evaluate({to_boundary(x), options.fidelity});
    if (!r.ok()) return e;
    e.objective = objective.sign * r.metrics->get(objective.metric);
    e.constraints.resize(static_cast<Eigen::Index>(constraints.size()));
    for (std::size_t i = 0; i < constraints.size(); ++i)
      e.constraints(static_cast<Eigen::Index>(i)) = normalized_violation(r.metrics->get(constraints[i].metric), constraints[i]);
    e.ok = std::isfinite(e.objective);
    return e;
  };

  DiagonalEvolutionStrategy default_solver;
  AlmRunOptions run;
  run.feasibility_tolerance = spec.epsilon;
  run.seed = options.seed;
  run.on_iteration = options.on_iteration;

  StellaratorAlmResult out;
  out.alm = minimize_alm(problem, pre.precondition(flatten(initial)), static_cast<Eigen::Index>(constraints.size()),
                         config, solver ? *solver : default_solver, run);
  out.boundary = to_boundary(out.alm.theta_tilde);
  if (options.final_high_fidelity) {
    out.evaluation = evaluate_boundary(out.boundary, spec, counter);
  } else {
    const OracleResponse r = counter.evaluate({out.boundary, options.fidelity});
    out.evaluation = r.ok() ? evaluate_metrics(*r.metrics, spec) : failed_result(r.error, r.detail, spec);
  }
  out.oracle_calls = counter.calls();
  return out;
}

ProblemSpec with_aspect_constraint(const ProblemSpec& spec, double aspect_target) {
  if (!(aspect_target > 1.0)) throw DomainError("aspect target must be > 1");
  ProblemSpec single = spec;
  single.name = spec.name + "_A" + std::to_string(aspect_target);
  single.objectives.resize(1);
  single.hv_reference.reset();
  single.score_anchors = {0.0, 1.0};
  single.constraints.push_back({"aspect_ratio", Direction::less_equal, aspect_target, Transform::identity});
  if (!single.relax_factors.empty()) single.relax_factors.push_back(0.0);
  return single;
}

ParetoSweepResult pareto_sweep(const ProblemSpec& spec, const std::vector<double>& aspect_targets, Oracle& oracle,
                               const AlmConfig& config, const StellaratorAlmOptions& options) {
  if (!spec.multi_objective()) throw ConfigurationError("pareto sweep needs a two-objective problem");
  if (aspect_targets.empty()) throw ConfigurationError("pareto sweep needs at least one aspect target");
  ParetoSweepResult out;
  std::vector<Point2> points;
  std::vector<std::size_t> point_run;
  for (double target : aspect_targets) {
    const ProblemSpec single = with_aspect_constraint(spec, target);
    const PlasmaBoundary initial = make_rotating_ellipse(3, target, 1.5, 0.0);
    ParetoRun run;
    run.aspect_target = target;
    try {
      StellaratorAlmResult r = run_alm(single, oracle, config, initial, options);
      run.boundary = r.boundary;
      run.evaluation = r.evaluation.metrics ? evaluate_metrics(*r.evaluation.metrics, spec)
                                            : failed_result(r.evaluation.failure.value_or(OracleErrorKind::solver_failed),
                                                            r.evaluation.detail, spec);
    } catch (const ConfigurationError& e) {
      run.boundary = initial;
      run.evaluation = failed_result(OracleErrorKind::solver_failed, e.what(), spec);
    }
    if (run.evaluation.feasible && !run.evaluation.failed) {
      points.push_back({run.evaluation.objectives[0], run.evaluation.objectives[1]});
      point_run.push_back(out.runs.size());
    }
    out.runs.push_back(std::move(run));
  }
  for (std::size_t i : pareto_front_indices(points)) out.front.push_back(point_run[i]);
  std::vector<EvaluationResult> evals;
  for (const auto& r : out.runs) evals.push_back(r.evaluation);
  out.hypervolume = score_multi_objective(evals, spec);
  return out;
}

CompositeObjectiveTerms composite_objective_terms(const EquilibriumMetrics& metrics,
                                                  const OmnigenousTargetField& target,
                                                  const TargetPropertySet& props) {
  if (!metrics.boozer_b) throw UnsupportedConfigurationError("oracle response carries no Boozer |B| grid");
  const Eigen::MatrixXd& b = *metrics.boozer_b;
  const Eigen::Index n_theta = b.rows();
  const Eigen::Index n_phi = b.cols();
  if (n_theta < 1 || n_phi < 2 || n_phi % 2 != 0) throw ShapeError("Boozer grid needs an even number of phi columns");
  if (!(props.aspect > 0.0) || !(props.iota_tilde > 0.0) || !(props.max_elongation > 0.0))
    throw DomainError("target properties must be positive");

  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double d_theta = two_pi / double(n_theta);
  const double d_phi = two_pi / (double(target.n_field_periods) * double(n_phi));
  const Eigen::MatrixXd b_star = target_on_boozer_grid(target, int(n_theta), int(n_phi));

  CompositeObjectiveTerms t;
  // Half a field period: phi_B in [0, pi / N_fp).
  t.field_mismatch = (b - b_star).leftCols(n_phi / 2).squaredNorm() * d_theta * d_phi;
  const Eigen::VectorXd gap = b.rowwise().maxCoeff() - b.col(0);
  t.maxima_straightness = gap.squaredNorm() * d_theta;
  const double ra = (metrics.aspect_ratio - props.aspect) / props.aspect;
  t.aspect = ra * ra;
  const double ri = (metrics.iota_edge_over_nfp - props.iota_tilde) / props.iota_tilde;
  t.iota = ri * ri;
  const double re = std::max(0.0, (metrics.max_elongation - props.max_elongation) / props.max_elongation);
  t.elongation = re * re;
  return t;
}

double composite_datagen_objective(const PlasmaBoundary& boundary, const OmnigenousTargetField& target,
                                   const TargetPropertySet& props, Oracle& oracle, Fidelity fidelity) {
  const OracleResponse r = oracle.evaluate({boundary, fidelity});
  if (!r.ok()) return kInf;
  return composite_objective_terms(*r.metrics, target, props).total();
}

}  // namespace stellbench
