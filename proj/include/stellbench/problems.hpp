#ifndef STELLBENCH_PROBLEMS_HPP
#define STELLBENCH_PROBLEMS_HPP

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stellbench/boundary.hpp"
#include "stellbench/oracle.hpp"

namespace stellbench {

enum class Direction { less_equal, greater_equal };
enum class Transform { identity, log10 };

struct ConstraintSpec {
  std::string metric;
  Direction direction = Direction::less_equal;
  double target = 0.0;
  Transform transform = Transform::identity;
  // Divisor of the violation (after the transform); 0 means |target|.
  double scale = 0.0;

  // Throws ConfigurationError.
  void validate() const;
};

struct ObjectiveSpec {
  std::string metric;
  // f = sign * metric, minimised.
  double sign = 1.0;
};

using Point2 = std::array<double, 2>;

struct ProblemSpec {
  std::string name;
  std::vector<ObjectiveSpec> objectives;
  std::vector<ConstraintSpec> constraints;
  double epsilon = 0.01;
  // (f_worst, f_best): h(f_worst) = 0, h(f_best) = 1.
  Point2 score_anchors{0.0, 1.0};
  std::optional<Point2> hv_reference;
  // Per-constraint loosening used to label training data.
  std::vector<double> relax_factors;

  bool multi_objective() const { return objectives.size() > 1; }
  void validate() const;
};

struct EvaluationResult {
  std::vector<double> objectives;
  std::vector<double> violations;
  double aggregate_violation = 0.0;
  bool feasible = false;
  double score = 0.0;
  bool failed = false;
  std::optional<OracleErrorKind> failure;
  std::string detail;
  std::optional<EquilibriumMetrics> metrics;
};

// Signed normalised violation; positive means violated. W_MHD >= 0 (target 0)
// is measured in absolute terms. Throws ConfigurationError for any other zero
// target.
double normalized_violation(double c, const ConstraintSpec& spec);

// max(0, max_i v_i); zero for an empty list.
double aggregate_violation(const std::vector<double>& violations);

bool is_feasible(const std::vector<double>& violations, double epsilon);

// Linear map of f onto [0, 1] through the anchors, clamped.
double anchor_map(double f, const Point2& anchors);

// Objectives, violations, feasibility and score from a metric row. For
// multi-objective problems the per-point score is the hypervolume of that
// point alone.
EvaluationResult evaluate_metrics(const EquilibriumMetrics& metrics, const ProblemSpec& spec);

EvaluationResult failed_result(OracleErrorKind kind, std::string detail, const ProblemSpec& spec);

// Zero when infeasible; throws ConfigurationError for multi-objective specs.
double score_single_objective(const EquilibriumMetrics& metrics, const ProblemSpec& spec);

// Area dominated by `points` and bounded by `reference` (minimisation in both
// coordinates). Points not strictly below the reference in both coordinates
// are skipped and counted in *excluded.
double hypervolume_2d(const std::vector<Point2>& points, const Point2& reference,
                      std::size_t* excluded = nullptr);

// Indices of non-dominated points, minimisation in both coordinates. Equal
// points are all kept.
std::vector<std::size_t> pareto_front_indices(const std::vector<Point2>& points);

// Hypervolume over the feasible, non-failed subset.
double score_multi_objective(const std::vector<EvaluationResult>& results, const ProblemSpec& spec);

// One high-fidelity oracle call.
EvaluationResult evaluate_boundary(const PlasmaBoundary& boundary, const ProblemSpec& spec,
                                   Oracle& oracle);

const nlohmann::json& problem_constants();
std::string_view problem_constants_version();

ProblemSpec problem_from_json(const std::string& name, const nlohmann::json& j);

// Accepts geometric, simple, simple_to_build_qi, mhd, mhd_stable_qi.
ProblemSpec builtin_problem(std::string_view name);
std::string canonical_problem_name(std::string_view name);

// Loosens each target so that c_tilde <= factor is accepted, keeping the
// original violation scale. Log-transformed targets are loosened in log
// space; zero targets by the absolute factor.
ProblemSpec relaxed_problem(const ProblemSpec& spec, const std::vector<double>& factors);

nlohmann::json constraint_to_json(const ConstraintSpec& c);
nlohmann::json evaluation_to_json(const EvaluationResult& r, const ProblemSpec& spec);

}  // namespace stellbench

#endif  // STELLBENCH_PROBLEMS_HPP
