#include "stellbench/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stellbench/embedded_data.hpp"
#include "stellbench/errors.hpp"

namespace stellbench {

namespace {

constexpr std::string_view kVacuumWell = "vacuum_well";

std::string_view direction_symbol(Direction d) {
  return d == Direction::less_equal ? "<=" : ">=";
}

Direction direction_from_symbol(const std::string& s) {
  if (s == "<=") return Direction::less_equal;
  if (s == ">=") return Direction::greater_equal;
  throw ConfigurationError("unknown constraint direction '" + s + "'");
}

Transform transform_from_string(const std::string& s) {
  if (s == "identity") return Transform::identity;
  if (s == "log10") return Transform::log10;
  throw ConfigurationError("unknown constraint transform '" + s + "'");
}

Point2 point_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ConfigurationError(std::string(what) + " must be a pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

void ConstraintSpec::validate() const {
  if (!is_metric_key(metric)) throw ConfigurationError("unknown constraint metric '" + metric + "'");
  if (!std::isfinite(target)) throw ConfigurationError("constraint target for " + metric + " is not finite");
  if (transform == Transform::log10 && !(target > 0.0))
    throw ConfigurationError("log10 transform needs a positive target for " + metric);
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigurationError("constraint scale must be finite and >= 0");
  if (target == 0.0 && scale == 0.0 && metric != kVacuumWell)
    throw ConfigurationError("zero target only supported for vacuum_well, got " + metric);
}

void ProblemSpec::validate() const {
  if (objectives.empty()) throw ConfigurationError("problem " + name + " has no objective");
  if (objectives.size() > 2) throw ConfigurationError("at most two objectives are supported");
  for (const auto& o : objectives) {
    if (!is_metric_key(o.metric)) throw ConfigurationError("unknown objective metric '" + o.metric + "'");
    if (o.sign != 1.0 && o.sign != -1.0) throw ConfigurationError("objective sign must be +1 or -1");
  }
  for (const auto& c : constraints) c.validate();
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigurationError("epsilon must be finite and >= 0");
  if (!multi_objective() && score_anchors[0] == score_anchors[1])
    throw ConfigurationError("score anchors must differ");
  if (multi_objective() && !hv_reference) throw ConfigurationError("multi-objective problem needs hv_reference");
  if (!relax_factors.empty() && relax_factors.size() != constraints.size())
    throw ConfigurationError("relax_factors must have one entry per constraint");
}

double normalized_violation(double c, const ConstraintSpec& spec) {
  double value = c;
  double target = spec.target;
  if (spec.transform == Transform::log10) {
    if (!(target > 0.0)) throw ConfigurationError("log10 transform needs a positive target");
    if (c < 0.0) throw DomainError("log10 transform of negative value for " + spec.metric);
    value = std::log10(c);
    target = std::log10(target);
  }
  if (std::isnan(value)) return std::numeric_limits<double>::infinity();
  const double signed_gap = spec.direction == Direction::less_equal ? value - target : target - value;
  if (spec.scale > 0.0) return signed_gap / spec.scale;
  if (target == 0.0) {
    if (spec.metric != kVacuumWell)
      throw ConfigurationError("zero target only supported for vacuum_well, got " + spec.metric);
    return signed_gap;
  }
  return signed_gap / std::abs(target);
}

double aggregate_violation(const std::vector<double>& violations) {
  double worst = 0.0;
  for (double v : violations) worst = std::max(worst, std::isnan(v) ? std::numeric_limits<double>::infinity() : v);
  return worst;
}

bool is_feasible(const std::vector<double>& violations, double epsilon) {
  return aggregate_violation(violations) <= epsilon;
}

double anchor_map(double f, const Point2& anchors) {
  const double t = (f - anchors[0]) / (anchors[1] - anchors[0]);
  if (std::isnan(t)) return 0.0;
  return std::clamp(t, 0.0, 1.0);
}

EvaluationResult evaluate_metrics(const EquilibriumMetrics& metrics, const ProblemSpec& spec) {
  EvaluationResult r;
  r.metrics = metrics;
  for (const auto& o : spec.objectives) r.objectives.push_back(o.sign * metrics.get(o.metric));
  for (const auto& c : spec.constraints) r.violations.push_back(normalized_violation(metrics.get(c.metric), c));
  r.aggregate_violation = aggregate_violation(r.violations);
  const bool finite_objectives =
      std::all_of(r.objectives.begin(), r.objectives.end(), [](double f) { return std::isfinite(f); });
  r.feasible = finite_objectives && r.aggregate_violation <= spec.epsilon;
  if (r.feasible) {
    if (spec.multi_objective()) {
      r.score = hypervolume_2d({Point2{r.objectives[0], r.objectives[1]}}, *spec.hv_reference);
    } else {
      r.score = anchor_map(r.objectives[0], spec.score_anchors);
    }
  }
  return r;
}

EvaluationResult failed_result(OracleErrorKind kind, std::string detail, const ProblemSpec& spec) {
  EvaluationResult r;
  const double inf = std::numeric_limits<double>::infinity();
  r.objectives.assign(spec.objectives.size(), inf);
  r.violations.assign(spec.constraints.size(), inf);
  r.aggregate_violation = inf;
  r.feasible = false;
  r.score = 0.0;
  r.failed = true;
  r.failure = kind;
  r.detail = std::move(detail);
  return r;
}

double score_single_objective(const EquilibriumMetrics& metrics, const ProblemSpec& spec) {
  if (spec.objectives.size() != 1) throw ConfigurationError("single-objective score needs exactly one objective");
  return evaluate_metrics(metrics, spec).score;
}

double hypervolume_2d(const std::vector<Point2>& points, const Point2& reference, std::size_t* excluded) {
  std::vector<Point2> kept;
  kept.reserve(points.size());
  std::size_t skipped = 0;
  for (const auto& p : points) {
    if (std::isfinite(p[0]) && std::isfinite(p[1]) && p[0] <= reference[0] && p[1] <= reference[1]) {
      kept.push_back(p);
    } else {
      ++skipped;
    }
  }
  if (excluded) *excluded = skipped;
  std::sort(kept.begin(), kept.end());
  double volume = 0.0;
  double ceiling = reference[1];
  for (const auto& p : kept) {
    if (p[1] < ceiling) {
      volume += (reference[0] - p[0]) * (ceiling - p[1]);
      ceiling = p[1];
    }
  }
  return volume;
}

std::vector<std::size_t> pareto_front_indices(const std::vector<Point2>& points) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      if (j == i) continue;
      const auto& p = points[j];
      const auto& q = points[i];
      dominated = p[0] <= q[0] && p[1] <= q[1] && (p[0] < q[0] || p[1] < q[1]);
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

double score_multi_objective(const std::vector<EvaluationResult>& results, const ProblemSpec& spec) {
  if (!spec.multi_objective() || !spec.hv_reference)
    throw ConfigurationError("multi-objective score needs a two-objective problem with a reference");
  std::vector<Point2> points;
  for (const auto& r : results) {
    if (r.failed || !r.feasible || r.objectives.size() != 2) continue;
    points.push_back({r.objectives[0], r.objectives[1]});
  }
  return hypervolume_2d(points, *spec.hv_reference);
}

EvaluationResult evaluate_boundary(const PlasmaBoundary& boundary, const ProblemSpec& spec, Oracle& oracle) {
  const OracleResponse response = oracle.evaluate({boundary, Fidelity::high});
  if (!response.ok()) return failed_result(response.error, response.detail, spec);
  return evaluate_metrics(*response.metrics, spec);
}

const nlohmann::json& problem_constants() {
  static const nlohmann::json constants = nlohmann::json::parse(embedded::kProblemConstantsJson);
  return constants;
}

std::string_view problem_constants_version() {
  static const std::string version = problem_constants().at("version").get<std::string>();
  return version;
}

ProblemSpec problem_from_json(const std::string& name, const nlohmann::json& j) {
  ProblemSpec p;
  p.name = name;
  try {
    for (const auto& o : j.at("objectives")) p.objectives.push_back({o.at("metric").get<std::string>(), o.at("sign").get<double>()});
    for (const auto& c : j.at("constraints")) {
      ConstraintSpec spec;
      spec.metric = c.at("metric").get<std::string>();
      spec.direction = direction_from_symbol(c.at("direction").get<std::string>());
      spec.target = c.at("target").get<double>();
      spec.transform = transform_from_string(c.value("transform", std::string("identity")));
      spec.scale = c.value("scale", 0.0);
      p.constraints.push_back(std::move(spec));
    }
    p.epsilon = j.value("epsilon", 0.01);
    if (j.contains("score_anchors")) {
      p.score_anchors = {j["score_anchors"].at("worst").get<double>(), j["score_anchors"].at("best").get<double>()};
    }
    if (j.contains("hv_reference")) p.hv_reference = point_from_json(j["hv_reference"], "hv_reference");
    if (j.contains("relax_factors")) p.relax_factors = j["relax_factors"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError("malformed problem '" + name + "': " + e.what());
  }
  p.validate();
  return p;
}

std::string canonical_problem_name(std::string_view name) {
  if (name == "geometric") return "geometric";
  if (name == "simple" || name == "simple_to_build_qi" || name == "simple-to-build") return "simple_to_build_qi";
  if (name == "mhd" || name == "mhd_stable_qi" || name == "mhd-stable") return "mhd_stable_qi";
  throw ConfigurationError("unknown problem '" + std::string(name) + "'");
}

ProblemSpec builtin_problem(std::string_view name) {
  const std::string key = canonical_problem_name(name);
  return problem_from_json(key, problem_constants().at("problems").at(key));
}

ProblemSpec relaxed_problem(const ProblemSpec& spec, const std::vector<double>& factors) {
  if (factors.size() != spec.constraints.size())
    throw ConfigurationError("need one relax factor per constraint (" + std::to_string(spec.constraints.size()) + ")");
  ProblemSpec out = spec;
  out.name = spec.name + "_relaxed";
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const double f = factors[i];
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigurationError("relax factors must be finite and >= 0");
    auto& c = out.constraints[i];
    const double sign = c.direction == Direction::less_equal ? 1.0 : -1.0;
    if (c.transform == Transform::log10) {
      const double t = std::log10(c.target);
      const double s = c.scale > 0.0 ? c.scale : std::abs(t);
      c.target = std::pow(10.0, t + sign * f * s);
      c.scale = s;
    } else {
      const double s = c.scale > 0.0 ? c.scale : (c.target == 0.0 ? 1.0 : std::abs(c.target));
      c.target += sign * f * s;
      c.scale = s;
    }
  }
  return out;
}

nlohmann::json constraint_to_json(const ConstraintSpec& c) {
  nlohmann::json j = {{"metric", c.metric},
                      {"direction", std::string(direction_symbol(c.direction))},
                      {"target", c.target},
                      {"transform", c.transform == Transform::log10 ? "log10" : "identity"}};
  if (c.scale > 0.0) j["scale"] = c.scale;
  return j;
}

nlohmann::json evaluation_to_json(const EvaluationResult& r, const ProblemSpec& spec) {
  auto finite_or_null = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json objectives = nlohmann::json::object();
  for (std::size_t i = 0; i < spec.objectives.size() && i < r.objectives.size(); ++i)
    objectives[spec.objectives[i].metric] = finite_or_null(r.objectives[i]);
  nlohmann::json violations = nlohmann::json::array();
  for (double v : r.violations) violations.push_back(finite_or_null(v));
  nlohmann::json j = {{"objectives", objectives},
                      {"violations", violations},
                      {"aggregate_violation", finite_or_null(r.aggregate_violation)},
                      {"feasible", r.feasible},
                      {"score", r.score},
                      {"failed", r.failed}};
  if (r.failure) j["error"] = std::string(to_string(*r.failure));
  if (!r.detail.empty()) j["detail"] = r.detail;
  if (r.metrics) {
    j["metrics"] = metrics_to_json(*r.metrics);
    j["metrics"].erase("boozer_b");
  }
  return j;
}

}  // namespace stellbench
