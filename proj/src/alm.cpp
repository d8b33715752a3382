#include "stellbench/alm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stellbench/errors.hpp"
#include "stellbench/problems.hpp"

namespace stellbench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double positive_part_max(const Eigen::VectorXd& c) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) worst = std::max(worst, std::isnan(c(i)) ? kInf : c(i));
  return worst;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) {
      a.push_back(v(i));
    } else {
      a.push_back(nullptr);
    }
  }
  return a;
}

}  // namespace

void AlmConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigurationError("ALM config: " + what); };
  if (!(rho0 > 0.0)) fail("rho0 must be > 0");
  if (!(rho_max > 0.0) || rho_max < rho0) fail("rho_max must be >= rho0 > 0");
  if (!(y0 >= 0.0)) fail("y0 must be >= 0");
  if (!(delta0 > 0.0)) fail("delta0 must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must be in (0, 1)");
  if (!(delta_min > 0.0)) fail("delta_min must be > 0");
  if (!(tau > 0.0 && tau < 1.0)) fail("tau must be in (0, 1)");
  if (!(sigma > 1.0)) fail("sigma must be > 1");
  if (outer_iterations < 0) fail("outer_iterations must be >= 0");
  if (budget_base < 0 || budget_slope < 0 || budget_cap < 0) fail("budget schedule must be non-negative");
}

AlmConfig AlmConfig::for_problem(std::string_view problem) {
  const std::string key = canonical_problem_name(problem);
  const auto& j = problem_constants().at("problems").at(key).at("alm");
  return alm_config_from_json(j);
}

AlmConfig alm_config_from_json(const nlohmann::json& j, AlmConfig base) {
  if (!j.is_object()) throw ConfigurationError("ALM config must be a JSON object");
  AlmConfig c = base;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "rho0") c.rho0 = value.get<double>();
      else if (key == "rho_max") c.rho_max = value.get<double>();
      else if (key == "y0") c.y0 = value.get<double>();
      else if (key == "delta0") c.delta0 = value.get<double>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "delta_min") c.delta_min = value.get<double>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "sigma") c.sigma = value.get<double>();
      else if (key == "outer_iterations") c.outer_iterations = value.get<int>();
      else if (key == "budget_base") c.budget_base = value.get<int>();
      else if (key == "budget_slope") c.budget_slope = value.get<int>();
      else if (key == "budget_cap") c.budget_cap = value.get<int>();
      else throw ConfigurationError("ALM config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("ALM config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json alm_config_to_json(const AlmConfig& c) {
  return {{"rho0", c.rho0},           {"rho_max", c.rho_max},
          {"y0", c.y0},               {"delta0", c.delta0},
          {"gamma", c.gamma},         {"delta_min", c.delta_min},
          {"tau", c.tau},             {"sigma", c.sigma},
          {"outer_iterations", c.outer_iterations},
          {"budget_base", c.budget_base}, {"budget_slope", c.budget_slope},
          {"budget_cap", c.budget_cap}};
}

int inner_budget_schedule(int k, const AlmConfig& config) {
  if (k < 0) throw DomainError("outer iteration index must be >= 0");
  const long long raw = static_cast<long long>(config.budget_base) + static_cast<long long>(k) * config.budget_slope;
  return static_cast<int>(std::min<long long>(config.budget_cap, raw));
}

Preconditioner Preconditioner::identity(Eigen::Index n) {
  return {Eigen::VectorXd::Ones(n), true};
}

Preconditioner Preconditioner::exponential(const BoundaryLayout& layout, double base) {
  if (!(base > 0.0)) throw DomainError("preconditioner base must be > 0");
  const auto modes = free_modes(layout);
  Preconditioner p;
  p.lambda.resize(static_cast<Eigen::Index>(modes.size()));
  for (std::size_t i = 0; i < modes.size(); ++i)
    p.lambda(static_cast<Eigen::Index>(i)) = std::pow(base, modes[i].m + std::abs(modes[i].n));
  return p;
}

Eigen::VectorXd Preconditioner::precondition(const Eigen::VectorXd& theta) const {
  if (theta.size() != lambda.size()) throw ShapeError("preconditioner size mismatch");
  return theta.cwiseQuotient(lambda);
}

Eigen::VectorXd Preconditioner::unprecondition(const Eigen::VectorXd& theta_tilde) const {
  if (theta_tilde.size() != lambda.size()) throw ShapeError("preconditioner size mismatch");
  return theta_tilde.cwiseProduct(lambda);
}

double augmented_lagrangian(double f, const Eigen::VectorXd& c, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& rho) {
  double penalty = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double shifted = std::max(0.0, y(i) + rho(i) * c(i));
    penalty += (shifted * shifted - y(i) * y(i)) / rho(i);
  }
  return f + 0.5 * penalty;
}

AlmState initial_state(const Eigen::VectorXd& theta_tilde0, Eigen::Index n_constraints, const AlmConfig& config) {
  config.validate();
  AlmState s;
  s.theta_tilde = theta_tilde0;
  s.y = Eigen::VectorXd::Constant(n_constraints, config.y0);
  s.rho = Eigen::VectorXd::Constant(n_constraints, config.rho0);
  s.delta = config.delta0;
  s.k = 0;
  return s;
}

PrimalResult primal_update(const AlmState& state, const AlmEvaluation& incumbent, const AlmProblem& problem,
                           InnerSolver& solver, int budget, std::uint64_t seed) {
  auto value_of = [&](const AlmEvaluation& e) {
    if (!e.ok) return kInf;
    const double v = augmented_lagrangian(e.objective, e.constraints, state.y, state.rho);
    return std::isnan(v) ? kInf : v;
  };
  PrimalResult out;
  out.theta_tilde = state.theta_tilde;
  out.evaluation = incumbent;
  out.value = value_of(incumbent);
  if (budget <= 0) return out;

  auto wrapped = [&](const Eigen::VectorXd& x) {
    if ((x - state.theta_tilde).lpNorm<Eigen::Infinity>() > state.delta * (1.0 + 1e-12) + 1e-15)
      throw std::logic_error("inner solver left the trust region");
    AlmEvaluation e = problem(x);
    ++out.evaluations;
    const double v = value_of(e);
    if (v < out.value) {
      out.value = v;
      out.theta_tilde = x;
      out.evaluation = std::move(e);
      out.stalled = false;
    }
    return v;
  };
  solver.minimize(wrapped, state.theta_tilde, out.value, state.delta, budget, seed);
  return out;
}

void dual_and_penalty_update(AlmState& state, const Eigen::VectorXd& c_new, const Eigen::VectorXd& c_prev,
                             const AlmConfig& config) {
  for (Eigen::Index i = 0; i < state.y.size(); ++i) {
    state.y(i) = std::max(0.0, state.y(i) + state.rho(i) * c_new(i));
    const double now = std::max(0.0, c_new(i));
    const double before = std::max(0.0, c_prev(i));
    if (!(now <= config.tau * before)) state.rho(i) = std::min(config.rho_max, config.sigma * state.rho(i));
  }
  state.delta = std::max(config.delta_min, config.gamma * state.delta);
}

nlohmann::json trace_record_to_json(const AlmIterationRecord& r) {
  return {{"k", r.k},
          {"objective", std::isfinite(r.objective) ? nlohmann::json(r.objective) : nlohmann::json(nullptr)},
          {"violations", vector_json(r.violations)},
          {"aggregate_violation",
           std::isfinite(r.aggregate_violation) ? nlohmann::json(r.aggregate_violation) : nlohmann::json(nullptr)},
          {"feasible", r.feasible},
          {"rho", vector_json(r.rho)},
          {"y", vector_json(r.y)},
          {"delta", r.delta},
          {"step_inf_norm", r.step_inf_norm},
          {"budget", r.budget},
          {"evaluations", r.evaluations},
          {"stalled", r.stalled}};
}

std::uint64_t inner_seed(std::uint64_t seed, int k) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(k + 1));
}

AlmResult minimize_alm(const AlmProblem& problem, const Eigen::VectorXd& theta_tilde0, Eigen::Index n_constraints,
                       const AlmConfig& config, InnerSolver& solver, const AlmRunOptions& options) {
  AlmResult result;
  AlmState state = initial_state(theta_tilde0, n_constraints, config);
  AlmEvaluation current = problem(state.theta_tilde);
  result.total_evaluations = 1;

  bool have_best = false;
  double best_violation = kInf;
  auto consider = [&](const Eigen::VectorXd& x, const AlmEvaluation& e) {
    if (!e.ok) return;
    const double v = positive_part_max(e.constraints);
    const bool feasible = v <= options.feasibility_tolerance;
    bool better = false;
    if (!have_best) {
      better = true;
    } else if (feasible != result.feasible) {
      better = feasible;
    } else if (feasible) {
      better = e.objective < result.evaluation.objective;
    } else {
      better = v < best_violation;
    }
    if (better) {
      have_best = true;
      result.theta_tilde = x;
      result.evaluation = e;
      result.feasible = feasible;
      best_violation = v;
    }
  };
  consider(state.theta_tilde, current);

  Eigen::VectorXd c_prev = current.ok ? current.constraints : Eigen::VectorXd::Constant(n_constraints, kInf);
  for (int k = 0; k < config.outer_iterations; ++k) {
    const int budget = inner_budget_schedule(k, config);
    PrimalResult step = primal_update(state, current, problem, solver, budget, inner_seed(options.seed, k));
    result.total_evaluations += step.evaluations;

    AlmIterationRecord rec;
    rec.k = k;
    rec.delta = state.delta;
    rec.budget = budget;
    rec.evaluations = step.evaluations;
    rec.stalled = step.stalled;
    rec.step_inf_norm = (step.theta_tilde - state.theta_tilde).lpNorm<Eigen::Infinity>();

    state.theta_tilde = step.theta_tilde;
    current = step.evaluation;
    // A stalled step at a feasible point would re-apply the same residual.
    const bool settled = step.stalled && current.ok &&
                         positive_part_max(current.constraints) <= options.feasibility_tolerance;
    if (current.ok && !settled) {
      dual_and_penalty_update(state, current.constraints, c_prev, config);
      c_prev = current.constraints;
    } else {
      state.delta = std::max(config.delta_min, config.gamma * state.delta);
    }
    state.k = k + 1;

    rec.objective = current.ok ? current.objective : kInf;
    rec.violations = current.ok ? current.constraints : Eigen::VectorXd::Constant(n_constraints, kInf);
    rec.aggregate_violation = positive_part_max(rec.violations);
    rec.feasible = current.ok && rec.aggregate_violation <= options.feasibility_tolerance;
    rec.rho = state.rho;
    rec.y = state.y;
    consider(state.theta_tilde, current);
    result.history.push_back(rec);
    if (options.on_iteration) options.on_iteration(rec);
  }
  if (!have_best) throw ConfigurationError("ALM finished without a single successful evaluation");
  result.final_state = state;
  return result;
}

}  // namespace stellbench
