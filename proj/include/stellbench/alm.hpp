#ifndef STELLBENCH_ALM_HPP
#define STELLBENCH_ALM_HPP

// Proximal augmented Lagrangian with a box trust region around the iterate,
// in preconditioned coordinates theta_tilde = theta / lambda.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stellbench/boundary.hpp"

namespace stellbench {

struct AlmConfig {
  double rho0 = 10.0;
  double rho_max = 1e9;
  double y0 = 0.0;
  double delta0 = 0.5;
  double gamma = 0.9;
  double delta_min = 0.05;
  double tau = 0.8;
  double sigma = 5.0;
  int outer_iterations = 30;
  int budget_base = 1500;
  int budget_slope = 260;
  int budget_cap = 20000;

  // Throws ConfigurationError.
  void validate() const;

  // Defaults from the problem-constants file.
  static AlmConfig for_problem(std::string_view problem);
};

// Unknown keys throw ConfigurationError; missing keys keep `base` values.
AlmConfig alm_config_from_json(const nlohmann::json& j, AlmConfig base = {});
nlohmann::json alm_config_to_json(const AlmConfig& c);

// min(cap, base + k * slope).
int inner_budget_schedule(int k, const AlmConfig& config);

struct Preconditioner {
  Eigen::VectorXd lambda;
  bool qi_log_transform = true;

  static Preconditioner identity(Eigen::Index n);
  // lambda_j = base^(m_j + |n_j|) over free_modes(layout).
  static Preconditioner exponential(const BoundaryLayout& layout, double base = 0.5);

  Eigen::VectorXd precondition(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd unprecondition(const Eigen::VectorXd& theta_tilde) const;
};

// f + 1/2 sum_i (max(0, y_i + rho_i c_i)^2 - y_i^2) / rho_i.
double augmented_lagrangian(double f, const Eigen::VectorXd& c, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& rho);

struct AlmEvaluation {
  double objective = 0.0;
  Eigen::VectorXd constraints;
  bool ok = false;
};

// Objective and normalised constraints at a preconditioned point.
using AlmProblem = std::function<AlmEvaluation(const Eigen::VectorXd& theta_tilde)>;

struct InnerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
};

// Derivative-free minimiser over the box |x - center|_inf <= radius.
// Implementations must use exactly `budget` evaluations, never return a point
// outside the box, and return `center` unless something strictly better than
// `center_value` was found.
class InnerSolver {
 public:
  virtual ~InnerSolver() = default;
  virtual InnerResult minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& center, double center_value, double radius,
                               int budget, std::uint64_t seed) = 0;
  virtual std::string name() const = 0;
};

// Separable CMA-style evolution strategy: weighted recombination, diagonal
// covariance, cumulative step-size control, projection onto the box, restart
// on collapse. Failed evaluations (non-finite values) rank last.
class DiagonalEvolutionStrategy final : public InnerSolver {
 public:
  struct Options {
    int population = 0;            // 0: 4 + floor(3 ln n)
    double initial_step = 0.3;     // fraction of the radius
    double restart_tolerance = 1e-12;
  };
  DiagonalEvolutionStrategy() = default;
  explicit DiagonalEvolutionStrategy(Options options) : options_(options) {}
  InnerResult minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                       const Eigen::VectorXd& center, double center_value, double radius, int budget,
                       std::uint64_t seed) override;
  std::string name() const override { return "diagonal-es"; }

 private:
  Options options_;
};

struct AlmState {
  Eigen::VectorXd theta_tilde;
  Eigen::VectorXd y;
  Eigen::VectorXd rho;
  double delta = 0.0;
  int k = 0;
};

AlmState initial_state(const Eigen::VectorXd& theta_tilde0, Eigen::Index n_constraints,
                       const AlmConfig& config);

struct PrimalResult {
  Eigen::VectorXd theta_tilde;
  AlmEvaluation evaluation;
  double value = 0.0;
  int evaluations = 0;
  // No evaluation improved on the incumbent.
  bool stalled = true;
};

// One inner solve of the augmented Lagrangian over the trust box.
// `incumbent` is the cached evaluation of state.theta_tilde.
PrimalResult primal_update(const AlmState& state, const AlmEvaluation& incumbent, const AlmProblem& problem,
                           InnerSolver& solver, int budget, std::uint64_t seed);

// y <- max(0, y + rho c_new); rho_i grows by sigma (capped) unless
// max(0, c_new_i) <= tau max(0, c_prev_i); delta <- max(delta_min, gamma delta).
void dual_and_penalty_update(AlmState& state, const Eigen::VectorXd& c_new, const Eigen::VectorXd& c_prev,
                             const AlmConfig& config);

struct AlmIterationRecord {
  int k = 0;
  double objective = 0.0;
  Eigen::VectorXd violations;
  double aggregate_violation = 0.0;
  bool feasible = false;
  Eigen::VectorXd rho;
  Eigen::VectorXd y;
  // Radius used for this iteration's primal step.
  double delta = 0.0;
  double step_inf_norm = 0.0;
  int budget = 0;
  int evaluations = 0;
  bool stalled = false;
};

nlohmann::json trace_record_to_json(const AlmIterationRecord& r);

struct AlmResult {
  Eigen::VectorXd theta_tilde;
  AlmEvaluation evaluation;
  bool feasible = false;
  AlmState final_state;
  std::vector<AlmIterationRecord> history;
  int total_evaluations = 0;
};

struct AlmRunOptions {
  // Iterates with max(0, max_i c_i) <= this count as feasible.
  double feasibility_tolerance = 0.0;
  std::uint64_t seed = 0;
  std::function<void(const AlmIterationRecord&)> on_iteration;
};

// Seed of the inner solve at outer iteration k.
std::uint64_t inner_seed(std::uint64_t seed, int k);

// Runs `config.outer_iterations` outer iterations. One evaluation of the
// starting point, then exactly inner_budget_schedule(k) per iteration.
// Stalled steps at feasible iterates only shrink the trust radius.
// Returns the best feasible iterate, else the least violating one. Throws
// ConfigurationError if no evaluation succeeded.
AlmResult minimize_alm(const AlmProblem& problem, const Eigen::VectorXd& theta_tilde0,
                       Eigen::Index n_constraints, const AlmConfig& config, InnerSolver& solver,
                       const AlmRunOptions& options = {});

}  // namespace stellbench

#endif  // STELLBENCH_ALM_HPP
