#ifndef STELLBENCH_STELLARATOR_ALM_HPP
#define STELLBENCH_STELLARATOR_ALM_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "stellbench/alm.hpp"
#include "stellbench/omnigenous.hpp"
#include "stellbench/oracle.hpp"
#include "stellbench/problems.hpp"

namespace stellbench {

struct StellaratorAlmOptions {
  // Fidelity of the oracle calls inside the loop.
  Fidelity fidelity = Fidelity::low;
  // Re-score the returned boundary once at high fidelity.
  bool final_high_fidelity = true;
  double preconditioner_base = 0.5;
  bool qi_log_transform = true;
  std::uint64_t seed = 0;
  std::function<void(const AlmIterationRecord&)> on_iteration;
};

struct StellaratorAlmResult {
  PlasmaBoundary boundary;
  EvaluationResult evaluation;
  AlmResult alm;
  std::int64_t oracle_calls = 0;
};

// Rotating ellipse with N_fp = 3 whose aspect ratio sits at the problem's
// aspect bound when it has one.
PlasmaBoundary default_initial_boundary(const ProblemSpec& spec);

// Single-objective problems only; throws ConfigurationError otherwise.
StellaratorAlmResult run_alm(const ProblemSpec& spec, Oracle& oracle, const AlmConfig& config,
                             const PlasmaBoundary& initial, const StellaratorAlmOptions& options = {},
                             InnerSolver* solver = nullptr);

// First objective of `spec`, its constraints plus A <= aspect_target.
ProblemSpec with_aspect_constraint(const ProblemSpec& spec, double aspect_target);

struct ParetoRun {
  double aspect_target = 0.0;
  PlasmaBoundary boundary;
  // Scored against the two-objective problem.
  EvaluationResult evaluation;
};

struct ParetoSweepResult {
  std::vector<ParetoRun> runs;
  // Indices into runs of the non-dominated feasible results.
  std::vector<std::size_t> front;
  double hypervolume = 0.0;
};

// One ALM run per aspect target, seeded from a rotating ellipse at that
// aspect ratio.
ParetoSweepResult pareto_sweep(const ProblemSpec& spec, const std::vector<double>& aspect_targets, Oracle& oracle,
                               const AlmConfig& config, const StellaratorAlmOptions& options = {});

struct CompositeObjectiveTerms {
  double field_mismatch = 0.0;
  double maxima_straightness = 0.0;
  double aspect = 0.0;
  double iota = 0.0;
  double elongation = 0.0;
  double total() const { return field_mismatch + maxima_straightness + aspect + iota + elongation; }
};

// Needs metrics.boozer_b with an even number of phi columns; throws
// UnsupportedConfigurationError when the grid is absent.
CompositeObjectiveTerms composite_objective_terms(const EquilibriumMetrics& metrics,
                                                  const OmnigenousTargetField& target,
                                                  const TargetPropertySet& props);

// +inf when the oracle fails.
double composite_datagen_objective(const PlasmaBoundary& boundary, const OmnigenousTargetField& target,
                                   const TargetPropertySet& props, Oracle& oracle,
                                   Fidelity fidelity = Fidelity::low);

}  // namespace stellbench

#endif  // STELLBENCH_STELLARATOR_ALM_HPP
