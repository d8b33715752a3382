#ifndef STELLBENCH_ORACLE_HPP
#define STELLBENCH_ORACLE_HPP

// Forward-model contract: a boundary goes in, equilibrium metrics or a typed
// failure come out. Failures are values so optimizers can penalise them.

#include <Eigen/Dense>
#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "stellbench/boundary.hpp"

namespace stellbench {

struct EquilibriumMetrics {
  double aspect_ratio = 0.0;
  double max_elongation = 0.0;
  double average_triangularity = 0.0;
  double iota_edge_over_nfp = 0.0;
  double edge_mirror_ratio = 0.0;
  double qi_residual = 0.0;
  double vacuum_well = 0.0;
  double flux_compression = 0.0;
  double min_normalized_grad_scale_length = 0.0;
  // |B| on (theta_B, phi_B) over one field period, when the backend has it.
  std::optional<Eigen::MatrixXd> boozer_b;

  // Value by wire-protocol key; throws NotFoundError for unknown keys.
  double get(std::string_view key) const;
  double& get(std::string_view key);
};

// Wire-protocol metric keys, in the order of the struct fields.
inline constexpr std::array<std::string_view, 9> kMetricKeys = {
    "aspect_ratio",
    "max_elongation",
    "average_triangularity",
    "edge_rotational_transform_over_n_field_periods",
    "edge_magnetic_mirror_ratio",
    "qi",
    "vacuum_well",
    "flux_compression_in_regions_of_bad_curvature",
    "minimum_normalized_magnetic_gradient_scale_length"};

bool is_metric_key(std::string_view key);

nlohmann::json metrics_to_json(const EquilibriumMetrics& m);
EquilibriumMetrics metrics_from_json(const nlohmann::json& j);

enum class Fidelity { low, high };

enum class OracleErrorKind {
  solver_failed,
  timeout,
  protocol,
  // Replay lookups only; never produced by the wire protocol.
  not_found,
};

std::string_view to_string(Fidelity f);
Fidelity fidelity_from_string(std::string_view s);
std::string_view to_string(OracleErrorKind e);
OracleErrorKind error_kind_from_string(std::string_view s);

struct OracleRequest {
  PlasmaBoundary boundary;
  Fidelity fidelity = Fidelity::high;
};

struct OracleResponse {
  std::optional<EquilibriumMetrics> metrics;
  OracleErrorKind error = OracleErrorKind::solver_failed;
  std::string detail;

  bool ok() const { return metrics.has_value(); }
  static OracleResponse success(EquilibriumMetrics m) { return {std::move(m), {}, {}}; }
  static OracleResponse failure(OracleErrorKind e, std::string detail = {}) {
    return {std::nullopt, e, std::move(detail)};
  }
};

// Newline-delimited JSON messages exchanged with an adapter process.
nlohmann::json encode_request(std::int64_t id, const OracleRequest& request);
// Throws ShapeError / InvalidBoundaryError on malformed input.
std::pair<std::int64_t, OracleRequest> decode_request(const nlohmann::json& j);
nlohmann::json encode_response(std::int64_t id, const OracleResponse& response);
// Throws ShapeError when the message is not a valid response.
std::pair<std::int64_t, OracleResponse> decode_response(const nlohmann::json& j);

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleResponse evaluate(const OracleRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Counts calls; used to audit optimizer budgets.
class CountingOracle final : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner) : inner_(inner) {}
  OracleResponse evaluate(const OracleRequest& request) override {
    ++calls_;
    return inner_.evaluate(request);
  }
  std::string name() const override { return "counting(" + inner_.name() + ")"; }
  std::int64_t calls() const { return calls_.load(); }

 private:
  Oracle& inner_;
  std::atomic<std::int64_t> calls_{0};
};

// Closed-form stand-ins for the equilibrium-only metrics, as functions of
// the boundary coefficients normalised by R_00. Documented in the README:
//
//   h  = R_11 - Z_11                 (rotating-ellipse helicity)
//   t  = R_01 - Z_01                 (axis torsion)
//   s2 = sum over m >= 2 or |n| >= 2 of (m + |n|)^2 (R_mn^2 + Z_mn^2)
//   a2 = sum over |n| in {1, 2} of R_0n^2 + Z_0n^2
//   e2 = R_1,-1^2 + Z_1,-1^2
//
//   iota/N_fp = 0.05 + 0.45 tanh(4 h + 2 t)
//   mirror    = 0.1 + 0.8 tanh(5 a2 + s2)
//   qi        = 1e-5 (1 + 1e3 s2 + 1e2 e2)
//   well      = 0.01 + 0.5 R_20 - 0.5 s2
//   chi       = 0.5 + 2 (R_10 - Z_10)^2 + 0.5 s2
//   L_gradB   = 10 / (1 + 5 s2 + 10 (R_11^2 + Z_11^2))
//
// At zero free coefficients these give the baseline tuple
// (0.05, 0.1, 1e-5, 0.01, 0.5, 10).
struct SyntheticFields {
  double iota_edge_over_nfp;
  double edge_mirror_ratio;
  double qi_residual;
  double vacuum_well;
  double flux_compression;
  double min_normalized_grad_scale_length;
};

SyntheticFields synthetic_fields(const PlasmaBoundary& b);

// Documented bound on |d metric / d coefficient| for boundaries whose free
// coefficients satisfy |c| <= 0.5 R_00 and minor radius >= 0.05 R_00.
inline constexpr double kSyntheticLipschitzBound = 500.0;

// The synthetic backend reports solver_failed when any surface point has
// R below this fraction of R_00.
inline constexpr double kSyntheticMinRadiusFraction = 0.2;

struct SyntheticOracleOptions {
  // Quadrature per fidelity: {n_theta, n_phi}.
  std::array<int, 2> low_resolution{32, 16};
  std::array<int, 2> high_resolution{64, 64};
  bool include_boozer = true;
  int boozer_n_theta = 32;
  int boozer_n_phi = 32;
};

// Geometry from the native routines, equilibrium fields from
// synthetic_fields(). Self-intersecting or degenerate boundaries fail with
// solver_failed.
class SyntheticOracle final : public Oracle {
 public:
  explicit SyntheticOracle(SyntheticOracleOptions options = {}) : options_(options) {}
  OracleResponse evaluate(const OracleRequest& request) override;
  std::string name() const override { return "synthetic"; }

 private:
  SyntheticOracleOptions options_;
};

// Synthetic Boozer |B| consistent with the synthetic mirror ratio and QI:
//   B = 1 - mirror cos(N_fp phi_B) + sqrt(2 qi) cos(theta_B - N_fp phi_B).
Eigen::MatrixXd synthetic_boozer_field(const SyntheticFields& f, int n_theta, int n_phi);

// Lookup of precomputed metrics keyed by canonical_hash().
class ReplayOracle final : public Oracle {
 public:
  ReplayOracle() = default;
  void insert(const PlasmaBoundary& b, EquilibriumMetrics m);
  std::size_t size() const { return table_.size(); }
  OracleResponse evaluate(const OracleRequest& request) override;
  std::string name() const override { return "replay"; }

 private:
  std::unordered_map<std::uint64_t, EquilibriumMetrics> table_;
};

struct SubprocessOracleOptions {
  double timeout_seconds = 600.0;
};

// Talks the wire protocol to a child process started with /bin/sh -c.
// Thread-safe; concurrent callers are serialised.
class SubprocessOracle final : public Oracle {
 public:
  explicit SubprocessOracle(std::string command, SubprocessOracleOptions options = {});
  ~SubprocessOracle() override;
  SubprocessOracle(const SubprocessOracle&) = delete;
  SubprocessOracle& operator=(const SubprocessOracle&) = delete;

  // Throws OracleUnavailableError when the child has exited.
  OracleResponse evaluate(const OracleRequest& request) override;
  std::string name() const override { return "subprocess:" + command_; }

 private:
  bool read_line(std::string& line, double timeout_seconds);
  void shutdown();

  std::string command_;
  SubprocessOracleOptions options_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::int64_t next_id_ = 0;
  bool dead_ = false;
  std::mutex mutex_;
};

// |x_oracle - x_native| / |x_native| < tol for A, eps_max and (absolute,
// since it may vanish) delta-bar.
bool geometry_consistent(const EquilibriumMetrics& m, const PlasmaBoundary& b, double tol = 1e-2);

}  // namespace stellbench

#endif  // STELLBENCH_ORACLE_HPP
