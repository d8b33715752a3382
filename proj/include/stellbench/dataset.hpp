#ifndef STELLBENCH_DATASET_HPP
#define STELLBENCH_DATASET_HPP

// Append-only JSONL record store with a sidecar hash index, plus summary
// statistics and regression error metrics.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "stellbench/boundary.hpp"
#include "stellbench/oracle.hpp"

namespace stellbench {

// Generation-method tags accepted in the provenance field.
inline constexpr std::array<std::string_view, 4> kProvenanceTags = {"heuristic", "near_axis", "desc_opt",
                                                                    "vmec_opt"};

struct DatasetRecord {
  PlasmaBoundary boundary;
  // Missing values are NaN.
  EquilibriumMetrics metrics;
  // Finite-beta rows keyed by beta percentage, kept opaque.
  std::map<int, nlohmann::json> beta_metrics;
  std::string provenance;
  // Requested values for metric keys, when the row carries them.
  std::map<std::string, double> targets;
};

// One record per line, keys sorted.
nlohmann::json record_to_json(const DatasetRecord& r);
// Throws ShapeError / InvalidBoundaryError.
DatasetRecord record_from_json(const nlohmann::json& j);

// Source column (dotted path into a row) -> internal field. Internal fields
// are boundary.{n_field_periods,r_cos,z_sin,stellarator_symmetric},
// metrics.<metric key>, targets.<metric key>, beta_metrics, provenance.
struct ColumnMapping {
  std::string version;
  std::map<std::string, std::string> columns;

  static ColumnMapping builtin();
  static ColumnMapping from_json(const nlohmann::json& j);
  static ColumnMapping from_file(const std::string& path);
};

struct DatasetFilters {
  std::optional<int> n_field_periods;
  std::optional<std::string> provenance;

  bool accepts(const DatasetRecord& r) const;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct ImportReport {
  std::size_t rows = 0;
  std::size_t imported = 0;
  std::size_t duplicates = 0;
  std::size_t filtered_out = 0;
  std::vector<RejectedRow> rejected;
  std::map<int, std::size_t> by_field_periods;
};

nlohmann::json import_report_to_json(const ImportReport& r);

// Maps one input row to a record. Throws ImportError naming the missing
// internal fields' source columns.
DatasetRecord map_row(const nlohmann::json& row, const ColumnMapping& mapping);

class DatasetStore {
 public:
  // Opens (creating if needed) a store directory holding records.jsonl and
  // index.json. The index is rebuilt when absent or stale.
  static DatasetStore open(const std::string& directory);

  // Reads a JSONL export. The first data row is schema-checked: missing
  // required columns throw ImportError. Later malformed rows are rejected
  // individually. Records already present (same canonical hash) are skipped.
  ImportReport import_file(const std::string& path, const ColumnMapping& mapping = ColumnMapping::builtin(),
                           const DatasetFilters& filters = {});

  // Adds one record; returns false if its hash is already stored.
  bool append(const DatasetRecord& record);

  std::size_t size() const { return records_.size(); }
  const std::vector<DatasetRecord>& records() const { return records_; }
  std::vector<DatasetRecord> select(const DatasetFilters& filters) const;
  std::optional<DatasetRecord> find(const PlasmaBoundary& boundary) const;
  ReplayOracle replay_oracle(const DatasetFilters& filters = {}) const;
  const std::string& directory() const { return directory_; }

 private:
  void write_index() const;

  std::string directory_;
  std::vector<DatasetRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// Reads a bare JSONL file of store-format records without a store.
std::vector<DatasetRecord> read_records(const std::string& path);

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

struct MetricSummary {
  std::string metric;
  std::size_t count = 0;
  std::size_t missing = 0;
  std::size_t trimmed = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  std::map<double, double> quantiles;
  Histogram histogram;
  // Target-vs-outcome comparison when targets exist for this metric.
  std::optional<std::size_t> paired_count;
  std::optional<double> paired_rmse;
  std::optional<double> paired_r_squared;
};

struct SummaryOptions {
  int bins = 20;
  // Fraction removed from each tail before statistics; 0.0005 is 0.05 %.
  double trim_fraction = 0.0;
  std::vector<double> quantile_levels = {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0};
};

struct DistributionSummary {
  bool empty = true;
  std::size_t records = 0;
  std::vector<MetricSummary> metrics;
};

// Linear-interpolation quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double level);

DistributionSummary summarize(const std::vector<DatasetRecord>& records, const std::vector<std::string>& metric_keys,
                              const SummaryOptions& options = {});
nlohmann::json summary_to_json(const DistributionSummary& s, const SummaryOptions& options);
// summary.json, hist_<metric>.csv and plot_histograms.py.
void write_summary(const DistributionSummary& s, const SummaryOptions& options, const std::string& directory);

struct ErrorStats {
  double rmse = 0.0;
  // Undefined (nullopt) when the truth has zero variance.
  std::optional<double> r_squared;
  // rmse / (max truth - min truth).
  std::optional<double> nrmse;
  // var(truth) / var(prediction - truth).
  std::optional<double> snr;
};

ErrorStats error_stats(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths);
nlohmann::json error_stats_to_json(const ErrorStats& e);

}  // namespace stellbench

#endif  // STELLBENCH_DATASET_HPP
