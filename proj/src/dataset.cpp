#include "stellbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "stellbench/boundary_io.hpp"
#include "stellbench/embedded_data.hpp"
#include "stellbench/errors.hpp"

namespace stellbench {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const nlohmann::json* lookup(const nlohmann::json& row, const std::string& path) {
  if (!row.is_object()) return nullptr;
  if (auto it = row.find(path); it != row.end()) return &*it;
  const nlohmann::json* node = &row;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
    if (dot == std::string::npos) return node;
    start = dot + 1;
  }
  return nullptr;
}

std::vector<std::string> required_fields() {
  std::vector<std::string> out = {"boundary.n_field_periods", "boundary.r_cos", "boundary.z_sin"};
  for (auto k : kMetricKeys) out.push_back("metrics." + std::string(k));
  return out;
}

EquilibriumMetrics metrics_allowing_nulls(const nlohmann::json& j) {
  if (!j.is_object()) throw ShapeError("metrics must be a JSON object");
  nlohmann::json copy = j;
  for (auto k : kMetricKeys) {
    const std::string key(k);
    if (copy.contains(key) && copy[key].is_null()) copy[key] = kNaN;
  }
  return metrics_from_json(copy);
}

void check_provenance(const std::string& p) {
  if (p.empty()) return;
  if (std::find(kProvenanceTags.begin(), kProvenanceTags.end(), p) == kProvenanceTags.end())
    throw ShapeError("unknown provenance tag '" + p + "'");
}

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

nlohmann::json record_to_json(const DatasetRecord& r) {
  nlohmann::json metrics = nlohmann::json::object();
  for (auto k : kMetricKeys) metrics[std::string(k)] = finite_or_null(r.metrics.get(k));
  nlohmann::json j = {{"boundary", boundary_to_json(r.boundary)}, {"metrics", metrics}};
  if (!r.provenance.empty()) j["provenance"] = r.provenance;
  if (!r.beta_metrics.empty()) {
    nlohmann::json beta = nlohmann::json::object();
    for (const auto& [pct, row] : r.beta_metrics) beta[std::to_string(pct)] = row;
    j["beta_metrics"] = beta;
  }
  if (!r.targets.empty()) j["targets"] = r.targets;
  return j;
}

DatasetRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ShapeError("record must be a JSON object");
  DatasetRecord r;
  r.boundary = boundary_from_json(j.at("boundary"));
  r.metrics = metrics_allowing_nulls(j.at("metrics"));
  r.provenance = j.value("provenance", std::string{});
  check_provenance(r.provenance);
  if (j.contains("beta_metrics")) {
    for (const auto& [pct, row] : j.at("beta_metrics").items()) {
      int level = 0;
      try {
        level = std::stoi(pct);
      } catch (const std::exception&) {
        throw ShapeError("beta level '" + pct + "' is not an integer");
      }
      if (level < 1 || level > 5) throw ShapeError("beta level must be in 1..5");
      r.beta_metrics[level] = row;
    }
  }
  if (j.contains("targets")) {
    for (const auto& [key, value] : j.at("targets").items()) {
      if (!is_metric_key(key)) throw ShapeError("unknown target metric '" + key + "'");
      r.targets[key] = value.is_null() ? kNaN : value.get<double>();
    }
  }
  if (r.boundary.n_field_periods < 1 || r.boundary.n_field_periods > 5)
    throw InvalidBoundaryError("n_field_periods must be in 1..5");
  return r;
}

ColumnMapping ColumnMapping::builtin() {
  static const ColumnMapping mapping = from_json(nlohmann::json::parse(embedded::kColumnMappingJson));
  return mapping;
}

ColumnMapping ColumnMapping::from_json(const nlohmann::json& j) {
  ColumnMapping m;
  try {
    m.version = j.value("version", std::string("unversioned"));
    for (const auto& [source, target] : j.at("columns").items()) m.columns[source] = target.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("malformed column mapping: ") + e.what());
  }
  return m;
}

ColumnMapping ColumnMapping::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open column mapping " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigurationError("column mapping " + path + " is not JSON: " + e.what());
  }
}

bool DatasetFilters::accepts(const DatasetRecord& r) const {
  if (n_field_periods && r.boundary.n_field_periods != *n_field_periods) return false;
  if (provenance && r.provenance != *provenance) return false;
  return true;
}

nlohmann::json import_report_to_json(const ImportReport& r) {
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& row : r.rejected) rejected.push_back({{"line", row.line}, {"reason", row.reason}});
  nlohmann::json by_nfp = nlohmann::json::object();
  for (const auto& [nfp, count] : r.by_field_periods) by_nfp[std::to_string(nfp)] = count;
  return {{"rows", r.rows},
          {"imported", r.imported},
          {"duplicates", r.duplicates},
          {"filtered_out", r.filtered_out},
          {"rejected", rejected},
          {"by_field_periods", by_nfp}};
}

DatasetRecord map_row(const nlohmann::json& row, const ColumnMapping& mapping) {
  if (!row.is_object()) throw ShapeError("row is not a JSON object");
  nlohmann::json internal = nlohmann::json::object();
  for (const auto& [source, target] : mapping.columns) {
    const nlohmann::json* v = lookup(row, source);
    if (!v) continue;
    const auto dot = target.find('.');
    if (dot == std::string::npos) {
      if (!internal.contains(target)) internal[target] = *v;
      continue;
    }
    auto& group = internal[target.substr(0, dot)];
    const std::string leaf = target.substr(dot + 1);
    if (!group.contains(leaf)) group[leaf] = *v;
  }
  std::vector<std::string> missing;
  for (const auto& field : required_fields()) {
    if (lookup(internal, field)) continue;
    std::string source = field;
    for (const auto& [s, t] : mapping.columns)
      if (t == field) {
        source = s;
        break;
      }
    missing.push_back(source);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ImportError("missing columns: " + list, missing);
  }
  auto& b = internal["boundary"];
  if (!b.contains("stellarator_symmetric") || b["stellarator_symmetric"].is_null()) b["stellarator_symmetric"] = true;
  if (internal.contains("provenance") && internal["provenance"].is_null()) internal.erase("provenance");
  return record_from_json(internal);
}

DatasetStore DatasetStore::open(const std::string& directory) {
  DatasetStore s;
  s.directory_ = directory;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw NotFoundError("cannot create store directory " + directory + ": " + ec.message());
  const fs::path records = fs::path(directory) / "records.jsonl";
  if (fs::exists(records)) {
    std::ifstream in(records);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        DatasetRecord r = record_from_json(nlohmann::json::parse(line));
        s.index_.emplace(canonical_hash(r.boundary), s.records_.size());
        s.records_.push_back(std::move(r));
      } catch (const std::exception& e) {
        throw ShapeError("corrupt store line " + std::to_string(n) + ": " + e.what());
      }
    }
  }
  const fs::path index = fs::path(directory) / "index.json";
  bool fresh = false;
  if (fs::exists(index)) {
    try {
      std::ifstream in(index);
      const auto j = nlohmann::json::parse(in);
      fresh = j.at("count").get<std::size_t>() == s.records_.size() && j.at("entries").size() == s.index_.size();
    } catch (const std::exception&) {
      fresh = false;
    }
  }
  if (!fresh) s.write_index();
  return s;
}

void DatasetStore::write_index() const {
  nlohmann::json entries = nlohmann::json::object();
  for (const auto& [hash, pos] : index_) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    entries[buf] = pos;
  }
  const fs::path tmp = fs::path(directory_) / "index.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw NotFoundError("cannot write index in " + directory_);
    out << nlohmann::json{{"version", 1}, {"count", records_.size()}, {"entries", entries}}.dump() << "\n";
  }
  fs::rename(tmp, fs::path(directory_) / "index.json");
}

bool DatasetStore::append(const DatasetRecord& record) {
  const std::uint64_t h = canonical_hash(record.boundary);
  if (index_.count(h)) return false;
  std::ofstream out(fs::path(directory_) / "records.jsonl", std::ios::app);
  if (!out) throw NotFoundError("cannot append to store in " + directory_);
  out << record_to_json(record).dump() << "\n";
  index_.emplace(h, records_.size());
  records_.push_back(record);
  return true;
}

ImportReport DatasetStore::import_file(const std::string& path, const ColumnMapping& mapping,
                                       const DatasetFilters& filters) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open dataset " + path);
  ImportReport report;
  std::string line;
  std::size_t line_no = 0;
  bool schema_checked = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++report.rows;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      report.rejected.push_back({line_no, std::string("not JSON: ") + e.what()});
      continue;
    }
    DatasetRecord record;
    try {
      record = map_row(row, mapping);
    } catch (const ImportError& e) {
      if (!schema_checked) {
        write_index();
        throw;
      }
      report.rejected.push_back({line_no, e.what()});
      continue;
    } catch (const Error& e) {
      schema_checked = true;
      report.rejected.push_back({line_no, e.what()});
      continue;
    } catch (const nlohmann::json::exception& e) {
      schema_checked = true;
      report.rejected.push_back({line_no, e.what()});
      continue;
    }
    schema_checked = true;
    if (!filters.accepts(record)) {
      ++report.filtered_out;
      continue;
    }
    if (!append(record)) {
      ++report.duplicates;
      continue;
    }
    ++report.imported;
    ++report.by_field_periods[record.boundary.n_field_periods];
  }
  write_index();
  return report;
}

std::vector<DatasetRecord> DatasetStore::select(const DatasetFilters& filters) const {
  std::vector<DatasetRecord> out;
  for (const auto& r : records_)
    if (filters.accepts(r)) out.push_back(r);
  return out;
}

std::optional<DatasetRecord> DatasetStore::find(const PlasmaBoundary& boundary) const {
  const auto it = index_.find(canonical_hash(boundary));
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

ReplayOracle DatasetStore::replay_oracle(const DatasetFilters& filters) const {
  ReplayOracle oracle;
  for (const auto& r : records_)
    if (filters.accepts(r)) oracle.insert(r.boundary, r.metrics);
  return oracle;
}

std::vector<DatasetRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ShapeError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) throw ShapeError("quantile of empty data");
  if (!(level >= 0.0 && level <= 1.0)) throw DomainError("quantile level must be in [0, 1]");
  const double pos = level * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DistributionSummary summarize(const std::vector<DatasetRecord>& records, const std::vector<std::string>& metric_keys,
                              const SummaryOptions& options) {
  if (options.bins < 1) throw DomainError("histogram needs at least one bin");
  if (!(options.trim_fraction >= 0.0 && options.trim_fraction < 0.5)) throw DomainError("trim fraction must be in [0, 0.5)");
  DistributionSummary s;
  s.records = records.size();
  s.empty = records.empty();
  if (s.empty) return s;
  for (const auto& key : metric_keys) {
    if (!is_metric_key(key)) throw NotFoundError("unknown metric '" + key + "'");
    MetricSummary m;
    m.metric = key;
    std::vector<double> v;
    for (const auto& r : records) {
      const double x = r.metrics.get(key);
      if (std::isfinite(x)) {
        v.push_back(x);
      } else {
        ++m.missing;
      }
    }
    std::sort(v.begin(), v.end());
    const auto cut = static_cast<std::size_t>(std::floor(options.trim_fraction * double(v.size())));
    if (cut > 0) {
      v = std::vector<double>(v.begin() + std::ptrdiff_t(cut), v.end() - std::ptrdiff_t(cut));
      m.trimmed = 2 * cut;
    }
    m.count = v.size();
    if (!v.empty()) {
      m.min = v.front();
      m.max = v.back();
      double sum = 0.0;
      for (double x : v) sum += x;
      m.mean = sum / double(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m.mean) * (x - m.mean);
      m.stddev = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
      for (double q : options.quantile_levels) m.quantiles[q] = quantile_sorted(v, q);
      const int bins = m.max > m.min ? options.bins : 1;
      const double width = (m.max - m.min) / bins;
      for (int b = 0; b <= bins; ++b) m.histogram.edges.push_back(b == bins ? m.max : m.min + b * width);
      m.histogram.counts.assign(std::size_t(bins), 0);
      for (double x : v) {
        int b = width > 0.0 ? static_cast<int>((x - m.min) / width) : 0;
        ++m.histogram.counts[std::size_t(std::clamp(b, 0, bins - 1))];
      }
    }
    std::vector<double> outcome, target;
    for (const auto& r : records) {
      const auto it = r.targets.find(key);
      if (it == r.targets.end()) continue;
      const double x = r.metrics.get(key);
      if (std::isfinite(x) && std::isfinite(it->second)) {
        outcome.push_back(x);
        target.push_back(it->second);
      }
    }
    if (!outcome.empty()) {
      const ErrorStats e = error_stats(Eigen::Map<Eigen::VectorXd>(outcome.data(), Eigen::Index(outcome.size())),
                                       Eigen::Map<Eigen::VectorXd>(target.data(), Eigen::Index(target.size())));
      m.paired_count = outcome.size();
      m.paired_rmse = e.rmse;
      m.paired_r_squared = e.r_squared;
    }
    s.metrics.push_back(std::move(m));
  }
  return s;
}

nlohmann::json summary_to_json(const DistributionSummary& s, const SummaryOptions& options) {
  if (s.empty) return {{"empty", true}, {"records", 0}};
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& m : s.metrics) {
    nlohmann::json q = nlohmann::json::object();
    for (const auto& [level, value] : m.quantiles) {
      std::ostringstream key;
      key << level;
      q[key.str()] = value;
    }
    nlohmann::json j = {{"count", m.count},       {"missing", m.missing}, {"trimmed", m.trimmed},
                        {"min", m.min},           {"max", m.max},         {"mean", m.mean},
                        {"stddev", m.stddev},     {"quantiles", q},
                        {"histogram", {{"edges", m.histogram.edges}, {"counts", m.histogram.counts}}}};
    if (m.paired_count) {
      j["target_vs_outcome"] = {{"count", *m.paired_count},
                                {"rmse", *m.paired_rmse},
                                {"r_squared", m.paired_r_squared ? nlohmann::json(*m.paired_r_squared) : nullptr}};
    }
    metrics[m.metric] = j;
  }
  return {{"empty", false},
          {"records", s.records},
          {"trim_fraction", options.trim_fraction},
          {"bins", options.bins},
          {"metrics", metrics}};
}

void write_summary(const DistributionSummary& s, const SummaryOptions& options, const std::string& directory) {
  fs::create_directories(directory);
  {
    std::ofstream out(fs::path(directory) / "summary.json");
    out << summary_to_json(s, options).dump(2) << "\n";
  }
  for (const auto& m : s.metrics) {
    std::ofstream out(fs::path(directory) / ("hist_" + m.metric + ".csv"));
    out.precision(17);
    out << "left,right,count\n";
    for (std::size_t b = 0; b < m.histogram.counts.size(); ++b)
      out << m.histogram.edges[b] << "," << m.histogram.edges[b + 1] << "," << m.histogram.counts[b] << "\n";
  }
  std::ofstream py(fs::path(directory) / "plot_histograms.py");
  py << R"(#!/usr/bin/env python3
"""Render hist_*.csv files in this directory to PNG."""
import csv
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
for path in sorted(glob.glob(os.path.join(here, "hist_*.csv"))):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    left = [float(r["left"]) for r in rows]
    right = [float(r["right"]) for r in rows]
    counts = [int(r["count"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(left, counts, width=[r - l for l, r in zip(left, right)], align="edge")
    name = os.path.basename(path)[len("hist_"):-len(".csv")]
    ax.set_xlabel(name)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path[:-4] + ".png", dpi=120)
    plt.close(fig)
)";
}

ErrorStats error_stats(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths) {
  if (predictions.size() != truths.size()) throw ShapeError("predictions and truths differ in length");
  if (truths.size() == 0) throw ShapeError("error statistics of empty vectors");
  const double n = double(truths.size());
  const Eigen::VectorXd residual = predictions - truths;
  ErrorStats e;
  e.rmse = std::sqrt(residual.squaredNorm() / n);
  const double truth_mean = truths.mean();
  const double ss_tot = (truths.array() - truth_mean).square().sum();
  if (ss_tot > 0.0) {
    e.r_squared = 1.0 - residual.squaredNorm() / ss_tot;
    e.nrmse = e.rmse / (truths.maxCoeff() - truths.minCoeff());
    const double var_truth = ss_tot / n;
    const double var_residual = (residual.array() - residual.mean()).square().sum() / n;
    e.snr = var_residual > 0.0 ? var_truth / var_residual : std::numeric_limits<double>::infinity();
  }
  return e;
}

nlohmann::json error_stats_to_json(const ErrorStats& e) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    if (v && std::isfinite(*v)) return *v;
    if (v) return "inf";
    return "undefined";
  };
  return {{"rmse", e.rmse}, {"r_squared", opt(e.r_squared)}, {"nrmse", opt(e.nrmse)}, {"snr", opt(e.snr)}};
}

}  // namespace stellbench
