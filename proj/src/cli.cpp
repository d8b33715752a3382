#include "stellbench/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "stellbench/boundary_io.hpp"
#include "stellbench/dataset.hpp"
#include "stellbench/errors.hpp"
#include "stellbench/genmodel.hpp"
#include "stellbench/geometry.hpp"
#include "stellbench/omnigenous.hpp"
#include "stellbench/problems.hpp"
#include "stellbench/stellarator_alm.hpp"

namespace stellbench {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw NotFoundError("cannot write " + path);
    out << text;
    if (!out) throw NotFoundError("failed writing " + path);
  }
  fs::rename(tmp, p);
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ShapeError(path + " is not valid JSON: " + e.what());
  }
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DomainError("'" + item + "' is not a number");
    }
  }
  return out;
}

std::vector<std::string> parse_word_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct BoundaryLine {
  std::size_t line = 0;
  std::optional<PlasmaBoundary> boundary;
  std::string error;
};

std::vector<BoundaryLine> read_boundary_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path);
  std::vector<BoundaryLine> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    BoundaryLine entry;
    entry.line = n;
    try {
      const auto j = nlohmann::json::parse(line);
      entry.boundary = boundary_from_json(j.contains("boundary") ? j.at("boundary") : j);
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<DatasetRecord> load_records(const std::string& path) {
  if (fs::is_directory(path)) return DatasetStore::open(path).records();
  return read_records(path);
}

nlohmann::json problem_header(const ProblemSpec& spec) {
  nlohmann::json constraints = nlohmann::json::array();
  for (const auto& c : spec.constraints) constraints.push_back(constraint_to_json(c));
  nlohmann::json objectives = nlohmann::json::array();
  for (const auto& o : spec.objectives) objectives.push_back({{"metric", o.metric}, {"sign", o.sign}});
  nlohmann::json j = {{"name", spec.name},
                      {"constants_version", std::string(problem_constants_version())},
                      {"objectives", objectives},
                      {"constraints", constraints},
                      {"epsilon", spec.epsilon}};
  if (spec.hv_reference) j["hv_reference"] = *spec.hv_reference;
  else j["score_anchors"] = spec.score_anchors;
  return j;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string boundary;
  std::string oracle;
  std::string fidelity = "high";
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  const PlasmaBoundary b = read_boundary_file(a.boundary);
  auto oracle = make_oracle(a.oracle);
  const OracleResponse r = oracle->evaluate({b, fidelity_from_string(a.fidelity)});
  nlohmann::json j = {{"boundary_hash", canonical_hash_hex(b)}, {"oracle", oracle->name()}, {"ok", r.ok()}};
  try {
    j["native_geometry"] = {{"aspect_ratio", aspect_ratio(b)},
                            {"max_elongation", max_elongation(b)},
                            {"average_triangularity", average_triangularity(b)}};
  } catch (const Error& e) {
    j["native_geometry"] = {{"error", e.what()}};
  }
  if (r.ok()) {
    j["metrics"] = metrics_to_json(*r.metrics);
    j["metrics"].erase("boozer_b");
    j["geometry_consistent"] = geometry_consistent(*r.metrics, b);
  } else {
    j["error"] = std::string(to_string(r.error));
    if (!r.detail.empty()) j["detail"] = r.detail;
  }
  if (a.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(a.out, j);
  }
  return r.ok() ? kExitSuccess : kExitDomainError;
}

// ------------------------------------------------------------------- score

struct ScoreArgs {
  std::string problem;
  std::string boundaries;
  std::string oracle;
  std::string out;
};

int run_score(const ScoreArgs& a) {
  const ProblemSpec spec = builtin_problem(a.problem);
  const auto lines = read_boundary_lines(a.boundaries);
  auto oracle = make_oracle(a.oracle);
  nlohmann::json report = {{"problem", problem_header(spec)},
                           {"oracle", oracle->name()},
                           {"boundaries", lines.size()},
                           {"results", nlohmann::json::array()},
                           {"complete", false}};
  std::vector<EvaluationResult> evaluations;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& entry = lines[i];
    EvaluationResult r;
    nlohmann::json item = {{"index", i}, {"line", entry.line}};
    if (!entry.boundary) {
      r = failed_result(OracleErrorKind::protocol, "invalid boundary: " + entry.error, spec);
    } else {
      item["hash"] = canonical_hash_hex(*entry.boundary);
      try {
        r = evaluate_boundary(*entry.boundary, spec, *oracle);
      } catch (const OracleUnavailableError& e) {
        report["error"] = std::string("oracle unavailable: ") + e.what();
        report["evaluated"] = evaluations.size();
        write_json(a.out, report);
        std::cerr << "error: oracle unavailable after " << evaluations.size() << " of " << lines.size()
                  << " boundaries: " << e.what() << "\npartial report written to " << a.out << "\n";
        return kExitDomainError;
      }
    }
    item["evaluation"] = evaluation_to_json(r, spec);
    report["results"].push_back(item);
    evaluations.push_back(r);
    report["evaluated"] = evaluations.size();
    write_json(a.out, report);
  }
  std::size_t feasible = 0;
  for (const auto& r : evaluations) feasible += r.feasible ? 1 : 0;
  report["feasible_count"] = feasible;
  if (spec.multi_objective()) {
    std::vector<Point2> points;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < evaluations.size(); ++i) {
      const auto& r = evaluations[i];
      if (r.failed || !r.feasible) continue;
      points.push_back({r.objectives[0], r.objectives[1]});
      owner.push_back(i);
    }
    nlohmann::json front = nlohmann::json::array();
    for (std::size_t k : pareto_front_indices(points)) front.push_back(owner[k]);
    report["pareto_set"] = front;
    report["hypervolume"] = score_multi_objective(evaluations, spec);
  } else {
    double best = 0.0;
    nlohmann::json best_index = nullptr;
    for (std::size_t i = 0; i < evaluations.size(); ++i) {
      if (evaluations[i].feasible && (best_index.is_null() || evaluations[i].score > best)) {
        best = evaluations[i].score;
        best_index = i;
      }
    }
    report["best_score"] = best;
    report["best_index"] = best_index;
  }
  report["complete"] = true;
  write_json(a.out, report);
  std::cout << "scored " << evaluations.size() << " boundaries (" << feasible << " feasible) -> " << a.out << "\n";
  return kExitSuccess;
}

// ---------------------------------------------------------------- optimize

struct OptimizeArgs {
  std::string problem;
  std::string oracle;
  std::uint64_t seed = 0;
  int outer = -1;
  std::string config;
  std::string trace;
  std::string init;
  std::string out;
  std::string fidelity = "low";
  double aspect_target = 0.0;
};

AlmConfig load_alm_config(const std::string& problem, const std::string& path, int outer) {
  AlmConfig c = AlmConfig::for_problem(problem);
  if (!path.empty()) c = alm_config_from_json(read_json_file(path), c);
  if (outer >= 0) c.outer_iterations = outer;
  c.validate();
  return c;
}

int run_optimize(const OptimizeArgs& a) {
  ProblemSpec spec = builtin_problem(a.problem);
  if (spec.multi_objective()) {
    if (!(a.aspect_target > 0.0))
      throw ConfigurationError("two-objective problem: pass --aspect-target or use the pareto command");
    spec = with_aspect_constraint(spec, a.aspect_target);
  }
  const AlmConfig config = load_alm_config(a.problem, a.config, a.outer);
  const PlasmaBoundary init = a.init.empty() ? default_initial_boundary(spec) : read_boundary_file(a.init);
  auto oracle = make_oracle(a.oracle);

  std::ofstream trace;
  if (!a.trace.empty()) {
    const fs::path p(a.trace);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    trace.open(a.trace, std::ios::trunc);
    if (!trace) throw NotFoundError("cannot write " + a.trace);
  }
  StellaratorAlmOptions options;
  options.seed = a.seed;
  options.fidelity = fidelity_from_string(a.fidelity);
  options.on_iteration = [&](const AlmIterationRecord& r) {
    if (trace.is_open()) trace << trace_record_to_json(r).dump() << std::endl;
    std::cerr << "k=" << r.k << " objective=" << r.objective << " violation=" << r.aggregate_violation
              << " delta=" << r.delta << "\n";
  };
  const StellaratorAlmResult r = run_alm(spec, *oracle, config, init, options);
  nlohmann::json constraint_names = nlohmann::json::array();
  for (const auto& c : spec.constraints) constraint_names.push_back(c.metric);
  const nlohmann::json result = {{"problem", problem_header(spec)},
                                 {"seed", a.seed},
                                 {"config", alm_config_to_json(config)},
                                 {"oracle", oracle->name()},
                                 {"oracle_calls", r.oracle_calls},
                                 {"boundary", boundary_to_json(r.boundary)},
                                 {"evaluation", evaluation_to_json(r.evaluation, spec)},
                                 {"feasible", r.evaluation.feasible},
                                 {"score", r.evaluation.score}};
  if (a.out.empty()) {
    std::cout << result.dump(2) << "\n";
  } else {
    write_json(a.out, result);
    std::cout << "feasible=" << (r.evaluation.feasible ? "true" : "false") << " score=" << r.evaluation.score
              << " aggregate_violation=" << r.evaluation.aggregate_violation << " -> " << a.out << "\n";
  }
  return kExitSuccess;
}

// ------------------------------------------------------------------ pareto

struct ParetoArgs {
  std::string oracle;
  std::string aspect_targets = "6,8,10,12";
  std::uint64_t seed = 0;
  int outer = -1;
  std::string config;
  std::string out;
  std::string fidelity = "low";
};

int run_pareto(const ParetoArgs& a) {
  const ProblemSpec spec = builtin_problem("mhd_stable_qi");
  const AlmConfig config = load_alm_config("mhd_stable_qi", a.config, a.outer);
  auto oracle = make_oracle(a.oracle);
  StellaratorAlmOptions options;
  options.seed = a.seed;
  options.fidelity = fidelity_from_string(a.fidelity);
  const auto targets = parse_number_list(a.aspect_targets);
  const ParetoSweepResult sweep = pareto_sweep(spec, targets, *oracle, config, options);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : sweep.runs) {
    runs.push_back({{"aspect_target", run.aspect_target},
                    {"boundary", boundary_to_json(run.boundary)},
                    {"evaluation", evaluation_to_json(run.evaluation, spec)}});
  }
  const nlohmann::json report = {{"problem", problem_header(spec)},
                                 {"seed", a.seed},
                                 {"config", alm_config_to_json(config)},
                                 {"runs", runs},
                                 {"pareto_set", sweep.front},
                                 {"hypervolume", sweep.hypervolume}};
  if (a.out.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_json(a.out, report);
    std::cout << "front size " << sweep.front.size() << ", hypervolume " << sweep.hypervolume << " -> " << a.out
              << "\n";
  }
  return kExitSuccess;
}

// ---------------------------------------------------------- sample-targets

struct SampleTargetsArgs {
  int count = 1;
  std::uint64_t seed = 0;
  std::string out;
  int knots = 8;
  double morph_scale = 0.1;
  int l_max = 0;
  int m_max = 2;
  int n_max = 2;
};

int run_sample_targets(const SampleTargetsArgs& a) {
  if (a.count < 0) throw DomainError("--count must be >= 0");
  fs::create_directories(a.out);
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t s = mix(a.seed * 1000003ULL + std::uint64_t(i));
    const TargetPropertySet props = sample_target_properties(s);
    OmnigenousTargetField field;
    field.n_field_periods = props.n_fp;
    field.well = sample_well(props.beta_alpha, props.beta_beta, props.mirror_delta, a.knots, mix(s + 1));
    field.x_lmn = sample_morphing_coefficients(a.l_max, a.m_max, a.n_max, a.morph_scale, mix(s + 2));
    char name[32];
    std::snprintf(name, sizeof name, "target_%05d.json", i);
    write_json((fs::path(a.out) / name).string(),
               {{"index", i}, {"seed", s}, {"properties", target_properties_to_json(props)},
                {"field", target_field_to_json(field)}});
  }
  std::cout << "wrote " << a.count << " targets to " << a.out << "\n";
  return kExitSuccess;
}

// ---------------------------------------------------------------- genmodel

struct GenFitArgs {
  std::string dataset;
  std::string problem;
  std::string relax = "default";
  std::string out;
  std::uint64_t seed = 0;
  int trees = 200;
  int latent_dim = 0;
  double variance = 0.95;
  int classifiers = 1;
  int nfp = 0;
};

std::vector<double> resolve_relax(const ProblemSpec& spec, const std::string& text) {
  if (text == "default") {
    if (spec.relax_factors.empty()) return std::vector<double>(spec.constraints.size(), 0.0);
    return spec.relax_factors;
  }
  if (text == "none") return std::vector<double>(spec.constraints.size(), 0.0);
  auto f = parse_number_list(text);
  if (f.size() == 1) f.assign(spec.constraints.size(), f[0]);
  return f;
}

int run_genmodel_fit(const GenFitArgs& a) {
  const ProblemSpec base = builtin_problem(a.problem);
  const auto factors = resolve_relax(base, a.relax);
  const ProblemSpec labelled = relaxed_problem(base, factors);
  std::vector<DatasetRecord> records = load_records(a.dataset);
  if (a.nfp > 0) {
    std::vector<DatasetRecord> kept;
    for (auto& r : records)
      if (r.boundary.n_field_periods == a.nfp) kept.push_back(std::move(r));
    records = std::move(kept);
  }
  if (records.empty()) throw DomainError("no training records");
  std::map<int, int> nfp_counts;
  for (const auto& r : records) ++nfp_counts[r.boundary.n_field_periods];
  int nfp = records.front().boundary.n_field_periods;
  for (const auto& [k, c] : nfp_counts)
    if (c > nfp_counts[nfp]) nfp = k;
  const BoundaryLayout layout{nfp, 4, 4, true};
  Eigen::MatrixXd x(Eigen::Index(records.size()), Eigen::Index(free_parameter_count(layout)));
  std::vector<int> labels;
  for (std::size_t i = 0; i < records.size(); ++i) {
    PlasmaBoundary b = resize_modes(records[i].boundary, 4, 4);
    b.n_field_periods = nfp;
    x.row(Eigen::Index(i)) = flatten(b).transpose() / records[i].boundary.major_radius();
    labels.push_back(evaluate_metrics(records[i].metrics, labelled).feasible ? 1 : 0);
  }
  GenModelOptions options;
  options.forest.n_trees = a.trees;
  options.latent_dim = a.latent_dim;
  options.variance_threshold = a.variance;
  options.n_classifiers = a.classifiers;
  GenerativeModel model = fit_generative_model(x, labels, layout, 1.0, options, a.seed);
  model.metadata["problem"] = base.name;
  model.metadata["relax_factors"] = factors;
  model.metadata["constants_version"] = std::string(problem_constants_version());
  save_model(model, a.out);
  std::cout << "trained on " << records.size() << " records (" << model.metadata["n_feasible"].get<long long>()
            << " feasible under relaxed " << base.name << "), latent d=" << model.latent.dim() << ", "
            << model.prior.components() << " mixture components -> " << a.out << "\n";
  return kExitSuccess;
}

struct GenSampleArgs {
  std::string model;
  int count = 10;
  double confidence = 0.99;
  std::uint64_t seed = 0;
  std::string validate_oracle;
  std::string out;
  std::string trace;
  int thin = 10;
  long long max_steps = 200000;
};

int run_genmodel_sample(const GenSampleArgs& a) {
  const GenerativeModel model = load_model(a.model);
  GenerateOptions options;
  options.confidence = a.confidence;
  options.thin = a.thin;
  options.max_steps = a.max_steps;
  CandidateBatch batch = generate_candidates(model, a.count, a.seed, options);
  nlohmann::json summary = {{"candidates", batch.candidates.size()},
                            {"steps", batch.steps},
                            {"examined", batch.examined},
                            {"passed_confidence", batch.passed},
                            {"acceptance_rate", batch.acceptance_rate}};
  if (!batch.diagnostics.empty()) summary["diagnostics"] = batch.diagnostics;
  if (!a.validate_oracle.empty()) {
    const std::string problem = model.metadata.value("problem", std::string("geometric"));
    ProblemSpec spec = builtin_problem(problem);
    if (model.metadata.contains("relax_factors"))
      spec = relaxed_problem(spec, model.metadata["relax_factors"].get<std::vector<double>>());
    auto oracle = make_oracle(a.validate_oracle);
    validate_candidates(batch, spec, *oracle);
    std::size_t ok = 0;
    for (const auto& c : batch.candidates) ok += c.feasible.value_or(false) ? 1 : 0;
    summary["validated_feasible"] = ok;
  }
  std::string text;
  for (const auto& c : batch.candidates) text += candidate_to_json(c).dump() + "\n";
  write_text(a.out, text);
  if (!a.trace.empty()) {
    std::string csv = "step,log_posterior\n";
    char buf[64];
    for (std::size_t i = 0; i < batch.log_posterior_trace.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, batch.log_posterior_trace[i]);
      csv += buf;
    }
    write_text(a.trace, csv);
  }
  std::cout << summary.dump() << "\n";
  if (batch.candidates.empty()) std::cerr << "warning: " << batch.diagnostics << "\n";
  return kExitSuccess;
}

// ----------------------------------------------------------------- dataset

struct ImportArgs {
  std::string input;
  std::string store;
  std::string mapping;
  int nfp = 0;
  std::string provenance;
  std::string report;
};

int run_dataset_import(const ImportArgs& a) {
  DatasetStore store = DatasetStore::open(a.store);
  const ColumnMapping mapping = a.mapping.empty() ? ColumnMapping::builtin() : ColumnMapping::from_file(a.mapping);
  DatasetFilters filters;
  if (a.nfp > 0) filters.n_field_periods = a.nfp;
  if (!a.provenance.empty()) filters.provenance = a.provenance;
  ImportReport report;
  try {
    report = store.import_file(a.input, mapping, filters);
  } catch (const ImportError& e) {
    std::cerr << "error: schema mismatch: " << e.what() << "\n";
    for (const auto& c : e.columns()) std::cerr << "  missing column: " << c << "\n";
    return kExitDomainError;
  }
  nlohmann::json j = import_report_to_json(report);
  j["store_size"] = store.size();
  j["mapping_version"] = mapping.version;
  if (!a.report.empty()) write_json(a.report, j);
  std::cout << "imported " << report.imported << " of " << report.rows << " rows (" << report.duplicates
            << " duplicates, " << report.filtered_out << " filtered, " << report.rejected.size()
            << " rejected); store holds " << store.size() << "\n";
  return kExitSuccess;
}

struct SummarizeArgs {
  std::string source;
  std::string metrics;
  std::string out;
  bool trim_tails = false;
  double trim = 0.0;
  int bins = 20;
  int nfp = 0;
};

int run_dataset_summarize(const SummarizeArgs& a) {
  std::vector<DatasetRecord> records = load_records(a.source);
  if (a.nfp > 0) {
    std::vector<DatasetRecord> kept;
    for (auto& r : records)
      if (r.boundary.n_field_periods == a.nfp) kept.push_back(std::move(r));
    records = std::move(kept);
  }
  std::vector<std::string> keys = parse_word_list(a.metrics);
  if (keys.empty())
    for (auto k : kMetricKeys) keys.emplace_back(k);
  SummaryOptions options;
  options.bins = a.bins;
  options.trim_fraction = a.trim_tails ? 0.0005 : a.trim;
  const DistributionSummary s = summarize(records, keys, options);
  write_summary(s, options, a.out);
  std::cout << (s.empty ? "empty selection" : std::to_string(s.records) + " records summarised") << " -> " << a.out
            << "\n";
  return kExitSuccess;
}

// -------------------------------------------------------------- plot-trace

struct PlotTraceArgs {
  std::string trace;
  std::string out;
};

int run_plot_trace(const PlotTraceArgs& a) {
  std::ifstream in(a.trace);
  if (!in) throw NotFoundError("cannot open " + a.trace);
  std::string csv = "k,objective,aggregate_violation,delta,budget,evaluations,max_rho,max_y\n";
  std::string line;
  std::size_t rows = 0;
  char buf[512];
  auto num = [](const nlohmann::json& v) { return v.is_number() ? v.get<double>() : std::nan(""); };
  auto vmax = [&](const nlohmann::json& v) {
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, num(x));
    return m;
  };
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json r;
    try {
      r = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ShapeError("trace line " + std::to_string(rows + 1) + " is not JSON");
    }
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d,%d,%.17g,%.17g\n", r.at("k").get<int>(),
                  num(r.at("objective")), num(r.at("aggregate_violation")), num(r.at("delta")),
                  r.at("budget").get<int>(), r.at("evaluations").get<int>(), vmax(r.at("rho")), vmax(r.at("y")));
    csv += buf;
    ++rows;
  }
  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "trace.csv").string(), csv);
  write_text((fs::path(a.out) / "plot_trace.py").string(), R"(#!/usr/bin/env python3
"""Convergence plot of an ALM trace: objective, violation, trust radius."""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "trace.csv")) as f:
    rows = list(csv.DictReader(f))
k = [int(r["k"]) for r in rows]
fig, axes = plt.subplots(3, 1, figsize=(6, 7), sharex=True)
axes[0].plot(k, [float(r["objective"]) for r in rows])
axes[0].set_ylabel("objective")
axes[1].semilogy(k, [max(float(r["aggregate_violation"]), 1e-16) for r in rows])
axes[1].set_ylabel("max violation")
axes[2].plot(k, [float(r["delta"]) for r in rows])
axes[2].set_ylabel("trust radius")
axes[2].set_xlabel("outer iteration")
fig.tight_layout()
fig.savefig(os.path.join(here, "trace.png"), dpi=120)
)");
  std::cout << rows << " iterations -> " << a.out << "\n";
  return kExitSuccess;
}

}  // namespace

std::unique_ptr<Oracle> make_oracle(const std::string& spec_in) {
  std::string spec = spec_in;
  if (spec.empty()) {
    const char* env = std::getenv("STELLOPT_ORACLE");
    spec = env && *env ? env : "synthetic";
  }
  if (spec == "synthetic") return std::make_unique<SyntheticOracle>();
  if (spec.rfind("replay:", 0) == 0) {
    const std::string path = spec.substr(7);
    if (path.empty()) throw ConfigurationError("replay oracle needs a path");
    auto oracle = std::make_unique<ReplayOracle>();
    for (const auto& r : load_records(path)) oracle->insert(r.boundary, r.metrics);
    return oracle;
  }
  if (spec.rfind("subprocess:", 0) == 0) {
    const std::string command = spec.substr(11);
    if (command.empty()) throw ConfigurationError("subprocess oracle needs a command");
    return std::make_unique<SubprocessOracle>(command);
  }
  throw ConfigurationError("unknown oracle spec '" + spec + "' (synthetic, replay:PATH, subprocess:CMD)");
}

int cli_dispatch(int argc, char** argv) {
  CLI::App app{"Stellarator boundary benchmark toolkit"};
  app.name("stellbench");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  const std::string oracle_help = "oracle spec: synthetic | replay:PATH | subprocess:CMD (default $STELLOPT_ORACLE)";
  const auto problems = CLI::IsMember({"geometric", "simple", "simple_to_build_qi", "mhd", "mhd_stable_qi"});

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate one boundary with an oracle");
  evaluate->add_option("--boundary", ev.boundary, "boundary JSON file")->required();
  evaluate->add_option("--oracle", ev.oracle, oracle_help);
  evaluate->add_option("--fidelity", ev.fidelity, "low | high")->check(CLI::IsMember({"low", "high"}));
  evaluate->add_option("--out", ev.out, "output JSON (default stdout)");

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score boundaries against a benchmark problem");
  score->add_option("--problem", sc.problem, "geometric | simple | mhd")->required()->check(problems);
  score->add_option("--boundaries", sc.boundaries, "JSONL, one boundary per line")->required();
  score->add_option("--oracle", sc.oracle, oracle_help);
  score->add_option("--out", sc.out, "report JSON")->required();

  OptimizeArgs op;
  auto* optimize = app.add_subcommand("optimize", "Run the augmented Lagrangian optimizer");
  optimize->add_option("--problem", op.problem, "geometric | simple | mhd")->required()->check(problems);
  optimize->add_option("--oracle", op.oracle, oracle_help);
  optimize->add_option("--seed", op.seed, "random seed");
  optimize->add_option("--outer", op.outer, "outer iterations (default from config)");
  optimize->add_option("--config", op.config, "ALM config JSON overriding problem defaults");
  optimize->add_option("--trace", op.trace, "per-iteration JSONL trace");
  optimize->add_option("--init", op.init, "initial boundary JSON (default rotating ellipse)");
  optimize->add_option("--out", op.out, "result JSON (default stdout)");
  optimize->add_option("--fidelity", op.fidelity, "oracle fidelity inside the loop")
      ->check(CLI::IsMember({"low", "high"}));
  optimize->add_option("--aspect-target", op.aspect_target, "aspect bound for the two-objective problem");

  ParetoArgs pa;
  auto* pareto = app.add_subcommand("pareto", "Aspect-ratio sweep for the two-objective problem");
  pareto->add_option("--oracle", pa.oracle, oracle_help);
  pareto->add_option("--aspect-targets", pa.aspect_targets, "comma-separated aspect bounds");
  pareto->add_option("--seed", pa.seed, "random seed");
  pareto->add_option("--outer", pa.outer, "outer iterations per run");
  pareto->add_option("--config", pa.config, "ALM config JSON");
  pareto->add_option("--out", pa.out, "report JSON (default stdout)");
  pareto->add_option("--fidelity", pa.fidelity, "oracle fidelity inside the loop")
      ->check(CLI::IsMember({"low", "high"}));

  SampleTargetsArgs st;
  auto* sample_targets = app.add_subcommand("sample-targets", "Sample omnigenous target fields and properties");
  sample_targets->add_option("--count", st.count, "number of targets")->required();
  sample_targets->add_option("--seed", st.seed, "random seed");
  sample_targets->add_option("--out", st.out, "output directory")->required();
  sample_targets->add_option("--knots", st.knots, "well spline knots");
  sample_targets->add_option("--morph-scale", st.morph_scale, "morphing coefficient scale");
  sample_targets->add_option("--l-max", st.l_max, "Chebyshev order of the morphing map");
  sample_targets->add_option("--m-max", st.m_max, "poloidal order of the morphing map");
  sample_targets->add_option("--n-max", st.n_max, "toroidal order of the morphing map");

  auto* genmodel = app.add_subcommand("genmodel", "Feasibility generative model");
  genmodel->require_subcommand(1);
  GenFitArgs gf;
  auto* gen_fit = genmodel->add_subcommand("fit", "Fit PCA, classifiers and mixture prior");
  gen_fit->add_option("--dataset", gf.dataset, "record JSONL or store directory")->required();
  gen_fit->add_option("--problem", gf.problem, "problem used for labels")->required()->check(problems);
  gen_fit->add_option("--relax", gf.relax, "default | none | comma-separated factors");
  gen_fit->add_option("--out", gf.out, "model file")->required();
  gen_fit->add_option("--seed", gf.seed, "random seed");
  gen_fit->add_option("--trees", gf.trees, "trees per forest");
  gen_fit->add_option("--latent-dim", gf.latent_dim, "latent dimension (default: variance rule)");
  gen_fit->add_option("--variance", gf.variance, "explained-variance threshold");
  gen_fit->add_option("--classifiers", gf.classifiers, "independent forests");
  gen_fit->add_option("--nfp", gf.nfp, "keep only this field-period count");
  GenSampleArgs gs;
  auto* gen_sample = genmodel->add_subcommand("sample", "Generate candidate boundaries");
  gen_sample->add_option("--model", gs.model, "model file")->required();
  gen_sample->add_option("--count", gs.count, "number of candidates");
  gen_sample->add_option("--confidence", gs.confidence, "classifier confidence filter");
  gen_sample->add_option("--seed", gs.seed, "random seed");
  gen_sample->add_option("--validate-oracle", gs.validate_oracle, "tag candidates with this oracle");
  gen_sample->add_option("--out", gs.out, "candidates JSONL")->required();
  gen_sample->add_option("--trace", gs.trace, "log-posterior trace CSV");
  gen_sample->add_option("--thin", gs.thin, "keep every n-th chain state");
  gen_sample->add_option("--max-steps", gs.max_steps, "chain step limit");

  auto* dataset = app.add_subcommand("dataset", "Dataset store operations");
  dataset->require_subcommand(1);
  ImportArgs im;
  auto* ds_import = dataset->add_subcommand("import", "Import a JSONL export into a store");
  ds_import->add_option("--input", im.input, "JSONL export")->required();
  ds_import->add_option("--store", im.store, "store directory")->required();
  ds_import->add_option("--mapping", im.mapping, "column mapping JSON (default built in)");
  ds_import->add_option("--nfp", im.nfp, "keep only this field-period count");
  ds_import->add_option("--provenance", im.provenance, "keep only this generation method");
  ds_import->add_option("--report", im.report, "import report JSON");
  SummarizeArgs su;
  auto* ds_summarize = dataset->add_subcommand("summarize", "Metric distributions and histograms");
  ds_summarize->add_option("--store", su.source, "store directory or record JSONL")->required();
  ds_summarize->add_option("--metrics", su.metrics, "comma-separated metric keys (default all)");
  ds_summarize->add_option("--out", su.out, "output directory")->required();
  ds_summarize->add_flag("--trim-tails", su.trim_tails, "drop 0.05% from each tail");
  ds_summarize->add_option("--trim", su.trim, "fraction dropped from each tail");
  ds_summarize->add_option("--bins", su.bins, "histogram bins");
  ds_summarize->add_option("--nfp", su.nfp, "keep only this field-period count");

  PlotTraceArgs pt;
  auto* plot_trace = app.add_subcommand("plot-trace", "Convergence plot data from an optimizer trace");
  plot_trace->add_option("--trace", pt.trace, "trace JSONL")->required();
  plot_trace->add_option("--out", pt.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitUsageError;
  }

  try {
    if (evaluate->parsed()) return run_evaluate(ev);
    if (score->parsed()) return run_score(sc);
    if (optimize->parsed()) return run_optimize(op);
    if (pareto->parsed()) return run_pareto(pa);
    if (sample_targets->parsed()) return run_sample_targets(st);
    if (gen_fit->parsed()) return run_genmodel_fit(gf);
    if (gen_sample->parsed()) return run_genmodel_sample(gs);
    if (ds_import->parsed()) return run_dataset_import(im);
    if (ds_summarize->parsed()) return run_dataset_summarize(su);
    if (plot_trace->parsed()) return run_plot_trace(pt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  std::cerr << app.help();
  return kExitUsageError;
}

}  // namespace stellbench
