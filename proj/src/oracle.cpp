#include "stellbench/oracle.hpp"

#include <cmath>

#include "stellbench/boundary_io.hpp"
#include "stellbench/errors.hpp"
#include "stellbench/geometry.hpp"

namespace stellbench {

namespace {

template <typename Metrics>
auto& field_by_key(Metrics& m, std::string_view key) {
  if (key == kMetricKeys[0]) return m.aspect_ratio;
  if (key == kMetricKeys[1]) return m.max_elongation;
  if (key == kMetricKeys[2]) return m.average_triangularity;
  if (key == kMetricKeys[3]) return m.iota_edge_over_nfp;
  if (key == kMetricKeys[4]) return m.edge_mirror_ratio;
  if (key == kMetricKeys[5]) return m.qi_residual;
  if (key == kMetricKeys[6]) return m.vacuum_well;
  if (key == kMetricKeys[7]) return m.flux_compression;
  if (key == kMetricKeys[8]) return m.min_normalized_grad_scale_length;
  throw NotFoundError("unknown metric key '" + std::string(key) + "'");
}

}  // namespace

double EquilibriumMetrics::get(std::string_view key) const { return field_by_key(*this, key); }
double& EquilibriumMetrics::get(std::string_view key) { return field_by_key(*this, key); }

bool is_metric_key(std::string_view key) {
  for (auto k : kMetricKeys) {
    if (k == key) return true;
  }
  return false;
}

nlohmann::json metrics_to_json(const EquilibriumMetrics& m) {
  nlohmann::json j = nlohmann::json::object();
  for (auto k : kMetricKeys) j[std::string(k)] = m.get(k);
  if (m.boozer_b) j["boozer_b"] = matrix_to_json(*m.boozer_b);
  return j;
}

EquilibriumMetrics metrics_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ShapeError("metrics must be a JSON object");
  EquilibriumMetrics m;
  for (auto k : kMetricKeys) {
    const std::string key(k);
    if (!j.contains(key)) throw ShapeError("metrics lack '" + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw ShapeError("metric '" + key + "' is not a number");
    m.get(k) = v.get<double>();
  }
  if (j.contains("boozer_b") && !j.at("boozer_b").is_null()) m.boozer_b = matrix_from_json(j.at("boozer_b"));
  return m;
}

std::string_view to_string(Fidelity f) { return f == Fidelity::low ? "low" : "high"; }

Fidelity fidelity_from_string(std::string_view s) {
  if (s == "low") return Fidelity::low;
  if (s == "high") return Fidelity::high;
  throw ShapeError("fidelity must be 'low' or 'high'");
}

std::string_view to_string(OracleErrorKind e) {
  switch (e) {
    case OracleErrorKind::solver_failed: return "solver_failed";
    case OracleErrorKind::timeout: return "timeout";
    case OracleErrorKind::protocol: return "protocol";
    case OracleErrorKind::not_found: return "not_found";
  }
  return "protocol";
}

OracleErrorKind error_kind_from_string(std::string_view s) {
  if (s == "solver_failed") return OracleErrorKind::solver_failed;
  if (s == "timeout") return OracleErrorKind::timeout;
  if (s == "protocol") return OracleErrorKind::protocol;
  if (s == "not_found") return OracleErrorKind::not_found;
  throw ShapeError("unknown oracle error '" + std::string(s) + "'");
}

nlohmann::json encode_request(std::int64_t id, const OracleRequest& request) {
  return {{"id", id},
          {"boundary", boundary_to_json(request.boundary)},
          {"fidelity", std::string(to_string(request.fidelity))}};
}

std::pair<std::int64_t, OracleRequest> decode_request(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("id") || !j.at("id").is_number_integer()) {
    throw ShapeError("request needs an integer 'id'");
  }
  if (!j.contains("boundary")) throw ShapeError("request needs a 'boundary'");
  OracleRequest r;
  r.boundary = boundary_from_json(j.at("boundary"));
  if (j.contains("fidelity")) {
    if (!j.at("fidelity").is_string()) throw ShapeError("fidelity must be a string");
    r.fidelity = fidelity_from_string(j.at("fidelity").get<std::string>());
  }
  return {j.at("id").get<std::int64_t>(), std::move(r)};
}

nlohmann::json encode_response(std::int64_t id, const OracleResponse& response) {
  if (response.ok()) return {{"id", id}, {"ok", true}, {"metrics", metrics_to_json(*response.metrics)}};
  return {{"id", id}, {"ok", false}, {"error", std::string(to_string(response.error))}};
}

std::pair<std::int64_t, OracleResponse> decode_response(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("id") || !j.at("id").is_number_integer() || !j.contains("ok") ||
      !j.at("ok").is_boolean()) {
    throw ShapeError("response needs integer 'id' and boolean 'ok'");
  }
  const auto id = j.at("id").get<std::int64_t>();
  if (j.at("ok").get<bool>()) {
    if (!j.contains("metrics")) throw ShapeError("successful response lacks 'metrics'");
    return {id, OracleResponse::success(metrics_from_json(j.at("metrics")))};
  }
  if (!j.contains("error") || !j.at("error").is_string()) throw ShapeError("failed response lacks 'error'");
  const auto kind = error_kind_from_string(j.at("error").get<std::string>());
  if (kind == OracleErrorKind::not_found) throw ShapeError("'not_found' is not a wire error");
  return {id, OracleResponse::failure(kind, j.value("detail", std::string{}))};
}

void ReplayOracle::insert(const PlasmaBoundary& b, EquilibriumMetrics m) {
  table_[canonical_hash(b)] = std::move(m);
}

OracleResponse ReplayOracle::evaluate(const OracleRequest& request) {
  const auto it = table_.find(canonical_hash(request.boundary));
  if (it == table_.end()) {
    return OracleResponse::failure(OracleErrorKind::not_found, "boundary " + canonical_hash_hex(request.boundary) +
                                                                   " not in replay index");
  }
  return OracleResponse::success(it->second);
}

bool geometry_consistent(const EquilibriumMetrics& m, const PlasmaBoundary& b, double tol) {
  const double a = aspect_ratio(b);
  const double e = max_elongation(b);
  if (std::abs(m.aspect_ratio - a) / a >= tol) return false;
  if (std::abs(m.max_elongation - e) / e >= tol) return false;
  if (b.stellarator_symmetric) {
    const double d = average_triangularity(b);
    if (std::abs(m.average_triangularity - d) / std::max(std::abs(d), 1.0) >= tol) return false;
  }
  return true;
}

}  // namespace stellbench
