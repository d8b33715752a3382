#include "stellbench/boundary_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stellbench {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ShapeError("expected a 2-D array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ShapeError("ragged 2-D array");
    }
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw ShapeError("2-D array holds a non-number");
      m(i, k) = v.get<double>();
    }
  }
  return m;
}

nlohmann::json boundary_to_json(const PlasmaBoundary& b) {
  return {{"n_field_periods", b.n_field_periods},
          {"r_cos", matrix_to_json(b.r_cos)},
          {"z_sin", matrix_to_json(b.z_sin)},
          {"stellarator_symmetric", b.stellarator_symmetric}};
}

PlasmaBoundary boundary_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidBoundaryError("boundary must be a JSON object");
  for (const char* key : {"n_field_periods", "r_cos", "z_sin"}) {
    if (!j.contains(key)) throw InvalidBoundaryError(std::string("boundary lacks '") + key + "'");
  }
  PlasmaBoundary b;
  try {
    b.n_field_periods = j.at("n_field_periods").get<int>();
    b.r_cos = matrix_from_json(j.at("r_cos"));
    b.z_sin = matrix_from_json(j.at("z_sin"));
    b.stellarator_symmetric = j.value("stellarator_symmetric", true);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidBoundaryError(std::string("malformed boundary: ") + e.what());
  } catch (const ShapeError& e) {
    throw InvalidBoundaryError(std::string("malformed boundary: ") + e.what());
  }
  validate(b);
  return b;
}

PlasmaBoundary read_boundary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open boundary file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidBoundaryError("boundary file " + path + " is not JSON: " + e.what());
  }
  return boundary_from_json(j);
}

void write_boundary_file(const std::string& path, const PlasmaBoundary& b) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << boundary_to_json(b).dump(2) << '\n';
}

namespace {

// FNV-1a over the little-endian bytes of each value.
struct Fnv1a {
  std::uint64_t state = 1469598103934665603ULL;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state ^= (v >> (8 * i)) & 0xffU;
      state *= 1099511628211ULL;
    }
  }
};

}  // namespace

std::uint64_t canonical_hash(const PlasmaBoundary& b, double resolution) {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(b.n_field_periods));
  for (int block = 0; block < 2; ++block) {
    const Eigen::MatrixXd& c = block == 0 ? b.r_cos : b.z_sin;
    for (int m = 0; m <= b.m_max(); ++m) {
      for (int n = -b.n_max(); n <= b.n_max(); ++n) {
        const auto q = std::llround(c(m, n + b.n_max()) / resolution);
        if (q == 0) continue;
        h.add(static_cast<std::uint64_t>(block));
        h.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(m)));
        h.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(n)));
        h.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(q)));
      }
    }
  }
  return h.state;
}

std::string canonical_hash_hex(const PlasmaBoundary& b, double resolution) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(canonical_hash(b, resolution)));
  return buf;
}

}  // namespace stellbench
