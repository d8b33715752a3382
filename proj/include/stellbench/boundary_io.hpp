#ifndef STELLBENCH_BOUNDARY_IO_HPP
#define STELLBENCH_BOUNDARY_IO_HPP

// JSON form of a boundary: {"n_field_periods", "r_cos", "z_sin",
// "stellarator_symmetric"} with r_cos[m][n + n_max]. Also the oracle wire
// representation.

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "stellbench/boundary.hpp"

namespace stellbench {

nlohmann::json boundary_to_json(const PlasmaBoundary& b);
PlasmaBoundary boundary_from_json(const nlohmann::json& j);

PlasmaBoundary read_boundary_file(const std::string& path);
void write_boundary_file(const std::string& path, const PlasmaBoundary& b);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

// Stable 64-bit key of a boundary: N_fp plus every coefficient rounded to
// `resolution`, zero entries skipped so padding does not change the key.
std::uint64_t canonical_hash(const PlasmaBoundary& b, double resolution = 1e-10);
std::string canonical_hash_hex(const PlasmaBoundary& b, double resolution = 1e-10);

}  // namespace stellbench

#endif  // STELLBENCH_BOUNDARY_IO_HPP
