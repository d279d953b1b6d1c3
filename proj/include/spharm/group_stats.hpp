#pragma once

// Per-vertex Hotelling T^2 group comparison of aligned landmark sets, with
// permutation p-values (raw and max-statistic corrected).

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "spharm/pdm.hpp"

namespace spharm {

/// (mu1 - mu2)' (S1/K1 + S2/K2 + eps I)^-1 (mu1 - mu2) with sample
/// covariances S_i and eps = 1e-9 trace/3. Rows are 3-D samples.
/// Throws DomainError unless both groups have >= 4 rows, DegenerateError if
/// the regularised matrix is still singular.
double hotelling_t2(const Eigen::MatrixX3d& group1, const Eigen::MatrixX3d& group2);

struct StatMap {
  int subdivision = 0;
  Eigen::VectorXd t2;
  Eigen::VectorXd p_raw;
  Eigen::VectorXd p_corrected;
  int n_permutations = 0;
  std::uint64_t seed = 0;

  int vertex_count() const { return static_cast<int>(t2.size()); }
};

/// p_raw = (1 + #{perm T^2 >= observed}) / (1 + n_perm) per vertex;
/// p_corrected uses the per-permutation maximum over vertices instead.
/// Permutation p shuffles the pooled labels with a generator seeded from
/// (seed, p), so results do not depend on `threads`.
/// Throws DomainError if n_perm < 100 or the groups are too small or of
/// differing landmark counts.
StatMap permutation_map(std::span<const PdmSurface> group1, std::span<const PdmSurface> group2, int n_perm,
                        std::uint64_t seed, int threads = 1);

/// `vertex,t2,p_raw,p_corrected`
std::string stat_map_csv(const StatMap& map);

/// ASCII OFF mesh of the given landmarks over the tessellation triangles.
std::string mesh_off(const Eigen::MatrixX3d& landmarks, const SphereTessellation& tess);

/// One value per line in vertex order.
std::string scalar_sidecar(const Eigen::VectorXd& values);

nlohmann::json stat_map_metadata(const StatMap& map);

}  // namespace spharm
