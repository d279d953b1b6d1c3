#pragma once

// Fixed sphere tessellations and point-distribution-model (PDM) surfaces
// sampled from coefficient sets on them.

#include <array>
#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "spharm/core.hpp"

namespace spharm {

inline constexpr int kMaxSubdivision = 64;

/// n-frequency icosahedral tessellation of the unit sphere: 10 n^2 + 2 vertices.
struct SphereTessellation {
  int subdivision = 0;
  Eigen::MatrixX3d vertices;                  // unit vectors, one per row
  std::vector<SphericalCoordinate> params;    // same order as vertices
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise seen from outside

  int vertex_count() const { return static_cast<int>(vertices.rows()); }
};

constexpr int icosphere_vertex_count(int n) { return 10 * n * n + 2; }

/// Deterministic: vertices on shared edges are created once per edge and
/// reused through index bookkeeping, never matched by coordinates.
SphereTessellation icosphere(int n);

/// Process-wide read-only tessellation and fitter caches.
std::shared_ptr<const SphereTessellation> shared_icosphere(int n);
std::shared_ptr<const SurfaceFitter> shared_fitter(int n, int max_degree);

/// Corresponding landmarks on the tessellation of the given subdivision.
struct PdmSurface {
  int subdivision = 0;
  Eigen::MatrixX3d landmarks;

  int landmark_count() const { return static_cast<int>(landmarks.rows()); }
};

PdmSurface coeffs_to_pdm(const CoefficientSet& coeffs, const SphereTessellation& tess);

/// PDM text file: `PDM v1 n=<n>` then one `x y z` line per landmark.
void save_pdm(const PdmSurface& pdm, const std::filesystem::path& path);
PdmSurface load_pdm(const std::filesystem::path& path);

}  // namespace spharm
