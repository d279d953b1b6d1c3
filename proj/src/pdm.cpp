#include "spharm/pdm.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "spharm/error.hpp"
#include "spharm/io.hpp"

namespace spharm {

namespace {

constexpr std::array<std::array<int, 3>, 20> kIcosahedronFaces{{
    {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
}};

std::array<Eigen::Vector3d, 12> icosahedron_vertices() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::array<Eigen::Vector3d, 12> v{{
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  }};
  for (auto& p : v) p.normalize();
  return v;
}

}  // namespace

SphereTessellation icosphere(int n) {
  if (n < 1 || n > kMaxSubdivision) {
    throw DomainError("icosphere subdivision must be in [1, " + std::to_string(kMaxSubdivision) + "]");
  }
  const auto corners = icosahedron_vertices();
  std::vector<Eigen::Vector3d> verts(corners.begin(), corners.end());
  verts.reserve(icosphere_vertex_count(n));

  // interior vertices of each undirected edge, ordered from the lower
  // corner index to the higher one
  std::map<std::pair<int, int>, std::vector<int>> edges;
  for (const auto& f : kIcosahedronFaces) {
    for (int e = 0; e < 3; ++e) {
      const int a = std::min(f[e], f[(e + 1) % 3]);
      const int b = std::max(f[e], f[(e + 1) % 3]);
      edges.try_emplace({a, b});
    }
  }
  for (auto& [key, ids] : edges) {
    const Eigen::Vector3d& pa = corners[key.first];
    const Eigen::Vector3d& pb = corners[key.second];
    for (int t = 1; t < n; ++t) {
      const double s = static_cast<double>(t) / n;
      ids.push_back(static_cast<int>(verts.size()));
      verts.push_back(((1.0 - s) * pa + s * pb).normalized());
    }
  }
  auto edge_vertex = [&](int u, int w, int t) {
    if (t == 0) return u;
    if (t == n) return w;
    const auto& ids = edges.at({std::min(u, w), std::max(u, w)});
    return u < w ? ids[t - 1] : ids[n - t - 1];
  };

  SphereTessellation tess;
  tess.subdivision = n;
  for (const auto& f : kIcosahedronFaces) {
    const int a = f[0], b = f[1], c = f[2];
    // lattice (i, j): i steps along a->b, j along a->c, i + j <= n
    std::vector<int> lattice((n + 1) * (n + 1), -1);
    auto at = [&](int i, int j) -> int& { return lattice[i * (n + 1) + j]; };
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        if (j == 0) {
          at(i, j) = edge_vertex(a, b, i);
        } else if (i == 0) {
          at(i, j) = edge_vertex(a, c, j);
        } else if (i + j == n) {
          at(i, j) = edge_vertex(b, c, j);
        } else {
          const Eigen::Vector3d p = corners[a] + (corners[b] - corners[a]) * (static_cast<double>(i) / n) +
                                    (corners[c] - corners[a]) * (static_cast<double>(j) / n);
          at(i, j) = static_cast<int>(verts.size());
          verts.push_back(p.normalized());
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; i + j < n; ++j) {
        tess.triangles.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
        if (i + j + 1 < n) tess.triangles.push_back({at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)});
      }
    }
  }

  tess.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  tess.params.reserve(verts.size());
  for (std::size_t k = 0; k < verts.size(); ++k) {
    tess.vertices.row(static_cast<Eigen::Index>(k)) = verts[k].transpose();
    tess.params.push_back(SphericalCoordinate::from_direction(verts[k]));
  }
  return tess;
}

std::shared_ptr<const SphereTessellation> shared_icosphere(int n) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const SphereTessellation>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const SphereTessellation>(icosphere(n));
  return slot;
}

std::shared_ptr<const SurfaceFitter> shared_fitter(int n, int max_degree) {
  const auto tess = shared_icosphere(n);
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const SurfaceFitter>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{n, max_degree}];
  if (!slot) slot = std::make_shared<const SurfaceFitter>(tess->params, max_degree);
  return slot;
}

PdmSurface coeffs_to_pdm(const CoefficientSet& coeffs, const SphereTessellation& tess) {
  PdmSurface pdm;
  pdm.subdivision = tess.subdivision;
  pdm.landmarks = synthesize(coeffs, tess.params).points;
  return pdm;
}

void save_pdm(const PdmSurface& pdm, const std::filesystem::path& path) {
  std::string out = "PDM v1 n=" + std::to_string(pdm.subdivision) + "\n";
  for (Eigen::Index i = 0; i < pdm.landmarks.rows(); ++i) {
    out += io::format_double(pdm.landmarks(i, 0)) + " " + io::format_double(pdm.landmarks(i, 1)) + " " +
           io::format_double(pdm.landmarks(i, 2)) + "\n";
  }
  io::write_file_atomic(path, out);
}

PdmSurface load_pdm(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  const std::string file = path.string();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  PdmSurface pdm;
  std::vector<Eigen::Vector3d> points;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto tok = io::split_ws(line);
    if (line_no == 1) {
      if (tok.size() != 3 || tok[0] != "PDM" || tok[1] != "v1" || !tok[2].starts_with("n=")) {
        throw ParseError(file, line_no, "expected header 'PDM v1 n=<n>'");
      }
      const auto n = io::parse_int(tok[2].substr(2));
      if (!n || *n < 1 || *n > kMaxSubdivision) throw ParseError(file, line_no, "invalid subdivision");
      pdm.subdivision = static_cast<int>(*n);
      continue;
    }
    if (tok.empty()) continue;
    if (tok.size() != 3) throw ParseError(file, line_no, "expected 'x y z'");
    Eigen::Vector3d p;
    for (int a = 0; a < 3; ++a) {
      const auto v = io::parse_double(tok[a]);
      if (!v) throw ParseError(file, line_no, "invalid number '" + std::string(tok[a]) + "'");
      p[a] = *v;
    }
    points.push_back(p);
  }
  if (line_no == 0) throw ParseError(file, 1, "empty file");
  const int expected = icosphere_vertex_count(pdm.subdivision);
  if (static_cast<int>(points.size()) != expected) {
    throw ParseError(file, line_no, "expected " + std::to_string(expected) + " landmarks, got " +
                                        std::to_string(points.size()));
  }
  pdm.landmarks.resize(expected, 3);
  for (int i = 0; i < expected; ++i) pdm.landmarks.row(i) = points[i].transpose();
  return pdm;
}

}  // namespace spharm
