#include "spharm/group_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Cholesky>

#include "spharm/error.hpp"
#include "spharm/io.hpp"
#include "spharm/parallel.hpp"

namespace spharm {

namespace {

constexpr int kBatch = 50;

double t2_from_moments(const Eigen::Vector3d& d, const Eigen::Matrix3d& pooled) {
  Eigen::Matrix3d m = pooled;
  const double eps = 1e-9 * m.trace() / 3.0;
  m.diagonal().array() += eps;
  Eigen::LDLT<Eigen::Matrix3d> ldlt(m);
  if (!(eps > 0.0) || ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw DegenerateError("Hotelling T2: combined covariance is singular");
  }
  return std::max(0.0, d.dot(ldlt.solve(d)));
}

// Moments of a group from sums of centred x and x x'.
void group_moments(const Eigen::Vector3d& s, const Eigen::Matrix3d& q, int k, Eigen::Vector3d& mean,
                   Eigen::Matrix3d& cov) {
  mean = s / k;
  cov = (q - k * mean * mean.transpose()) / (k - 1);
}

// Uniform integer in [0, bound) by rejection, independent of the standard
// library's distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r < limit) return r % bound;
  }
}

}  // namespace

double hotelling_t2(const Eigen::MatrixX3d& group1, const Eigen::MatrixX3d& group2) {
  const auto k1 = group1.rows(), k2 = group2.rows();
  if (k1 < 4 || k2 < 4) throw DomainError("Hotelling T2 needs at least 4 samples per group");
  const Eigen::Vector3d m1 = group1.colwise().mean().transpose();
  const Eigen::Vector3d m2 = group2.colwise().mean().transpose();
  const Eigen::MatrixX3d c1 = group1.rowwise() - m1.transpose();
  const Eigen::MatrixX3d c2 = group2.rowwise() - m2.transpose();
  const Eigen::Matrix3d s1 = c1.transpose() * c1 / static_cast<double>(k1 - 1);
  const Eigen::Matrix3d s2 = c2.transpose() * c2 / static_cast<double>(k2 - 1);
  return t2_from_moments(m1 - m2, s1 / static_cast<double>(k1) + s2 / static_cast<double>(k2));
}

StatMap permutation_map(std::span<const PdmSurface> group1, std::span<const PdmSurface> group2, int n_perm,
                        std::uint64_t seed, int threads) {
  if (n_perm < 100) throw DomainError("permutation count must be at least 100");
  const int k1 = static_cast<int>(group1.size()), k2 = static_cast<int>(group2.size());
  if (k1 < 4 || k2 < 4) throw DomainError("Hotelling T2 needs at least 4 subjects per group");
  const int k = k1 + k2;
  const int nv = group1[0].landmark_count();
  const int subdivision = group1[0].subdivision;
  std::vector<const PdmSurface*> pooled;
  for (const auto& s : group1) pooled.push_back(&s);
  for (const auto& s : group2) pooled.push_back(&s);
  for (const auto* s : pooled) {
    if (s->landmark_count() != nv) throw DimensionError("all surfaces must have the same landmark count");
  }

  // per subject and vertex: centred x (3) and the 6 distinct entries of x x'
  Eigen::MatrixX3d centre = Eigen::MatrixX3d::Zero(nv, 3);
  for (const auto* s : pooled) centre += s->landmarks;
  centre /= k;
  Eigen::MatrixXd moments(k, 9 * static_cast<Eigen::Index>(nv));
  for (int i = 0; i < k; ++i) {
    for (int v = 0; v < nv; ++v) {
      const Eigen::Vector3d x = (pooled[i]->landmarks.row(v) - centre.row(v)).transpose();
      const Eigen::Index b = 9 * static_cast<Eigen::Index>(v);
      moments(i, b + 0) = x(0);
      moments(i, b + 1) = x(1);
      moments(i, b + 2) = x(2);
      moments(i, b + 3) = x(0) * x(0);
      moments(i, b + 4) = x(1) * x(1);
      moments(i, b + 5) = x(2) * x(2);
      moments(i, b + 6) = x(0) * x(1);
      moments(i, b + 7) = x(0) * x(2);
      moments(i, b + 8) = x(1) * x(2);
    }
  }

  // T^2 per vertex for each row of a group-1 indicator matrix
  auto evaluate = [&](const Eigen::MatrixXd& indicator) {
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(indicator.rows(), indicator.cols());
    const Eigen::MatrixXd s1 = indicator * moments;
    const Eigen::MatrixXd s2 = (ones - indicator) * moments;
    Eigen::MatrixXd t2(indicator.rows(), nv);
    for (Eigen::Index r = 0; r < indicator.rows(); ++r) {
      for (int v = 0; v < nv; ++v) {
        const Eigen::Index b = 9 * static_cast<Eigen::Index>(v);
        auto unpack = [&](const Eigen::MatrixXd& s, int kk, Eigen::Vector3d& mean, Eigen::Matrix3d& cov) {
          const Eigen::Vector3d sum(s(r, b), s(r, b + 1), s(r, b + 2));
          Eigen::Matrix3d q;
          q << s(r, b + 3), s(r, b + 6), s(r, b + 7), s(r, b + 6), s(r, b + 4), s(r, b + 8), s(r, b + 7),
              s(r, b + 8), s(r, b + 5);
          group_moments(sum, q, kk, mean, cov);
        };
        Eigen::Vector3d m1, m2;
        Eigen::Matrix3d c1, c2;
        unpack(s1, k1, m1, c1);
        unpack(s2, k2, m2, c2);
        try {
          t2(r, v) = t2_from_moments(m1 - m2, c1 / k1 + c2 / k2);
        } catch (const DegenerateError&) {
          throw DegenerateError("Hotelling T2: combined covariance is singular at vertex " + std::to_string(v));
        }
      }
    }
    return t2;
  };

  StatMap map;
  map.subdivision = subdivision;
  map.n_permutations = n_perm;
  map.seed = seed;
  Eigen::MatrixXd observed_ind = Eigen::MatrixXd::Zero(1, k);
  observed_ind.leftCols(k1).setOnes();
  map.t2 = evaluate(observed_ind).row(0).transpose();

  const int n_batches = (n_perm + kBatch - 1) / kBatch;
  std::vector<Eigen::VectorXi> exceed(n_batches);
  std::vector<double> maxima(n_perm);
  parallel_for(static_cast<std::size_t>(n_batches), threads, [&](std::size_t b) {
    const int first = static_cast<int>(b) * kBatch;
    const int count = std::min(kBatch, n_perm - first);
    Eigen::MatrixXd ind = Eigen::MatrixXd::Zero(count, k);
    std::vector<int> order(k);
    for (int r = 0; r < count; ++r) {
      std::mt19937_64 rng(io::derive_seed(seed, static_cast<std::uint64_t>(first + r)));
      for (int i = 0; i < k; ++i) order[i] = i;
      for (int i = k - 1; i > 0; --i) {
        std::swap(order[i], order[uniform_below(rng, static_cast<std::uint64_t>(i) + 1)]);
      }
      for (int i = 0; i < k1; ++i) ind(r, order[i]) = 1.0;
    }
    const Eigen::MatrixXd t2 = evaluate(ind);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(nv);
    for (int r = 0; r < count; ++r) {
      maxima[first + r] = t2.row(r).maxCoeff();
      for (int v = 0; v < nv; ++v) counts(v) += t2(r, v) >= map.t2(v);
    }
    exceed[b] = counts;
  });

  Eigen::VectorXi total = Eigen::VectorXi::Zero(nv);
  for (const auto& c : exceed) total += c;
  std::sort(maxima.begin(), maxima.end());
  map.p_raw.resize(nv);
  map.p_corrected.resize(nv);
  for (int v = 0; v < nv; ++v) {
    map.p_raw(v) = (1.0 + total(v)) / (1.0 + n_perm);
    const auto ge = maxima.end() - std::lower_bound(maxima.begin(), maxima.end(), map.t2(v));
    map.p_corrected(v) = (1.0 + static_cast<double>(ge)) / (1.0 + n_perm);
  }
  return map;
}

std::string stat_map_csv(const StatMap& map) {
  std::string out = "vertex,t2,p_raw,p_corrected\n";
  for (int v = 0; v < map.vertex_count(); ++v) {
    out += std::to_string(v) + "," + io::format_double(map.t2(v)) + "," + io::format_double(map.p_raw(v)) + "," +
           io::format_double(map.p_corrected(v)) + "\n";
  }
  return out;
}

std::string mesh_off(const Eigen::MatrixX3d& landmarks, const SphereTessellation& tess) {
  if (landmarks.rows() != tess.vertex_count()) throw DimensionError("mesh_off: landmark count does not match tessellation");
  std::string out = "OFF\n" + std::to_string(landmarks.rows()) + " " + std::to_string(tess.triangles.size()) + " 0\n";
  for (Eigen::Index v = 0; v < landmarks.rows(); ++v) {
    out += io::format_double(landmarks(v, 0)) + " " + io::format_double(landmarks(v, 1)) + " " +
           io::format_double(landmarks(v, 2)) + "\n";
  }
  for (const auto& t : tess.triangles) {
    out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
  }
  return out;
}

std::string scalar_sidecar(const Eigen::VectorXd& values) {
  std::string out;
  for (Eigen::Index v = 0; v < values.size(); ++v) out += io::format_double(values(v)) + "\n";
  return out;
}

nlohmann::json stat_map_metadata(const StatMap& map) {
  return {{"statistic", "Hotelling T2, (mu1-mu2)' (S1/K1 + S2/K2 + eps I)^-1 (mu1-mu2)"},
          {"regularization", "eps = 1e-9 * trace / 3"},
          {"p_raw", "(1 + #{perm T2 >= observed}) / (1 + n_perm)"},
          {"p_corrected", "max-statistic over vertices per permutation"},
          {"n_permutations", map.n_permutations},
          {"subdivision", map.subdivision},
          {"vertices", map.vertex_count()},
          {"seed", map.seed}};
}

}  // namespace spharm
