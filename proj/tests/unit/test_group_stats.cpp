#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "spharm/error.hpp"
#include "spharm/group_stats.hpp"

using namespace spharm;

namespace {

// T^2 with the 3x3 inverse written out through the adjugate.
double t2_adjugate(const Eigen::MatrixX3d& a, const Eigen::MatrixX3d& b) {
  auto mean_cov = [](const Eigen::MatrixX3d& g, Eigen::Vector3d& m, Eigen::Matrix3d& s) {
    m.setZero();
    for (Eigen::Index i = 0; i < g.rows(); ++i) m += g.row(i).transpose();
    m /= static_cast<double>(g.rows());
    s.setZero();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const Eigen::Vector3d d = g.row(i).transpose() - m;
      s += d * d.transpose();
    }
    s /= static_cast<double>(g.rows() - 1);
  };
  Eigen::Vector3d m1, m2;
  Eigen::Matrix3d s1, s2;
  mean_cov(a, m1, s1);
  mean_cov(b, m2, s2);
  Eigen::Matrix3d w = s1 / static_cast<double>(a.rows()) + s2 / static_cast<double>(b.rows());
  w.diagonal().array() += 1e-9 * w.trace() / 3.0;
  Eigen::Matrix3d adj;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      adj(i, j) = w(r0, c0) * w(r1, c1) - w(r0, c1) * w(r1, c0);
    }
  }
  const double det = w.row(0).dot(adj.col(0).transpose());
  const Eigen::Vector3d d = m1 - m2;
  return d.dot(adj * d) / det;
}

Eigen::MatrixX3d gaussian_points(int n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::MatrixX3d x(n, 3);
  for (int i = 0; i < n; ++i) x.row(i) = Eigen::RowVector3d(g(rng), g(rng), g(rng));
  return x;
}

// Noisy copies of a sphere's landmarks; `shift` moves the listed vertices
// radially outward.
std::vector<PdmSurface> noisy_group(int count, int subdivision, double sd, std::mt19937_64& rng,
                                    const std::vector<int>& shifted = {}, double shift = 0.0) {
  const auto tess = icosphere(subdivision);
  std::vector<PdmSurface> out;
  for (int s = 0; s < count; ++s) {
    PdmSurface p{subdivision, tess.vertices + gaussian_points(tess.vertex_count(), rng, sd)};
    for (int v : shifted) p.landmarks.row(v) += shift * tess.vertices.row(v);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST(HotellingT2, IdenticalMeansGiveZero) {
  std::mt19937_64 rng(1);
  Eigen::MatrixX3d a = gaussian_points(10, rng);
  Eigen::MatrixX3d b = gaussian_points(12, rng);
  a.rowwise() -= a.colwise().mean();
  b.rowwise() -= b.colwise().mean();
  EXPECT_NEAR(hotelling_t2(a, b), 0.0, 1e-20);
}

TEST(HotellingT2, UnitCovarianceExample) {
  // Ten points per group with sample mean 0 and sample covariance exactly I.
  Eigen::MatrixXd z(10, 3);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 30; ++i) z.data()[i] = g(rng);
  z.rowwise() -= z.colwise().mean();
  const Eigen::Matrix3d s = z.transpose() * z / 9.0;
  const Eigen::Matrix3d whiten = Eigen::LLT<Eigen::Matrix3d>(s).matrixL().solve(Eigen::Matrix3d::Identity());
  const Eigen::MatrixX3d a = z * whiten.transpose();
  Eigen::MatrixX3d b = a;
  b.col(0).array() += 1.0;
  ASSERT_LE((a.transpose() * a / 9.0 - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_NEAR(hotelling_t2(b, a), 5.0, 1e-6);
}

TEST(HotellingT2, MatchesAdjugateOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int k1 = 4 + static_cast<int>(rng() % 6), k2 = 4 + static_cast<int>(rng() % 6);
    Eigen::MatrixX3d a = gaussian_points(k1, rng);
    const Eigen::MatrixX3d b = gaussian_points(k2, rng, 2.0);
    a.col(1).array() += 0.8;
    const double expect = t2_adjugate(a, b);
    EXPECT_NEAR(hotelling_t2(a, b), expect, 1e-10 * std::max(1.0, expect)) << trial;
  }
}

TEST(HotellingT2, SymmetricAndRotationInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixX3d a = gaussian_points(8, rng);
    const Eigen::MatrixX3d b = gaussian_points(9, rng);
    a.col(2).array() += 0.5;
    const double t = hotelling_t2(a, b);
    EXPECT_NEAR(hotelling_t2(b, a), t, 1e-12 * t);
    const Eigen::Matrix3d r = testing_util::random_rotation(rng);
    const Eigen::RowVector3d shift(3, -1, 2);
    const Eigen::MatrixX3d ra = (a * r.transpose()).rowwise() + shift;
    const Eigen::MatrixX3d rb = (b * r.transpose()).rowwise() + shift;
    EXPECT_NEAR(hotelling_t2(ra, rb), t, 1e-8 * std::max(1.0, t));
  }
}

TEST(HotellingT2, SmallOrSingularGroupsRejected) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(hotelling_t2(gaussian_points(3, rng), gaussian_points(6, rng)), DomainError);
  EXPECT_THROW(hotelling_t2(Eigen::MatrixX3d::Zero(5, 3), Eigen::MatrixX3d::Zero(5, 3)), DegenerateError);
}

TEST(PermutationMap, ObservedMapAndPValueInvariants) {
  std::mt19937_64 rng(6);
  const std::vector<int> planted{0, 5, 9};
  const auto g1 = noisy_group(8, 2, 0.1, rng, planted, 0.3);
  const auto g2 = noisy_group(9, 2, 0.1, rng);
  const StatMap m = permutation_map(g1, g2, 400, 17);
  ASSERT_EQ(m.vertex_count(), 42);
  EXPECT_EQ(m.subdivision, 2);
  for (int v = 0; v < 42; ++v) {
    Eigen::MatrixX3d a(8, 3), b(9, 3);
    for (int i = 0; i < 8; ++i) a.row(i) = g1[i].landmarks.row(v);
    for (int i = 0; i < 9; ++i) b.row(i) = g2[i].landmarks.row(v);
    EXPECT_NEAR(m.t2(v), t2_adjugate(a, b), 1e-9 * std::max(1.0, m.t2(v)));
    EXPECT_GE(m.t2(v), 0.0);
    EXPECT_GE(m.p_raw(v), 1.0 / 401.0);
    EXPECT_LE(m.p_raw(v), 1.0);
    EXPECT_GE(m.p_corrected(v), m.p_raw(v));
    EXPECT_LE(m.p_corrected(v), 1.0);
    // the p grid is (1 + count) / (1 + n_perm)
    EXPECT_NEAR(m.p_raw(v) * 401.0, std::round(m.p_raw(v) * 401.0), 1e-9);
  }
  for (int v : planted) EXPECT_LT(m.p_corrected(v), 0.05) << v;

  std::vector<int> order(42);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return m.t2(a) < m.t2(b); });
  for (int i = 1; i < 42; ++i) EXPECT_LE(m.p_corrected(order[i]), m.p_corrected(order[i - 1]));
}

TEST(PermutationMap, SwappingGroupsKeepsT2) {
  std::mt19937_64 rng(7);
  const auto g1 = noisy_group(6, 1, 0.2, rng, {3}, 0.5);
  const auto g2 = noisy_group(7, 1, 0.2, rng);
  const StatMap a = permutation_map(g1, g2, 100, 1);
  const StatMap b = permutation_map(g2, g1, 100, 1);
  for (int v = 0; v < a.vertex_count(); ++v) EXPECT_NEAR(a.t2(v), b.t2(v), 1e-10 * std::max(1.0, a.t2(v)));
}

TEST(PermutationMap, DeterministicAcrossThreads) {
  std::mt19937_64 rng(8);
  const auto g1 = noisy_group(7, 3, 0.1, rng);
  const auto g2 = noisy_group(7, 3, 0.1, rng);
  const StatMap a = permutation_map(g1, g2, 230, 99, 1);
  const StatMap b = permutation_map(g1, g2, 230, 99, 3);
  const StatMap c = permutation_map(g1, g2, 230, 100, 1);
  EXPECT_EQ(stat_map_csv(a), stat_map_csv(b));
  EXPECT_NE(stat_map_csv(a), stat_map_csv(c));
  EXPECT_EQ(a.t2, c.t2);
}

TEST(PermutationMap, NullFamilywiseErrorIsControlled) {
  int any_rejection = 0;
  for (int rep = 0; rep < 40; ++rep) {
    std::mt19937_64 rng(500 + rep);
    const auto g1 = noisy_group(10, 3, 0.1, rng);
    const auto g2 = noisy_group(10, 3, 0.1, rng);
    const StatMap m = permutation_map(g1, g2, 200, rep);
    any_rejection += (m.p_corrected.array() < 0.05).any();
  }
  // 40 repetitions at a nominal 5%: allow two binomial standard deviations
  EXPECT_LE(any_rejection, 5);
}

TEST(PermutationMap, InvalidInputs) {
  std::mt19937_64 rng(9);
  const auto g1 = noisy_group(5, 1, 0.1, rng);
  const auto g2 = noisy_group(5, 1, 0.1, rng);
  EXPECT_THROW(permutation_map(g1, g2, 99, 0), DomainError);
  EXPECT_THROW(permutation_map(std::span(g1).first(3), g2, 100, 0), DomainError);
  auto bad = noisy_group(5, 2, 0.1, rng);
  EXPECT_THROW(permutation_map(g1, bad, 100, 0), DimensionError);
}

TEST(Outputs, CsvOffAndSidecar) {
  std::mt19937_64 rng(10);
  const auto g1 = noisy_group(5, 1, 0.1, rng);
  const auto g2 = noisy_group(5, 1, 0.1, rng);
  const StatMap m = permutation_map(g1, g2, 100, 0);
  const std::string csv = stat_map_csv(m);
  EXPECT_TRUE(csv.starts_with("vertex,t2,p_raw,p_corrected\n0,"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);

  const auto tess = icosphere(1);
  const std::string off = mesh_off(tess.vertices, tess);
  std::istringstream in(off);
  std::string magic;
  int nv = 0, nf = 0, ne = -1;
  in >> magic >> nv >> nf >> ne;
  EXPECT_EQ(magic, "OFF");
  EXPECT_EQ(nv, 12);
  EXPECT_EQ(nf, 20);
  EXPECT_EQ(ne, 0);
  EXPECT_EQ(std::count(off.begin(), off.end(), '\n'), 2 + 12 + 20);
  EXPECT_THROW(mesh_off(Eigen::MatrixX3d::Zero(5, 3), tess), DimensionError);

  EXPECT_EQ(scalar_sidecar(Eigen::Vector3d(0.5, 1, -2)), "0.5\n1\n-2\n");
  const auto meta = stat_map_metadata(m);
  EXPECT_EQ(meta["n_permutations"], 100);
}
