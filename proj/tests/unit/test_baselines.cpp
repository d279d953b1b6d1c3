#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "helpers.hpp"
#include "spharm/baselines.hpp"
#include "spharm/error.hpp"
#include "spharm/pdm.hpp"
#include "spharm/synth.hpp"

using namespace spharm;

namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
Eigen::VectorXd jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = 0.5 * std::atan2(2.0 * a(p, q), a(q, q) - a(p, p));
        const double c = std::cos(theta), s = std::sin(theta);
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Eigen::VectorXd ev = a.diagonal();
  std::sort(ev.data(), ev.data() + n, std::greater<>());
  return ev;
}

void expect_valid_model(const PcaModel& m) {
  const Eigen::MatrixXd gram = m.components.transpose() * m.components;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(m.size(), m.size())).cwiseAbs().maxCoeff(), 1e-8);
  for (int i = 0; i < m.size(); ++i) {
    EXPECT_GE(m.eigenvalues(i), 0.0);
    if (i > 0) EXPECT_LE(m.eigenvalues(i), m.eigenvalues(i - 1));
    Eigen::Index at = 0;
    m.components.col(i).cwiseAbs().maxCoeff(&at);
    EXPECT_GT(m.components(at, i), 0.0);
  }
}

SyntheticCohort small_cohort(std::uint64_t seed, double amplitude) {
  CohortSpec spec;
  spec.max_degree = 4;
  spec.n_patients = 8;
  spec.n_controls = 8;
  spec.base_left = base_ellipsoid(5, 4, 10, 4);
  spec.base_right = base_ellipsoid(5, 4, 10, 4);
  spec.noise = 0.05;
  spec.subdivision = 4;
  spec.seed = seed;
  DeformationSpec d;
  d.center = {0.6, 0.4};
  d.width = 0.4;
  d.amplitude = amplitude;
  spec.deformations.push_back(d);
  return make_cohort(spec);
}

}  // namespace

TEST(Pca, LineCapturesAllVariance) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  const Eigen::Vector3d dir = Eigen::Vector3d(1, 2, -2).normalized();
  Eigen::MatrixXd x(50, 3);
  for (int i = 0; i < 50; ++i) x.row(i) = (Eigen::Vector3d(1, 1, 1) + 5.0 * n(rng) * dir + 1e-3 * Eigen::Vector3d(n(rng), n(rng), n(rng))).transpose();
  const PcaModel m = pca_fit(x, 3);
  expect_valid_model(m);
  EXPECT_GT(m.eigenvalues(0) / m.eigenvalues.sum(), 0.999);
  EXPECT_GT(std::abs(m.components.col(0).dot(dir)), 0.9999);
}

TEST(Pca, FullReconstructionIsExact) {
  std::mt19937_64 rng(2);
  for (const auto [rows, cols] : {std::pair{30, 6}, std::pair{12, 40}}) {
    const Eigen::MatrixXd x = gaussian(rows, cols, rng);
    const PcaModel m = pca_fit(x, std::min(rows - 1, cols));
    expect_valid_model(m);
    for (int i = 0; i < rows; ++i) {
      const Eigen::VectorXd back = pca_reconstruct(m, pca_project(m, Eigen::VectorXd(x.row(i).transpose())));
      EXPECT_LE((back - x.row(i).transpose()).norm(), 1e-8 * (1.0 + x.row(i).norm()));
    }
    const Eigen::MatrixXd scores = pca_project(m, x);
    EXPECT_LE((scores.row(3).transpose() - pca_project(m, Eigen::VectorXd(x.row(3).transpose()))).norm(), 1e-12);
  }
}

TEST(Pca, EigenvaluesMatchJacobiOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd x = gaussian(25, 4, rng);
    x = x * gaussian(4, 4, rng);
    const PcaModel m = pca_fit(x, 4);
    const Eigen::VectorXd oracle = jacobi_eigenvalues(sample_covariance(x));
    EXPECT_LE((m.eigenvalues - oracle).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, oracle(0))) << trial;
  }
}

TEST(Pca, GramPathMatchesCovariancePath) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = gaussian(10, 30, rng);
  const PcaModel m = pca_fit(x, 6);
  expect_valid_model(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sample_covariance(x));
  for (int i = 0; i < 6; ++i) {
    const int j = 29 - i;
    EXPECT_NEAR(m.eigenvalues(i), es.eigenvalues()(j), 1e-9 * es.eigenvalues()(29));
    EXPECT_NEAR(std::abs(m.components.col(i).dot(es.eigenvectors().col(j))), 1.0, 1e-8);
  }
}

TEST(Pca, DeterministicAndRangeChecked) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = gaussian(8, 5, rng);
  EXPECT_EQ(pca_fit(x, 3).components, pca_fit(x, 3).components);
  EXPECT_THROW(pca_fit(x, 0), DomainError);
  EXPECT_THROW(pca_fit(x, 6), DomainError);
  EXPECT_THROW(pca_fit(gaussian(4, 10, rng), 4), DomainError);
  // flipping the data's sign leaves the signed components unchanged
  const PcaModel a = pca_fit(x, 3), b = pca_fit(-x, 3);
  EXPECT_LE((a.components - b.components).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Fld, SeparatesBlobs) {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd z = gaussian(40, 3, rng);
  std::vector<int> y(40);
  for (int i = 0; i < 40; ++i) {
    y[i] = i < 20 ? 1 : -1;
    z(i, 0) += 6.0 * y[i];
  }
  const FldModel m = fld_train(z, y);
  EXPECT_GT(m.w.norm(), 0.0);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(fld_predict(m, z.row(i).transpose()), y[i]);

  // positive rescaling of the inputs leaves every prediction unchanged
  const FldModel scaled = fld_train(3.5 * z, y);
  std::normal_distribution<double> n(0.0, 4.0);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Vector3d p(n(rng), n(rng), n(rng));
    EXPECT_EQ(fld_predict(m, p), fld_predict(scaled, 3.5 * p));
  }
}

TEST(Fld, MidpointThreshold) {
  Eigen::MatrixXd z(6, 1);
  z << 1, 2, 3, 7, 8, 9;
  const std::vector<int> y{-1, -1, -1, 1, 1, 1};
  const FldModel m = fld_train(z, y);
  EXPECT_NEAR(fld_decision(m, Eigen::VectorXd::Constant(1, 5.0)), 0.0, 1e-12);
  EXPECT_EQ(fld_predict(m, Eigen::VectorXd::Constant(1, 5.1)), 1);
  EXPECT_EQ(fld_predict(m, Eigen::VectorXd::Constant(1, 4.9)), -1);
}

TEST(Fld, IdenticalMeansRejected) {
  Eigen::MatrixXd z(4, 2);
  z << 1, 0, -1, 0, 0, 1, 0, -1;
  EXPECT_THROW(fld_train(z, std::vector<int>{1, 1, -1, -1}), DegenerateError);
}

TEST(Fld, RecoversGenerativeDirection) {
  std::mt19937_64 rng(7);
  const int dim = 5;
  const Eigen::MatrixXd a = gaussian(dim, dim, rng);
  const Eigen::MatrixXd sigma = a * a.transpose() / dim + Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  Eigen::VectorXd delta = (Eigen::VectorXd(dim) << 1.0, -0.5, 0.8, 0.0, 0.3).finished();
  // Mahalanobis separation 6 between the class means
  delta *= 6.0 / std::sqrt(delta.dot(sigma.ldlt().solve(delta)));
  Eigen::MatrixXd z(200, dim);
  std::vector<int> y(200);
  const Eigen::MatrixXd noise = gaussian(200, dim, rng);
  for (int i = 0; i < 200; ++i) {
    y[i] = i < 100 ? 1 : -1;
    z.row(i) = (chol * noise.row(i).transpose() + 0.5 * y[i] * delta).transpose();
  }
  const Eigen::VectorXd expect = sigma.ldlt().solve(delta);
  const double cosine = fld_train(z, y).w.normalized().dot(expect.normalized());
  const double degrees = std::acos(std::min(1.0, cosine)) * 180.0 / std::numbers::pi;
  EXPECT_LT(degrees, 5.0) << degrees;
}

TEST(PcaReducer, PermutedLabelsShowNoLeakage) {
  ClassifierSpec fld;
  fld.kind = ClassifierSpec::Kind::fld;
  double sum = 0.0;
  for (int s = 0; s < 100; ++s) {
    GaussianFeatureSpec g;
    g.seed = s;
    LabeledData d = make_feature_data(g);
    std::mt19937_64 rng(2000 + s);
    std::shuffle(d.y.begin(), d.y.end(), rng);
    sum += loocv_with(d, PcaReducer{}, SelectionMode::top(5), fld, 0.0, 0.0).metrics.accuracy;
  }
  EXPECT_GE(sum / 100.0, 0.45);
  EXPECT_LE(sum / 100.0, 0.55);
}

TEST(PdmData, LandmarkLayout) {
  const SyntheticCohort sc = small_cohort(1, 0.0);
  const LabeledData both = pdm_data(sc.cohort, 8);
  EXPECT_EQ(icosphere(8).vertex_count(), 642);
  EXPECT_EQ(both.x.cols(), 2 * 642 * 3);
  const LabeledData left = pdm_data(sc.cohort, 8, Side::left);
  EXPECT_EQ(left.x.cols(), 642 * 3);
  const PdmSurface p = coeffs_to_pdm(sc.cohort.subjects[2].right, icosphere(8));
  EXPECT_EQ(both.x(2, 642 * 3 + 10 * 3 + 1), p.landmarks(10, 1));
  EXPECT_EQ(both.describe(642 * 3 + 10 * 3 + 1).dump(), R"({"axis":"y","side":"right","vertex":10})");
}

TEST(PdmPipeline, VariantsShareTheReportSchema) {
  const SyntheticCohort sc = small_cohort(2, 1.5);
  auto key_shape = [](const nlohmann::json& j) {
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    for (const auto& [k, v] : j["subjects"][0].items()) keys.push_back("subjects." + k);
    return keys;
  };

  ClassifierSpec spec;
  spec.grid = GridSpec::single(0, -3);
  const std::vector<SelectionMode> sweep{SelectionMode::top(5)};
  const LabeledData coeff = coefficient_data(sc.cohort);
  const GridResult coef_result = grid_search(coeff, UnivariateReducer{}, sweep, spec);
  const auto coef_keys = key_shape(report_to_json(coef_result.best_report, coeff));

  PdmPipelineConfig cfg;
  cfg.subdivision = 4;
  cfg.sweep = sweep;
  cfg.svm = spec;
  for (PdmVariant v : {PdmVariant::univariate_svm, PdmVariant::pca_svm, PdmVariant::pca_fld}) {
    cfg.variant = v;
    const PdmPipelineResult r = pdm_pipeline(sc.cohort, cfg);
    ASSERT_EQ(r.parts.size(), v == PdmVariant::pca_fld ? 2u : 1u);
    for (std::size_t p = 0; p < r.parts.size(); ++p) {
      const nlohmann::json j = report_to_json(r.results[p].best_report, r.data[p]);
      EXPECT_EQ(key_shape(j), coef_keys) << to_string(v);
      EXPECT_EQ(j["config"]["variant"], to_string(v));
    }
  }
  EXPECT_EQ(parse_pdm_variant("pca_fld"), PdmVariant::pca_fld);
  EXPECT_THROW(parse_pdm_variant("lda"), Error);
  EXPECT_EQ(PdmPipelineConfig::default_subdivision(PdmVariant::pca_fld), 8);
}

TEST(PdmPipeline, PcaSweepEmitsAccuracyCurve) {
  const SyntheticCohort sc = small_cohort(3, 1.5);
  PdmPipelineConfig cfg;
  cfg.variant = PdmVariant::pca_fld;
  cfg.subdivision = 4;
  for (int k = 1; k <= 10; ++k) cfg.sweep.push_back(SelectionMode::top(k));
  const PdmPipelineResult r = pdm_pipeline(sc.cohort, cfg);
  ASSERT_EQ(r.parts, (std::vector<std::string>{"left", "right"}));
  for (const auto& g : r.results) {
    ASSERT_EQ(g.surface.size(), 10u);
    for (int k = 0; k < 10; ++k) EXPECT_EQ(g.surface[k].entry.count, k + 1);
  }
  // the planted deformation sits on the left side only
  EXPECT_GT(r.results[0].best.accuracy, 0.8);
}
