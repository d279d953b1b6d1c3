#include "spharm/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "spharm/error.hpp"
#include "spharm/pdm.hpp"

namespace spharm {

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
  }
  if (v(arg) < 0.0) v = -v;
}

}  // namespace

PcaModel pca_fit(const Eigen::MatrixXd& x, int k) {
  const auto rows = x.rows(), dim = x.cols();
  if (rows < 2) throw DomainError("PCA needs at least 2 rows");
  const auto kmax = std::min<Eigen::Index>(rows - 1, dim);
  if (k < 1 || k > kmax) {
    throw DomainError("PCA component count " + std::to_string(k) + " outside [1, " + std::to_string(kmax) + "]");
  }
  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(rows - 1);
  model.components.resize(dim, k);
  model.eigenvalues.resize(k);

  if (dim <= rows) {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (int c = 0; c < k; ++c) {
      const Eigen::Index src = dim - 1 - c;  // ascending order from the solver
      model.eigenvalues(c) = std::max(0.0, es.eigenvalues()(src));
      model.components.col(c) = es.eigenvectors().col(src);
    }
  } else {
    // nonzero spectrum of X'X/(K-1) equals that of XX'/(K-1)
    const Eigen::MatrixXd gram = centered * centered.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double top = std::max(es.eigenvalues()(rows - 1), 0.0);
    for (int c = 0; c < k; ++c) {
      const Eigen::Index src = rows - 1 - c;
      const double lambda = es.eigenvalues()(src);
      if (!(lambda > 1e-12 * top) || top == 0.0) {
        throw DegenerateError("PCA component " + std::to_string(c + 1) + " has zero variance");
      }
      model.eigenvalues(c) = lambda;
      model.components.col(c) = centered.transpose() * es.eigenvectors().col(src);
      model.components.col(c).normalize();
    }
  }
  for (int c = 0; c < k; ++c) fix_sign(model.components.col(c));
  return model;
}

Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.mean.size()) throw DimensionError("pca_project: dimension mismatch");
  return model.components.transpose() * (x - model.mean);
}

Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.mean.size()) throw DimensionError("pca_project: dimension mismatch");
  return (rows.rowwise() - model.mean.transpose()) * model.components;
}

Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& scores) {
  if (scores.size() != model.components.cols()) throw DimensionError("pca_reconstruct: score count mismatch");
  return model.mean + model.components * scores;
}

FldModel fld_train(const Eigen::MatrixXd& z, std::span<const int> y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (z.rows() != n) throw DimensionError("fld_train: row and label counts differ");
  const auto dim = z.cols();
  Eigen::VectorXd mu_pos = Eigen::VectorXd::Zero(dim), mu_neg = Eigen::VectorXd::Zero(dim);
  int n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] == 1) {
      mu_pos += z.row(i).transpose();
      ++n_pos;
    } else {
      mu_neg += z.row(i).transpose();
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0) throw DegenerateError("FLD training needs both classes");
  mu_pos /= n_pos;
  mu_neg /= n_neg;
  const Eigen::VectorXd dmu = mu_pos - mu_neg;
  if (dmu.norm() < 1e-12) throw DegenerateError("FLD: class means coincide");

  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd d = z.row(i).transpose() - (y[i] == 1 ? mu_pos : mu_neg);
    sw += d * d.transpose();
  }
  const double eps = 1e-9 * sw.trace() / static_cast<double>(dim);
  sw.diagonal().array() += eps;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sw);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(eps > 0.0)) {
    throw DegenerateError("FLD: within-class scatter is singular");
  }
  FldModel model;
  model.w = ldlt.solve(dmu);
  if (!model.w.allFinite() || model.w.norm() == 0.0) throw DegenerateError("FLD: within-class scatter is singular");
  model.threshold = 0.5 * (model.w.dot(mu_pos) + model.w.dot(mu_neg));
  return model;
}

double fld_decision(const FldModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.w.size()) throw DimensionError("fld_decision: dimension mismatch");
  return model.w.dot(z) - model.threshold;
}

int fld_predict(const FldModel& model, const Eigen::VectorXd& z) { return sign_label(fld_decision(model, z)); }

namespace {

class PcaReduction : public FoldReduction {
 public:
  PcaReduction(const Eigen::MatrixXd& train)
      : model_(pca_fit(train, static_cast<int>(std::min<Eigen::Index>(train.rows() - 1, train.cols())))),
        scores_(pca_project(model_, train)) {}

  ReducedFold reduce(const SelectionMode& entry, const Eigen::VectorXd& test) const override {
    if (entry.kind != SelectionMode::Kind::count) throw DomainError("PCA sweep entries must be component counts");
    if (entry.count < 1 || entry.count > model_.size()) {
      throw DomainError("PCA component count " + std::to_string(entry.count) + " outside [1, " +
                        std::to_string(model_.size()) + "]");
    }
    ReducedFold out;
    out.n_features = entry.count;
    out.train = scores_.leftCols(entry.count);
    out.test = pca_project(model_, test).head(entry.count);
    return out;
  }

 private:
  PcaModel model_;
  Eigen::MatrixXd scores_;
};

}  // namespace

std::unique_ptr<FoldReduction> PcaReducer::prepare(const Eigen::MatrixXd& train, std::span<const int>) const {
  return std::make_unique<PcaReduction>(train);
}

std::string to_string(PdmVariant v) {
  switch (v) {
    case PdmVariant::univariate_svm:
      return "univariate_svm";
    case PdmVariant::pca_svm:
      return "pca_svm";
    case PdmVariant::pca_fld:
      return "pca_fld";
  }
  return "?";
}

PdmVariant parse_pdm_variant(const std::string& s) {
  if (s == "univariate_svm") return PdmVariant::univariate_svm;
  if (s == "pca_svm") return PdmVariant::pca_svm;
  if (s == "pca_fld") return PdmVariant::pca_fld;
  throw DomainError("unknown baseline variant '" + s + "' (expected univariate_svm, pca_svm or pca_fld)");
}

LabeledData pdm_data(const Cohort& cohort, int subdivision, std::optional<Side> side) {
  const auto tess = shared_icosphere(subdivision);
  const int nv = tess->vertex_count();
  std::vector<Side> sides;
  if (side) {
    sides = {*side};
  } else {
    sides = {Side::left, Side::right};
  }
  LabeledData data;
  data.ids = cohort.ids();
  data.y = cohort.labels();
  data.x.resize(static_cast<Eigen::Index>(cohort.subjects.size()), 3 * nv * static_cast<Eigen::Index>(sides.size()));
  for (std::size_t k = 0; k < cohort.subjects.size(); ++k) {
    for (std::size_t s = 0; s < sides.size(); ++s) {
      const PdmSurface pdm = coeffs_to_pdm(cohort.subjects[k].side(sides[s]), *tess);
      for (int v = 0; v < nv; ++v) {
        for (int a = 0; a < 3; ++a) {
          data.x(static_cast<Eigen::Index>(k), (static_cast<Eigen::Index>(s) * nv + v) * 3 + a) = pdm.landmarks(v, a);
        }
      }
    }
  }
  data.describe = [sides, nv](int idx) {
    const int block = idx / (3 * nv);
    const int rem = idx % (3 * nv);
    static const char* axes[] = {"x", "y", "z"};
    return nlohmann::json{{"side", to_string(sides[block])}, {"vertex", rem / 3}, {"axis", axes[rem % 3]}};
  };
  return data;
}

PdmPipelineResult pdm_pipeline(const Cohort& cohort, const PdmPipelineConfig& config, int threads,
                               std::uint64_t seed) {
  if (config.sweep.empty()) throw DomainError("baseline needs at least one sweep entry");
  PdmPipelineResult result;
  const UnivariateReducer univariate;
  const PcaReducer pca;
  auto annotate = [&](GridResult& r) {
    r.best_report.config["variant"] = to_string(config.variant);
    r.best_report.config["subdivision"] = config.subdivision;
    r.best_report.config["landmarks"] = icosphere_vertex_count(config.subdivision);
  };

  if (config.variant == PdmVariant::pca_fld) {
    ClassifierSpec fld;
    fld.kind = ClassifierSpec::Kind::fld;
    for (Side side : {Side::left, Side::right}) {
      LabeledData data = pdm_data(cohort, config.subdivision, side);
      GridResult r = grid_search(data, pca, config.sweep, fld, threads, seed);
      annotate(r);
      r.best_report.config["side"] = to_string(side);
      result.parts.push_back(to_string(side));
      result.results.push_back(std::move(r));
      result.data.push_back(std::move(data));
    }
    return result;
  }

  LabeledData data = pdm_data(cohort, config.subdivision);
  const FoldReducer& reducer =
      config.variant == PdmVariant::pca_svm ? static_cast<const FoldReducer&>(pca) : univariate;
  GridResult r = grid_search(data, reducer, config.sweep, config.svm, threads, seed);
  annotate(r);
  result.parts.push_back("both");
  result.results.push_back(std::move(r));
  result.data.push_back(std::move(data));
  return result;
}

}  // namespace spharm
