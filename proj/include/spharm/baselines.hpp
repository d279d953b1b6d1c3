#pragma once

// Comparison classifiers on landmark (PDM) features: univariate selection +
// SVM, PCA + SVM, and per-side PCA + Fisher's linear discriminant.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spharm/dataset.hpp"
#include "spharm/evaluation.hpp"

namespace spharm {

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // one orthonormal component per column, descending eigenvalue
  Eigen::VectorXd eigenvalues;

  int size() const { return static_cast<int>(components.cols()); }
};

/// Top-k eigenvectors of the sample covariance. Uses the K x K Gram matrix
/// when the dimension exceeds the number of rows. Each component is signed
/// so that its largest-magnitude entry is positive.
/// Throws DomainError unless 1 <= k <= min(K-1, dim).
PcaModel pca_fit(const Eigen::MatrixXd& x, int k);
Eigen::VectorXd pca_project(const PcaModel& model, const Eigen::VectorXd& x);
Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& rows);
Eigen::VectorXd pca_reconstruct(const PcaModel& model, const Eigen::VectorXd& scores);

struct FldModel {
  Eigen::VectorXd w;
  double threshold = 0.0;
};

/// w = (S_w + eps I)^-1 (mu_+ - mu_-), eps = 1e-9 trace(S_w)/dim; threshold
/// at the midpoint of the projected class means.
/// Throws DegenerateError when the class means coincide (|dmu| < 1e-12) or
/// the regularised scatter is singular.
FldModel fld_train(const Eigen::MatrixXd& z, std::span<const int> y);
double fld_decision(const FldModel& model, const Eigen::VectorXd& z);
int fld_predict(const FldModel& model, const Eigen::VectorXd& z);

/// PCA refit on each training fold; sweep entries give the component count.
class PcaReducer : public FoldReducer {
 public:
  std::unique_ptr<FoldReduction> prepare(const Eigen::MatrixXd& train, std::span<const int> y) const override;
  nlohmann::json to_json() const override { return {{"reducer", "pca"}}; }
};

enum class PdmVariant { univariate_svm, pca_svm, pca_fld };
std::string to_string(PdmVariant v);
PdmVariant parse_pdm_variant(const std::string& s);

/// Landmark coordinates as features: per vertex (x, y, z), left block then
/// right block, or one side only.
LabeledData pdm_data(const Cohort& cohort, int subdivision, std::optional<Side> side = std::nullopt);

struct PdmPipelineConfig {
  PdmVariant variant = PdmVariant::univariate_svm;
  int subdivision = 20;  // pca_fld defaults to 8 (642 landmarks) through default_subdivision
  std::vector<SelectionMode> sweep;
  ClassifierSpec svm;

  static int default_subdivision(PdmVariant v) { return v == PdmVariant::pca_fld ? 8 : 20; }
};

struct PdmPipelineResult {
  std::vector<std::string> parts;  // "both", or "left" and "right"
  std::vector<GridResult> results;
  std::vector<LabeledData> data;
};

/// LOOCV on PDM features of an aligned cohort. pca_fld runs one experiment
/// per side.
PdmPipelineResult pdm_pipeline(const Cohort& cohort, const PdmPipelineConfig& config, int threads = 1,
                               std::uint64_t seed = 0);

}  // namespace spharm
