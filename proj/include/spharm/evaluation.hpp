#pragma once

// Leave-one-out cross-validation with every data-driven step (selection,
// normalisation, PCA) refit inside the fold, grid search over (C, gamma)
// and feature-count sweeps, and report serialisation.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "spharm/dataset.hpp"
#include "spharm/selection.hpp"
#include "spharm/svm.hpp"

namespace spharm {

struct Metrics {
  double accuracy = 0.0;
  double error = 0.0;
  double sensitivity = 0.0;  // patients (+1) correctly classified
  double specificity = 0.0;  // controls (-1) correctly classified
};

/// Throws DimensionError on length mismatch, DegenerateError when a class
/// is missing from `truth`.
Metrics metrics(std::span<const int> predicted, std::span<const int> truth);

/// Subjects as rows of a feature matrix, with a way to name features.
struct LabeledData {
  std::vector<std::string> ids;
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::function<nlohmann::json(int)> describe;  // optional

  int size() const { return static_cast<int>(y.size()); }
  LabeledData without(int row) const;
};

/// Training-fold features reduced to what the classifier sees.
struct ReducedFold {
  Eigen::MatrixXd train;
  Eigen::VectorXd test;
  std::vector<int> selected;  // original feature indices, when meaningful
  int n_features = 0;         // dimension handed to the classifier
};

/// State fitted on one training fold; reduces for each sweep entry.
class FoldReduction {
 public:
  virtual ~FoldReduction() = default;
  virtual ReducedFold reduce(const SelectionMode& entry, const Eigen::VectorXd& test) const = 0;
};

/// Feature reduction strategy refit inside each fold.
class FoldReducer {
 public:
  virtual ~FoldReducer() = default;
  virtual std::unique_ptr<FoldReduction> prepare(const Eigen::MatrixXd& train, std::span<const int> y) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

/// Coefficient feature vectors of a cohort, features named by
/// (side, l, m, axis).
LabeledData coefficient_data(const Cohort& cohort);

/// Jackknife t ranking, top-count or p-threshold selection, z-score.
class UnivariateReducer : public FoldReducer {
 public:
  std::unique_ptr<FoldReduction> prepare(const Eigen::MatrixXd& train, std::span<const int> y) const override;
  nlohmann::json to_json() const override { return {{"reducer", "univariate_jackknife_t"}}; }
};

/// Integer powers of two for C and gamma; gamma = scale * 2^exp.
struct GridSpec {
  int c_exp_min = 0;
  int c_exp_max = 20;
  int gamma_exp_min = -15;
  int gamma_exp_max = 0;
  double gamma_scale = 1.0;

  static GridSpec full() { return {}; }
  static GridSpec single(int c_exp, int gamma_exp) { return {c_exp, c_exp, gamma_exp, gamma_exp, 1.0}; }

  std::vector<int> c_exps() const;
  std::vector<int> gamma_exps() const;
  double c_value(int e) const;
  double gamma_value(int e) const;
  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);
};

struct ClassifierSpec {
  enum class Kind { svm, fld };
  Kind kind = Kind::svm;
  KernelSpec::Kind kernel = KernelSpec::Kind::rbf;
  GridSpec grid = GridSpec::full();
  TrainOptions train;

  nlohmann::json to_json() const;
};

struct SubjectOutcome {
  std::string id;
  int truth = 0;
  int predicted = 0;
  double decision = 0.0;
  int n_features = 0;
  std::vector<int> selected;
};

struct CvReport {
  Metrics metrics;
  std::vector<SubjectOutcome> subjects;
  nlohmann::json config;
  std::uint64_t seed = 0;
};

/// Serialises a report. Selected features are named through data.describe
/// when present.
nlohmann::json report_to_json(const CvReport& report, const LabeledData& data);

struct SurfaceCell {
  int c_exp = 0;
  int gamma_exp = 0;
  SelectionMode entry;
  double accuracy = 0.0;
};

struct GridResult {
  std::vector<SurfaceCell> surface;  // order: sweep entry, C, gamma
  SurfaceCell best;
  CvReport best_report;
  bool sweep_outside_loop = false;
};

/// CSV with header `C_exp,gamma_exp,n_features,accuracy`. For threshold
/// sweeps the n_features column holds the p threshold.
std::string surface_csv(const std::vector<SurfaceCell>& surface);

/// Runs LOOCV for every (sweep entry, C, gamma) cell. Folds share their
/// fitted reduction across cells. The best cell maximises accuracy with ties
/// broken by smaller count, then smaller C, then smaller gamma.
GridResult grid_search(const LabeledData& data, const FoldReducer& reducer, std::span<const SelectionMode> sweep,
                       const ClassifierSpec& classifier, int threads = 1, std::uint64_t seed = 0);

struct LoocvConfig {
  SelectionMode selection = SelectionMode::top(10);
  KernelSpec kernel = KernelSpec::rbf(1.0);
  double C = 1.0;
  TrainOptions train;
};

/// Jackknife selection + z-score + SVM, all refit on each K-1 training fold.
CvReport loocv(const LabeledData& data, const LoocvConfig& config, int threads = 1, std::uint64_t seed = 0);

/// Same with an arbitrary reducer and classifier at a single cell.
CvReport loocv_with(const LabeledData& data, const FoldReducer& reducer, const SelectionMode& entry,
                    const ClassifierSpec& classifier, double C, double gamma, int threads = 1,
                    std::uint64_t seed = 0);

}  // namespace spharm
