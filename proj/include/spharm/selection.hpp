#pragma once

// Univariate feature ranking with jackknife-bagged Welch t statistics,
// count/p-value selection and z-score normalisation.

#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace spharm {

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
};

/// Welch two-sample t (first minus second). Zero standard error gives t = 0.
WelchResult welch_t(std::span<const double> first, std::span<const double> second);

/// Robust per-feature score: min over leave-one-subject-out replicates of
/// |Welch t| between patients (+1) and controls (-1). X is K x n.
/// Throws DegenerateError if a class can drop below 2 members.
Eigen::VectorXd jackknife_t_scores(const Eigen::MatrixXd& x, std::span<const int> y);

/// Plain Welch |t| per feature on all subjects (no bagging).
Eigen::VectorXd plain_t_scores(const Eigen::MatrixXd& x, std::span<const int> y);

/// Two-sided Student tail probability.
double t_to_pvalue(double t, double df);

/// Student degrees of freedom associated with scores computed on K subjects:
/// each jackknife replicate holds K-1 subjects, giving K-3.
double jackknife_df(int subjects);

struct SelectionMode {
  enum class Kind { count, p_threshold };
  Kind kind = Kind::count;
  int count = 10;
  double p_threshold = 0.002;

  static SelectionMode top(int count) { return {Kind::count, count, 0.0}; }
  static SelectionMode threshold(double p) { return {Kind::p_threshold, 0, p}; }
  nlohmann::json to_json() const;
  static SelectionMode from_json(const nlohmann::json& j);
};

struct ZScoreParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

struct SelectionResult {
  Eigen::VectorXd scores;
  std::vector<int> selected;  // descending score, ties by ascending index
  SelectionMode mode;
  double df = 0.0;
  ZScoreParams zscore;  // filled by select_and_normalize
};

/// Ranks by descending score (ties: ascending index). Zero-score features
/// are never selected. Count mode keeps the top `count` (fewer if not enough
/// non-zero scores); threshold mode keeps every feature with p <= threshold.
/// Throws DomainError if count > n or count < 1, DegenerateError if the
/// selection is empty.
SelectionResult select(const Eigen::VectorXd& scores, const SelectionMode& mode, double df);

/// Column means and sample standard deviations; DegenerateError if any
/// sd <= 1e-12.
ZScoreParams zscore_fit(const Eigen::MatrixXd& x);
Eigen::MatrixXd zscore_apply(const Eigen::MatrixXd& x, const ZScoreParams& p);
Eigen::VectorXd zscore_apply(const Eigen::VectorXd& x, const ZScoreParams& p);

/// Restricts columns of x to `indices`, in that order.
Eigen::MatrixXd take_columns(const Eigen::MatrixXd& x, std::span<const int> indices);
Eigen::VectorXd take_entries(const Eigen::VectorXd& x, std::span<const int> indices);

/// jackknife scores -> select -> z-score fitted on the selected columns of x.
SelectionResult select_and_normalize(const Eigen::MatrixXd& x, std::span<const int> y, const SelectionMode& mode);

}  // namespace spharm
