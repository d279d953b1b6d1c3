#pragma once

// Soft-margin binary SVM trained in the dual by sequential minimal
// optimisation with maximal-violating-pair working-set selection.

#include <span>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

namespace spharm {

struct KernelSpec {
  enum class Kind { linear, rbf };
  Kind kind = Kind::rbf;
  double gamma = 1.0;  // rbf only

  static KernelSpec linear() { return {Kind::linear, 0.0}; }
  static KernelSpec rbf(double gamma);

  std::string name() const { return kind == Kind::linear ? "linear" : "rbf"; }
  nlohmann::json to_json() const;
};

/// linear: u.v ; rbf: exp(-gamma |u - v|^2). Throws DimensionError on size mismatch.
double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Gram matrix between the rows of a and the rows of b.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct TrainOptions {
  double tol = 1e-3;
  long max_iter = 10'000'000;
};

struct SvmModel {
  KernelSpec kernel;
  Eigen::MatrixXd support_vectors;  // one row per support vector
  Eigen::VectorXd dual_weights;     // alpha_k y_k
  double bias = 0.0;
  double C = 1.0;

  // training diagnostics
  Eigen::VectorXd alpha;          // one per training point
  std::vector<int> support_index; // rows of the training matrix kept as SVs
  long iterations = 0;
  bool converged = false;
  double kkt_gap = 0.0;           // final maximal violation m(alpha) - M(alpha)
  double dual_objective = 0.0;    // sum alpha - 1/2 alpha' Q alpha
  bool objective_monotone = true;
};

/// Trains on rows of x with labels +-1. Non-convergence within max_iter is
/// reported through `converged`/`iterations`, not thrown.
SvmModel train(const Eigen::MatrixXd& x, std::span<const int> y, double C, const KernelSpec& kernel,
               const TrainOptions& opts = {});

/// Same, from a precomputed training Gram matrix (support vectors are still
/// taken from x).
SvmModel train_precomputed(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& x, std::span<const int> y, double C,
                           const KernelSpec& kernel, const TrainOptions& opts = {});

/// sum_k (alpha_k y_k) K(sv_k, x) + b
double decision_value(const SvmModel& model, const Eigen::VectorXd& x);
/// Decision value from kernel values against the full training set.
double decision_value_from_kernel(const SvmModel& model, const Eigen::VectorXd& kernel_row);
/// +1 if decision >= 0, else -1.
int predict(const SvmModel& model, const Eigen::VectorXd& x);
inline int sign_label(double decision) { return decision >= 0.0 ? 1 : -1; }

/// Dual objective sum(alpha) - 1/2 alpha' Q alpha with Q_ij = y_i y_j K_ij.
double dual_objective(const Eigen::MatrixXd& gram, std::span<const int> y, const Eigen::VectorXd& alpha);

}  // namespace spharm
