#include "spharm/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spharm/error.hpp"

namespace spharm {

namespace {

constexpr double kTau = 1e-12;

void check_training(const Eigen::MatrixXd& gram, std::span<const int> y, double C) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (gram.rows() != n || gram.cols() != n) throw DimensionError("gram matrix does not match label count");
  if (!(C > 0.0)) throw DomainError("SVM cost C must be positive");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) {
      pos = true;
    } else if (v == -1) {
      neg = true;
    } else {
      throw DomainError("SVM labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw DegenerateError("SVM training needs both classes");
}

}  // namespace

KernelSpec KernelSpec::rbf(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("rbf gamma must be finite and positive");
  return {Kind::rbf, gamma};
}

nlohmann::json KernelSpec::to_json() const {
  if (kind == Kind::linear) return {{"kind", "linear"}};
  return {{"kind", "rbf"}, {"gamma", gamma}};
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) {
    throw DimensionError("kernel operands have dimensions " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
  }
  if (spec.kind == KernelSpec::Kind::linear) return u.dot(v);
  return std::exp(-spec.gamma * (u - v).squaredNorm());
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw DimensionError("kernel_matrix: column counts differ");
  if (spec.kind == KernelSpec::Kind::linear) return a * b.transpose();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      k(i, j) = std::exp(-spec.gamma * (a.row(i) - b.row(j)).squaredNorm());
    }
  }
  return k;
}

double dual_objective(const Eigen::MatrixXd& gram, std::span<const int> y, const Eigen::VectorXd& alpha) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd ay(n);
  for (Eigen::Index i = 0; i < n; ++i) ay(i) = alpha(i) * y[i];
  return alpha.sum() - 0.5 * ay.dot(gram * ay);
}

SvmModel train(const Eigen::MatrixXd& x, std::span<const int> y, double C, const KernelSpec& kernel,
               const TrainOptions& opts) {
  return train_precomputed(kernel_matrix(kernel, x, x), x, y, C, kernel, opts);
}

SvmModel train_precomputed(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& x, std::span<const int> y, double C,
                           const KernelSpec& kernel, const TrainOptions& opts) {
  check_training(gram, y, C);
  if (x.rows() != gram.rows()) throw DimensionError("training matrix does not match gram matrix");
  const auto n = static_cast<Eigen::Index>(y.size());

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // Q alpha - e
  auto q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * gram(i, j); };
  auto in_up = [&](Eigen::Index t) { return y[t] == 1 ? alpha(t) < C : alpha(t) > 0.0; };
  auto in_low = [&](Eigen::Index t) { return y[t] == 1 ? alpha(t) > 0.0 : alpha(t) < C; };

  SvmModel model;
  model.kernel = kernel;
  model.C = C;
  double objective = 0.0;  // minimisation form 1/2 a'Qa - e'a

  long iter = 0;
  for (;; ++iter) {
    Eigen::Index i = -1, j = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y[t] * grad(t);
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    model.kkt_gap = (i < 0 || j < 0) ? 0.0 : gmax - gmin;
    if (i < 0 || j < 0 || gmax - gmin < opts.tol) {
      model.converged = true;
      break;
    }
    if (iter >= opts.max_iter) break;

    const double old_i = alpha(i), old_j = alpha(j);
    const double kii = gram(i, i), kjj = gram(j, j), kij = gram(i, j);
    if (y[i] != y[j]) {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > 0.0) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = C - diff;
        }
      } else if (alpha(j) > C) {
        alpha(j) = C;
        alpha(i) = C + diff;
      }
    } else {
      double quad = kii + kjj - 2.0 * kij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = sum - C;
        }
        if (alpha(j) > C) {
          alpha(j) = C;
          alpha(i) = sum - C;
        }
      } else {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = sum;
        }
        if (alpha(i) < 0.0) {
          alpha(i) = 0.0;
          alpha(j) = sum;
        }
      }
    }

    const double di = alpha(i) - old_i, dj = alpha(j) - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad(t) += q(i, t) * di + q(j, t) * dj;

    double next = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) next += alpha(t) * (grad(t) - 1.0);
    next *= 0.5;
    if (next > objective + 1e-12 * std::max(1.0, std::abs(objective))) model.objective_monotone = false;
    objective = next;
  }
  model.iterations = iter;

  // bias: average over free vectors, else midpoint of the feasible interval
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad(t);
    const bool at_upper = alpha(t) >= C;
    const bool at_lower = alpha(t) <= 0.0;
    if (at_upper) {
      if (y[t] == -1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (at_lower) {
      if (y[t] == 1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
  model.bias = -rho;

  model.alpha = alpha;
  model.dual_objective = -objective;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha(t) > 0.0) model.support_index.push_back(static_cast<int>(t));
  }
  const auto nsv = static_cast<Eigen::Index>(model.support_index.size());
  model.support_vectors.resize(nsv, x.cols());
  model.dual_weights.resize(nsv);
  for (Eigen::Index s = 0; s < nsv; ++s) {
    const int t = model.support_index[s];
    model.support_vectors.row(s) = x.row(t);
    model.dual_weights(s) = alpha(t) * y[t];
  }
  return model;
}

double decision_value(const SvmModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.support_vectors.cols()) {
    throw DimensionError("predict: input has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(model.support_vectors.cols()));
  }
  double sum = model.bias;
  for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s) {
    sum += model.dual_weights(s) * kernel_eval(model.kernel, model.support_vectors.row(s).transpose(), x);
  }
  return sum;
}

double decision_value_from_kernel(const SvmModel& model, const Eigen::VectorXd& kernel_row) {
  double sum = model.bias;
  for (std::size_t s = 0; s < model.support_index.size(); ++s) {
    sum += model.dual_weights(static_cast<Eigen::Index>(s)) * kernel_row(model.support_index[s]);
  }
  return sum;
}

int predict(const SvmModel& model, const Eigen::VectorXd& x) { return sign_label(decision_value(model, x)); }

}  // namespace spharm
