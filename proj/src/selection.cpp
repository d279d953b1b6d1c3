#include "spharm/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "spharm/error.hpp"

namespace spharm {

namespace {

struct ClassStats {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
};

double welch_from(const ClassStats& p, const ClassStats& c) {
  const double se2 = p.m2 / ((p.n - 1.0) * p.n) + c.m2 / ((c.n - 1.0) * c.n);
  if (!(se2 > 0.0)) return 0.0;
  return (p.mean - c.mean) / std::sqrt(se2);
}

void check_labels(std::span<const int> y, Eigen::Index rows, int min_per_class) {
  if (static_cast<Eigen::Index>(y.size()) != rows) throw DimensionError("labels and rows differ in length");
  int pos = 0, neg = 0;
  for (int v : y) {
    if (v == 1) {
      ++pos;
    } else if (v == -1) {
      ++neg;
    } else {
      throw DomainError("labels must be +1 or -1");
    }
  }
  if (pos < min_per_class || neg < min_per_class) {
    throw DegenerateError("each class needs at least " + std::to_string(min_per_class) + " subjects (have " +
                          std::to_string(pos) + " patients, " + std::to_string(neg) + " controls)");
  }
}

// Two-pass per-class statistics of one feature column, with sums of squares
// below the rounding floor of the column's magnitude treated as exact zero.
void class_stats(const double* col, std::span<const int> y, ClassStats& p, ClassStats& c, double& floor) {
  p = {};
  c = {};
  double max_abs = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    auto& s = y[k] > 0 ? p : c;
    s.n += 1.0;
    s.mean += col[k];
    max_abs = std::max(max_abs, std::abs(col[k]));
  }
  p.mean /= p.n;
  c.mean /= c.n;
  for (std::size_t k = 0; k < y.size(); ++k) {
    auto& s = y[k] > 0 ? p : c;
    const double d = col[k] - s.mean;
    s.m2 += d * d;
  }
  const double eps = 1e-13 * max_abs;
  floor = static_cast<double>(y.size()) * eps * eps;
  if (p.m2 <= floor) p.m2 = 0.0;
  if (c.m2 <= floor) c.m2 = 0.0;
}

}  // namespace

WelchResult welch_t(std::span<const double> first, std::span<const double> second) {
  if (first.size() < 2 || second.size() < 2) throw DegenerateError("welch_t needs at least 2 values per group");
  auto stats = [](std::span<const double> v) {
    ClassStats s;
    s.n = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / s.n;
    for (double x : v) s.m2 += (x - s.mean) * (x - s.mean);
    return s;
  };
  const ClassStats a = stats(first);
  const ClassStats b = stats(second);
  WelchResult r;
  r.t = welch_from(a, b);
  const double va = a.m2 / (a.n - 1.0) / a.n;
  const double vb = b.m2 / (b.n - 1.0) / b.n;
  const double den = va * va / (a.n - 1.0) + vb * vb / (b.n - 1.0);
  r.df = den > 0.0 ? (va + vb) * (va + vb) / den : a.n + b.n - 2.0;
  return r;
}

Eigen::VectorXd jackknife_t_scores(const Eigen::MatrixXd& x, std::span<const int> y) {
  check_labels(y, x.rows(), 3);
  Eigen::VectorXd scores(x.cols());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    const double* col = x.col(f).data();
    ClassStats p, c;
    double floor = 0.0;
    class_stats(col, y, p, c, floor);
    if (p.m2 == 0.0 && c.m2 == 0.0) {
      scores(f) = 0.0;
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < y.size() && best > 0.0; ++k) {
      ClassStats rp = p, rc = c;
      ClassStats& s = y[k] > 0 ? rp : rc;
      const double d = col[k] - s.mean;
      s.mean -= d / (s.n - 1.0);
      s.m2 -= d * d * s.n / (s.n - 1.0);
      s.n -= 1.0;
      if (s.m2 <= floor) s.m2 = 0.0;
      best = std::min(best, std::abs(welch_from(rp, rc)));
    }
    scores(f) = best;
  }
  return scores;
}

Eigen::VectorXd plain_t_scores(const Eigen::MatrixXd& x, std::span<const int> y) {
  check_labels(y, x.rows(), 2);
  Eigen::VectorXd scores(x.cols());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    ClassStats p, c;
    double floor = 0.0;
    class_stats(x.col(f).data(), y, p, c, floor);
    scores(f) = std::abs(welch_from(p, c));
  }
  return scores;
}

double t_to_pvalue(double t, double df) {
  if (!(df > 0.0)) throw DomainError("t_to_pvalue requires df > 0");
  if (std::isnan(t)) throw DomainError("t_to_pvalue of NaN");
  if (t == 0.0) return 1.0;
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t_distribution<double> dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double jackknife_df(int subjects) { return static_cast<double>(subjects - 3); }

nlohmann::json SelectionMode::to_json() const {
  if (kind == Kind::count) return {{"mode", "count"}, {"count", count}};
  return {{"mode", "p_threshold"}, {"p_threshold", p_threshold}};
}

SelectionMode SelectionMode::from_json(const nlohmann::json& j) {
  const std::string mode = j.value("mode", "count");
  if (mode == "count") return top(j.at("count").get<int>());
  if (mode == "p_threshold") return threshold(j.at("p_threshold").get<double>());
  throw Error("unknown selection mode '" + mode + "'");
}

SelectionResult select(const Eigen::VectorXd& scores, const SelectionMode& mode, double df) {
  const auto n = static_cast<int>(scores.size());
  SelectionResult r;
  r.scores = scores;
  r.mode = mode;
  r.df = df;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });

  if (mode.kind == SelectionMode::Kind::count) {
    if (mode.count < 1 || mode.count > n) {
      throw DomainError("selection count " + std::to_string(mode.count) + " outside [1, " + std::to_string(n) + "]");
    }
    for (int i = 0; i < mode.count && scores(order[i]) > 0.0; ++i) r.selected.push_back(order[i]);
  } else {
    if (!(mode.p_threshold > 0.0 && mode.p_threshold <= 1.0)) throw DomainError("p threshold must be in (0, 1]");
    for (int idx : order) {
      if (!(scores(idx) > 0.0)) break;
      if (t_to_pvalue(scores(idx), df) > mode.p_threshold) break;
      r.selected.push_back(idx);
    }
  }
  if (r.selected.empty()) throw DegenerateError("feature selection is empty");
  return r;
}

ZScoreParams zscore_fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) throw DegenerateError("z-score needs at least 2 rows");
  ZScoreParams p;
  p.mean = x.colwise().mean().transpose();
  p.sd.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - p.mean(j)).square().sum();
    p.sd(j) = std::sqrt(ss / static_cast<double>(x.rows() - 1));
    if (!(p.sd(j) > 1e-12)) throw DegenerateError("z-score: column " + std::to_string(j) + " has zero variance");
  }
  return p;
}

Eigen::MatrixXd zscore_apply(const Eigen::MatrixXd& x, const ZScoreParams& p) {
  if (x.cols() != p.mean.size()) throw DimensionError("z-score dimension mismatch");
  return (x.rowwise() - p.mean.transpose()).array().rowwise() / p.sd.transpose().array();
}

Eigen::VectorXd zscore_apply(const Eigen::VectorXd& x, const ZScoreParams& p) {
  if (x.size() != p.mean.size()) throw DimensionError("z-score dimension mismatch");
  return (x - p.mean).array() / p.sd.array();
}

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& x, std::span<const int> indices) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(indices[j]);
  return out;
}

Eigen::VectorXd take_entries(const Eigen::VectorXd& x, std::span<const int> indices) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) out(static_cast<Eigen::Index>(j)) = x(indices[j]);
  return out;
}

SelectionResult select_and_normalize(const Eigen::MatrixXd& x, std::span<const int> y, const SelectionMode& mode) {
  SelectionResult r = select(jackknife_t_scores(x, y), mode, jackknife_df(static_cast<int>(x.rows())));
  r.zscore = zscore_fit(take_columns(x, r.selected));
  return r;
}

}  // namespace spharm
