#include "spharm/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SVD>

namespace spharm {

namespace {

constexpr double kPi = std::numbers::pi;

void check_degree(int max_degree) {
  if (max_degree < 0 || max_degree > kMaxDegree) {
    throw DomainError("max degree " + std::to_string(max_degree) + " outside [0, " +
                      std::to_string(kMaxDegree) + "]");
  }
}

// Evaluates the full real basis row for one coordinate into `row`.
void basis_row(int max_degree, const SphericalCoordinate& c, std::vector<double>& legendre,
               double* row) {
  assoc_legendre_table(max_degree, std::cos(c.theta), legendre);
  for (int l = 0; l <= max_degree; ++l) {
    row[canonical_position(l, 0)] = harmonic_norm(l, 0) * legendre[canonical_position(l, 0)];
    for (int m = 1; m <= l; ++m) {
      const double base = std::numbers::sqrt2 * harmonic_norm(l, m) * legendre[canonical_position(l, m)];
      row[canonical_position(l, m)] = base * std::cos(m * c.phi);
      row[canonical_position(l, -m)] = base * std::sin(m * c.phi);
    }
  }
}

}  // namespace

Eigen::Vector3d SphericalCoordinate::direction() const {
  const double s = std::sin(theta);
  return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
}

SphericalCoordinate SphericalCoordinate::from_direction(const Eigen::Vector3d& v) {
  const double r = v.norm();
  if (!(r > 0.0)) throw DomainError("direction of a zero vector");
  const double z = std::clamp(v.z() / r, -1.0, 1.0);
  double phi = std::atan2(v.y(), v.x());
  if (phi < 0.0) phi += 2.0 * kPi;
  if (phi >= 2.0 * kPi) phi = 0.0;
  return {std::acos(z), phi};
}

BasisIndex basis_index_at(int position) {
  if (position < 0) throw DomainError("negative basis position");
  const int l = static_cast<int>(std::sqrt(static_cast<double>(position)));
  // guard the floating sqrt against off-by-one at perfect squares
  int degree = l;
  while (degree * degree > position) --degree;
  while ((degree + 1) * (degree + 1) <= position) ++degree;
  return {degree, position - degree * degree - degree};
}

CoefficientSet::CoefficientSet(int max_degree)
    : max_degree_(max_degree), values_(Eigen::MatrixX3d::Zero(basis_size(max_degree), 3)) {
  check_degree(max_degree);
}

CoefficientSet::CoefficientSet(int max_degree, Eigen::MatrixX3d values)
    : max_degree_(max_degree), values_(std::move(values)) {
  check_degree(max_degree);
  if (values_.rows() != basis_size(max_degree)) {
    throw DimensionError("coefficient set of degree " + std::to_string(max_degree) + " needs " +
                         std::to_string(basis_size(max_degree)) + " rows, got " +
                         std::to_string(values_.rows()));
  }
}

CoefficientSet CoefficientSet::resized(int max_degree) const {
  CoefficientSet out(max_degree);
  const int rows = std::min(size(), out.size());
  out.values_.topRows(rows) = values_.topRows(rows);
  return out;
}

CoefficientSet& CoefficientSet::operator+=(const CoefficientSet& o) {
  if (o.max_degree_ != max_degree_) throw DimensionError("adding coefficient sets of different degree");
  values_ += o.values_;
  return *this;
}

double assoc_legendre(int l, int m, double x) {
  if (m < 0 || m > l) throw DomainError("assoc_legendre requires 0 <= m <= l");
  if (!(std::abs(x) <= 1.0)) throw DomainError("assoc_legendre requires |x| <= 1");

  // P_m^m = (-1)^m (2m-1)!! (1-x^2)^(m/2)
  double pmm = 1.0;
  const double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
  double odd = 1.0;
  for (int i = 1; i <= m; ++i) {
    pmm *= -odd * somx2;
    odd += 2.0;
  }
  if (l == m) return pmm;

  double pmmp1 = x * (2 * m + 1) * pmm;
  if (l == m + 1) return pmmp1;

  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2 * ll - 1) * pmmp1 - (ll + m - 1) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

void assoc_legendre_table(int max_degree, double x, std::span<double> out) {
  check_degree(max_degree);
  if (!(std::abs(x) <= 1.0)) throw DomainError("assoc_legendre requires |x| <= 1");
  if (out.size() < static_cast<std::size_t>(basis_size(max_degree))) {
    throw DimensionError("legendre table buffer too small");
  }
  const double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
  double pmm = 1.0;
  for (int m = 0; m <= max_degree; ++m) {
    if (m > 0) pmm *= -(2.0 * m - 1.0) * somx2;
    out[canonical_position(m, m)] = pmm;
    if (m == max_degree) break;
    double prev = pmm;
    double cur = x * (2 * m + 1) * pmm;
    out[canonical_position(m + 1, m)] = cur;
    for (int l = m + 2; l <= max_degree; ++l) {
      const double next = (x * (2 * l - 1) * cur - (l + m - 1) * prev) / (l - m);
      prev = cur;
      cur = next;
      out[canonical_position(l, m)] = cur;
    }
  }
  for (int l = 1; l <= max_degree; ++l) {
    for (int m = 1; m <= l; ++m) out[canonical_position(l, -m)] = 0.0;
  }
}

double harmonic_norm(int l, int m) {
  const int am = std::abs(m);
  // (l-m)!/(l+m)! as a product of reciprocals
  double ratio = 1.0;
  for (int k = l - am + 1; k <= l + am; ++k) ratio /= k;
  return std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * ratio);
}

double real_sph_harm(BasisIndex idx, SphericalCoordinate coord) {
  if (idx.l < 0 || std::abs(idx.m) > idx.l) throw DomainError("basis index requires |m| <= l");
  const int am = std::abs(idx.m);
  const double p = assoc_legendre(idx.l, am, std::cos(coord.theta));
  const double n = harmonic_norm(idx.l, am);
  if (idx.m == 0) return n * p;
  if (idx.m > 0) return std::numbers::sqrt2 * n * p * std::cos(am * coord.phi);
  return std::numbers::sqrt2 * n * p * std::sin(am * coord.phi);
}

Eigen::MatrixXd basis_matrix(std::span<const SphericalCoordinate> params, int max_degree) {
  check_degree(max_degree);
  const int cols = basis_size(max_degree);
  // row-major scratch so each row is filled contiguously
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(params.size(), cols);
  std::vector<double> legendre(cols);
  for (std::size_t k = 0; k < params.size(); ++k) {
    basis_row(max_degree, params[k], legendre, m.row(static_cast<Eigen::Index>(k)).data());
  }
  return m;
}

SurfaceSampling synthesize(const CoefficientSet& coeffs, std::span<const SphericalCoordinate> params) {
  SurfaceSampling out;
  out.params.assign(params.begin(), params.end());
  out.points = basis_matrix(params, coeffs.max_degree()) * coeffs.values();
  return out;
}

CoefficientSet fit(const SurfaceSampling& samples, int max_degree) {
  if (samples.points.rows() != static_cast<Eigen::Index>(samples.params.size())) {
    throw DimensionError("surface sampling has mismatched params and points");
  }
  return SurfaceFitter(samples.params, max_degree).fit(samples.points);
}

SurfaceFitter::SurfaceFitter(std::span<const SphericalCoordinate> params, int max_degree)
    : max_degree_(max_degree), params_(params.begin(), params.end()) {
  check_degree(max_degree);
  const auto needed = static_cast<std::size_t>(basis_size(max_degree));
  if (params_.size() < needed) {
    throw RankDeficientError("fit of degree " + std::to_string(max_degree) + " needs at least " +
                             std::to_string(needed) + " samples, got " + std::to_string(params_.size()));
  }
  basis_ = basis_matrix(params_, max_degree);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(basis_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smin >= 1e-10 * smax)) {
    throw RankDeficientError("basis matrix is rank deficient (sigma_min/sigma_max = " +
                             std::to_string(smin / smax) + ")");
  }
  condition_ = smax / smin;
  pseudo_inverse_ = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

CoefficientSet SurfaceFitter::fit(const Eigen::MatrixX3d& points) const {
  if (points.rows() != static_cast<Eigen::Index>(params_.size())) {
    throw DimensionError("fit: expected " + std::to_string(params_.size()) + " points, got " +
                         std::to_string(points.rows()));
  }
  return CoefficientSet(max_degree_, pseudo_inverse_ * points);
}

Eigen::MatrixX3d SurfaceFitter::synthesize(const CoefficientSet& coeffs) const {
  if (coeffs.max_degree() != max_degree_) {
    throw DimensionError("synthesize: coefficient degree does not match fitter");
  }
  return basis_ * coeffs.values();
}

GaussLegendreRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre needs n >= 1");
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

CoefficientSet rotate_parameterization(const CoefficientSet& coeffs, const Eigen::Matrix3d& q) {
  const int L = coeffs.max_degree();
  // exact for integrands of degree <= 2L
  const int n_theta = L + 2;
  const int n_phi = 2 * L + 2;
  const GaussLegendreRule rule = gauss_legendre(n_theta);

  std::vector<SphericalCoordinate> nodes;
  std::vector<SphericalCoordinate> rotated;
  std::vector<double> weights;
  nodes.reserve(n_theta * n_phi);
  rotated.reserve(n_theta * n_phi);
  weights.reserve(n_theta * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    const double theta = std::acos(rule.nodes[i]);
    for (int j = 0; j < n_phi; ++j) {
      const SphericalCoordinate c{theta, 2.0 * kPi * j / n_phi};
      nodes.push_back(c);
      rotated.push_back(SphericalCoordinate::from_direction(q * c.direction()));
      weights.push_back(rule.weights[i] * 2.0 * kPi / n_phi);
    }
  }
  const Eigen::MatrixXd b = basis_matrix(nodes, L);
  const Eigen::MatrixX3d values = basis_matrix(rotated, L) * coeffs.values();
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return CoefficientSet(L, b.transpose() * w.asDiagonal() * values);
}

}  // namespace spharm
