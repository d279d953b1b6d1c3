#pragma once

// Real spherical-harmonic basis, synthesis of sampled surfaces from
// coefficient sets and least-squares fitting back to coefficients.

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spharm/error.hpp"

namespace spharm {

inline constexpr int kMaxDegree = 30;

/// Point on the unit sphere: colatitude theta in [0, pi], longitude phi in [0, 2pi).
struct SphericalCoordinate {
  double theta = 0.0;
  double phi = 0.0;

  /// Unit vector (sin t cos p, sin t sin p, cos t).
  Eigen::Vector3d direction() const;
  /// Coordinate of a non-zero 3-vector, phi wrapped into [0, 2pi).
  static SphericalCoordinate from_direction(const Eigen::Vector3d& v);
};

struct BasisIndex {
  int l = 0;
  int m = 0;
  friend bool operator==(const BasisIndex&, const BasisIndex&) = default;
};

/// Number of basis functions of degree <= L.
constexpr int basis_size(int max_degree) { return (max_degree + 1) * (max_degree + 1); }

/// Position of (l, m) in the canonical order: l ascending, m from -l to +l.
constexpr int canonical_position(int l, int m) { return l * l + l + m; }

/// Inverse of canonical_position.
BasisIndex basis_index_at(int position);

/// Truncated expansion of one surface: one real 3-vector per basis index,
/// stored as rows of an (L+1)^2 x 3 matrix in canonical order.
class CoefficientSet {
 public:
  CoefficientSet() : CoefficientSet(0) {}
  explicit CoefficientSet(int max_degree);
  CoefficientSet(int max_degree, Eigen::MatrixX3d values);

  int max_degree() const { return max_degree_; }
  int size() const { return static_cast<int>(values_.rows()); }

  Eigen::Vector3d at(int l, int m) const { return values_.row(canonical_position(l, m)).transpose(); }
  void set(int l, int m, const Eigen::Vector3d& c) { values_.row(canonical_position(l, m)) = c.transpose(); }

  const Eigen::MatrixX3d& values() const { return values_; }
  Eigen::MatrixX3d& values() { return values_; }

  /// Copy truncated or zero-padded to another degree.
  CoefficientSet resized(int max_degree) const;

  friend bool operator==(const CoefficientSet& a, const CoefficientSet& b) {
    return a.max_degree_ == b.max_degree_ && a.values_ == b.values_;
  }

  CoefficientSet& operator+=(const CoefficientSet& o);
  friend CoefficientSet operator+(CoefficientSet a, const CoefficientSet& b) { return a += b; }
  friend CoefficientSet operator*(double s, CoefficientSet a) {
    a.values_ *= s;
    return a;
  }

 private:
  int max_degree_;
  Eigen::MatrixX3d values_;
};

struct SurfaceSampling {
  std::vector<SphericalCoordinate> params;
  Eigen::MatrixX3d points;  // one row per param
};

/// Associated Legendre function P_l^m(x), Condon-Shortley phase included.
/// Throws DomainError unless 0 <= m <= l and |x| <= 1.
double assoc_legendre(int l, int m, double x);

/// All P_l^m(x) for 0 <= m <= l <= L, indexed by canonical_position(l, m)
/// (negative-m slots are left at zero).
void assoc_legendre_table(int max_degree, double x, std::span<double> out);

/// Real orthonormal spherical harmonic:
///   m = 0:  N_l^0 P_l^0(cos t)
///   m > 0:  sqrt2 N_l^m P_l^m(cos t) cos(m p)
///   m < 0:  sqrt2 N_l^|m| P_l^|m|(cos t) sin(|m| p)
double real_sph_harm(BasisIndex idx, SphericalCoordinate coord);

/// Normalisation constant sqrt((2l+1)/(4pi) (l-m)!/(l+m)!).
double harmonic_norm(int l, int m);

/// N x (L+1)^2 matrix of basis values, columns in canonical order.
Eigen::MatrixXd basis_matrix(std::span<const SphericalCoordinate> params, int max_degree);

SurfaceSampling synthesize(const CoefficientSet& coeffs, std::span<const SphericalCoordinate> params);

/// Least-squares fit of a coefficient set of degree L to sampled points.
/// Builds a fresh factorisation; use SurfaceFitter to amortise it.
CoefficientSet fit(const SurfaceSampling& samples, int max_degree);

/// Fitting and synthesis on a fixed set of sphere parameters. The basis
/// matrix is factorised once with a thin SVD; fitting applies its
/// pseudo-inverse, so repeated fits cost one matrix product.
class SurfaceFitter {
 public:
  /// Throws RankDeficientError if sigma_min < 1e-10 sigma_max.
  SurfaceFitter(std::span<const SphericalCoordinate> params, int max_degree);

  int max_degree() const { return max_degree_; }
  std::size_t sample_count() const { return params_.size(); }
  const std::vector<SphericalCoordinate>& params() const { return params_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  double condition_number() const { return condition_; }

  CoefficientSet fit(const Eigen::MatrixX3d& points) const;
  Eigen::MatrixX3d synthesize(const CoefficientSet& coeffs) const;

 private:
  int max_degree_;
  std::vector<SphericalCoordinate> params_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd pseudo_inverse_;
  double condition_;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendreRule gauss_legendre(int n);

/// Re-expresses a coefficient set in a rotated parameterisation: the
/// returned set c' satisfies v'(u) = v(Q u) for unit vectors u. Computed by
/// exact product quadrature (Gauss-Legendre in cos(theta), uniform in phi).
CoefficientSet rotate_parameterization(const CoefficientSet& coeffs, const Eigen::Matrix3d& q);

}  // namespace spharm
