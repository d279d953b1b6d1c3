#pragma once

// Translation and first-order-ellipsoid normalisation of coefficient sets,
// rigid Procrustes alignment of landmark sets and iterative template
// construction.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "spharm/core.hpp"
#include "spharm/pdm.hpp"

namespace spharm {

/// x -> R x + t with R a proper rotation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }
  /// Applies the transform to every row.
  Eigen::MatrixX3d apply(const Eigen::MatrixX3d& points) const;
  RigidTransform inverse() const;
  /// (*this) after `first`.
  RigidTransform compose(const RigidTransform& first) const;
};

/// Zeroes the degree-0 coefficient (the surface centroid under uniform
/// sphere sampling).
CoefficientSet remove_translation(const CoefficientSet& coeffs);

struct EllipsoidNormalization {
  CoefficientSet coeffs;
  /// Parameter-space rotation Q; the result satisfies v'(u) = v(Q u).
  RigidTransform rotation;
  Eigen::Vector3d semi_axes;  // singular values of the degree-1 map, descending
};

/// Rotates the parameterisation so that the north pole maps onto the longest
/// axis of the first-order ellipsoid and (theta = pi/2, phi = 0) onto the
/// second one. Sign convention: the longest object-space axis has a
/// non-negative z component, the second a non-negative x component, and
/// det Q = +1.
/// Throws DegenerateError when the degree-1 map is singular or two of its
/// singular values coincide within 1e-8 relative.
EllipsoidNormalization ellipsoid_rotation(const CoefficientSet& coeffs);

/// The 3x3 linear map u -> degree-1 part of v(u) for unit vectors u.
Eigen::Matrix3d first_order_map(const CoefficientSet& coeffs);

/// Least-squares rotation + translation (no scaling, no reflection) taking
/// `source` onto `target`. Landmarks must correspond row by row.
RigidTransform procrustes_rigid(const Eigen::MatrixX3d& source, const Eigen::MatrixX3d& target);
RigidTransform procrustes_rigid(const PdmSurface& source, const PdmSurface& target);

/// Rotates every coefficient vector and adds 2 sqrt(pi) t to the degree-0 term.
CoefficientSet apply_transform_coeffs(const CoefficientSet& coeffs, const RigidTransform& transform);

struct Template {
  Eigen::MatrixX3d landmarks;
  int iteration_count = 0;
  bool converged = false;
  std::vector<double> rms_changes;  // one entry per iteration
};

struct TemplateResult {
  Template tmpl;
  std::vector<RigidTransform> transforms;  // subject -> template, last iteration
};

/// Starts from the unaligned mean, then alternates aligning every subject
/// to the current template and re-averaging, until the RMS landmark change
/// drops below `tol` or `max_iter` iterations ran.
TemplateResult build_template(std::span<const PdmSurface> population, double tol = 1e-7, int max_iter = 100,
                              int threads = 1);

}  // namespace spharm
