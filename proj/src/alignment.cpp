#include "spharm/alignment.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "spharm/error.hpp"
#include "spharm/parallel.hpp"

namespace spharm {

namespace {

const double kTwoSqrtPi = 2.0 * std::sqrt(std::numbers::pi);

// Flips v (and its partner) so that the first non-zero component among
// `order` is positive.
double orientation_sign(const Eigen::Vector3d& v, std::array<int, 3> order) {
  for (int axis : order) {
    if (std::abs(v[axis]) > 1e-12) return v[axis] > 0 ? 1.0 : -1.0;
  }
  return 1.0;
}

}  // namespace

Eigen::MatrixX3d RigidTransform::apply(const Eigen::MatrixX3d& points) const {
  return (points * rotation.transpose()).rowwise() + translation.transpose();
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& first) const {
  RigidTransform out;
  out.rotation = rotation * first.rotation;
  out.translation = rotation * first.translation + translation;
  return out;
}

CoefficientSet remove_translation(const CoefficientSet& coeffs) {
  CoefficientSet out = coeffs;
  out.set(0, 0, Eigen::Vector3d::Zero());
  return out;
}

Eigen::Matrix3d first_order_map(const CoefficientSet& coeffs) {
  if (coeffs.max_degree() < 1) throw DegenerateError("first-order ellipsoid needs degree >= 1");
  // Y_1^0 = c z, Y_1^1 = -c x, Y_1^-1 = -c y with c = sqrt(3 / 4pi)
  const double c = std::sqrt(3.0 / (4.0 * std::numbers::pi));
  Eigen::Matrix3d m;
  m.col(0) = -c * coeffs.at(1, 1);
  m.col(1) = -c * coeffs.at(1, -1);
  m.col(2) = c * coeffs.at(1, 0);
  return m;
}

EllipsoidNormalization ellipsoid_rotation(const CoefficientSet& coeffs) {
  const Eigen::Matrix3d m = first_order_map(coeffs);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(0) > 0.0) || s(2) <= 1e-8 * s(0)) {
    throw DegenerateError("first-order ellipsoid is rank deficient");
  }
  if (s(0) - s(1) <= 1e-8 * s(0) || s(1) - s(2) <= 1e-8 * s(0)) {
    throw DegenerateError("first-order ellipsoid has coincident axes; orientation is ambiguous");
  }

  Eigen::Vector3d u0 = svd.matrixU().col(0), v0 = svd.matrixV().col(0);
  Eigen::Vector3d u1 = svd.matrixU().col(1), v1 = svd.matrixV().col(1);
  const double s0 = orientation_sign(u0, {2, 0, 1});
  const double s1 = orientation_sign(u1, {0, 1, 2});
  v0 *= s0;
  v1 *= s1;

  Eigen::Matrix3d q;
  q.col(0) = v1;
  q.col(1) = v0.cross(v1);
  q.col(2) = v0;

  EllipsoidNormalization out{rotate_parameterization(coeffs, q), RigidTransform{}, s};
  out.rotation.rotation = q;
  return out;
}

RigidTransform procrustes_rigid(const Eigen::MatrixX3d& source, const Eigen::MatrixX3d& target) {
  if (source.rows() != target.rows()) throw DimensionError("procrustes: landmark counts differ");
  if (source.rows() < 3) throw DegenerateError("procrustes needs at least 3 landmarks");

  const Eigen::RowVector3d cs = source.colwise().mean();
  const Eigen::RowVector3d ct = target.colwise().mean();
  const Eigen::MatrixX3d sc = source.rowwise() - cs;
  const Eigen::MatrixX3d tc = target.rowwise() - ct;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> spread(sc.transpose() * sc, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = spread.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-20 * ev(2)) {
    throw DegenerateError("procrustes: source landmarks are collinear");
  }

  const Eigen::Matrix3d h = sc.transpose() * tc;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  RigidTransform out;
  out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  out.translation = ct.transpose() - out.rotation * cs.transpose();
  return out;
}

RigidTransform procrustes_rigid(const PdmSurface& source, const PdmSurface& target) {
  return procrustes_rigid(source.landmarks, target.landmarks);
}

CoefficientSet apply_transform_coeffs(const CoefficientSet& coeffs, const RigidTransform& transform) {
  CoefficientSet out(coeffs.max_degree(), coeffs.values() * transform.rotation.transpose());
  out.set(0, 0, out.at(0, 0) + kTwoSqrtPi * transform.translation);
  return out;
}

TemplateResult build_template(std::span<const PdmSurface> population, double tol, int max_iter, int threads) {
  if (population.size() < 2) throw DegenerateError("template needs at least 2 subjects");
  const Eigen::Index rows = population.front().landmarks.rows();
  for (const auto& s : population) {
    if (s.landmarks.rows() != rows) throw DimensionError("template: landmark counts differ");
  }
  const auto k = static_cast<double>(population.size());

  TemplateResult result;
  Eigen::MatrixX3d current = Eigen::MatrixX3d::Zero(rows, 3);
  for (const auto& s : population) current += s.landmarks;
  current /= k;

  result.transforms.assign(population.size(), RigidTransform{});
  std::vector<Eigen::MatrixX3d> aligned(population.size());
  for (int iter = 1; iter <= max_iter; ++iter) {
    parallel_for(population.size(), threads, [&](std::size_t i) {
      result.transforms[i] = procrustes_rigid(population[i].landmarks, current);
      aligned[i] = result.transforms[i].apply(population[i].landmarks);
    });
    Eigen::MatrixX3d next = Eigen::MatrixX3d::Zero(rows, 3);
    for (const auto& a : aligned) next += a;
    next /= k;

    const double change = std::sqrt((next - current).squaredNorm() / static_cast<double>(rows));
    result.tmpl.rms_changes.push_back(change);
    result.tmpl.iteration_count = iter;
    current = std::move(next);
    if (change < tol) {
      result.tmpl.converged = true;
      break;
    }
  }
  result.tmpl.landmarks = std::move(current);
  return result;
}

}  // namespace spharm
