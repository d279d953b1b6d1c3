#pragma once

#include <random>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "spharm/alignment.hpp"
#include "spharm/core.hpp"

namespace testing_util {

inline spharm::CoefficientSet random_coeffs(int max_degree, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  spharm::CoefficientSet c(max_degree);
  for (Eigen::Index r = 0; r < c.values().rows(); ++r) {
    for (int a = 0; a < 3; ++a) c.values()(r, a) = n(rng);
  }
  return c;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline spharm::RigidTransform random_transform(std::mt19937_64& rng, double shift = 5.0) {
  std::uniform_real_distribution<double> u(-shift, shift);
  spharm::RigidTransform t;
  t.rotation = random_rotation(rng);
  t.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return t;
}

inline std::vector<spharm::SphericalCoordinate> random_params(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<spharm::SphericalCoordinate> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(spharm::SphericalCoordinate::from_direction(Eigen::Vector3d(g(rng), g(rng), g(rng))));
  }
  return out;
}

}  // namespace testing_util
