#pragma once

// Seeded synthetic cohorts with a known base shape, per-subject coefficient
// noise, planted localised deformations and rigid misalignment.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "spharm/alignment.hpp"
#include "spharm/core.hpp"
#include "spharm/dataset.hpp"
#include "spharm/evaluation.hpp"
#include "spharm/io.hpp"

namespace spharm {

/// Gaussian bump amplitude * exp(-d^2 / 2 width^2) along the base surface's
/// radial direction, d the great-circle distance from `center` in parameter
/// space.
struct DeformationSpec {
  SphericalCoordinate center;
  double width = 0.3;      // radians, > 0
  double amplitude = 0.0;  // mm, signed
  Label target = Label::patient;
  Side side = Side::left;
};

struct CohortSpec {
  std::string name = "synthetic";
  int max_degree = 20;
  int n_patients = 24;
  int n_controls = 24;
  CoefficientSet base_left;
  CoefficientSet base_right;
  double noise = 0.0;               // coefficient noise sd
  double rotation_jitter = 0.0;     // max rotation angle, radians
  double translation_jitter = 0.0;  // per-axis uniform range, mm
  std::vector<DeformationSpec> deformations;
  std::uint64_t seed = 0;
  int subdivision = 20;  // tessellation carrying the deformations
  double affected_weight = 0.5;  // bump weight at which a vertex counts as affected

  void validate() const;
  nlohmann::json to_json() const;
  /// Bases are given as semi-axes ("base_left": [a, b, c]) and built with
  /// base_ellipsoid.
  static CohortSpec from_json(const nlohmann::json& j);
};

struct DeformationTruth {
  DeformationSpec spec;
  Eigen::VectorXd vertex_weights;     // bump profile on the tessellation
  std::vector<int> affected_vertices;  // weight >= affected_weight
  CoefficientSet coefficient_delta;    // refit of the landmark displacement
  std::vector<int> affected_features;  // indices into the feature vector, |delta| >= 0.1 max
};

struct SyntheticCohort {
  Cohort cohort;
  std::vector<DeformationTruth> deformations;
  std::vector<RigidTransform> jitter;  // per subject, applied last
  CohortSpec spec;

  nlohmann::json truth_json() const;
};

/// Subjects P000.. (patients) then C000.. (controls). Each subject draws
/// from its own generator derived from (seed, subject index).
SyntheticCohort make_cohort(const CohortSpec& spec, int threads = 1);

/// Writes `<id>_left.coef`, `<id>_right.coef`, `manifest.json` and
/// `truth.json` under dir through the staging area.
void write_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir, io::StagedOutputs& staged,
                  const nlohmann::json& echo);

/// Fit of the analytic ellipsoid (a sin t cos p, b sin t sin p, c cos t)
/// sampled on the 4002-vertex tessellation. Throws DomainError unless
/// a, b, c > 0.
CoefficientSet base_ellipsoid(double a, double b, double c, int max_degree);

/// Independent standard-normal features with `informative` leading columns
/// shifted by +effect/2 for patients and -effect/2 for controls.
struct GaussianFeatureSpec {
  int n_patients = 24;
  int n_controls = 24;
  int dim = 200;
  int informative = 10;
  double effect = 3.0;
  std::uint64_t seed = 0;
};

LabeledData make_feature_data(const GaussianFeatureSpec& spec);

}  // namespace spharm
