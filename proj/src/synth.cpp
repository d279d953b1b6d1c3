#include "spharm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "spharm/error.hpp"
#include "spharm/parallel.hpp"
#include "spharm/pdm.hpp"

namespace spharm {

namespace {

constexpr int kBaseSubdivision = 20;

std::string subject_id(char prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03d", prefix, i);
  return buf;
}

nlohmann::json deformation_json(const DeformationSpec& d) {
  return {{"theta", d.center.theta}, {"phi", d.center.phi}, {"width", d.width},
          {"amplitude", d.amplitude}, {"target", to_string(d.target)}, {"side", to_string(d.side)}};
}

DeformationTruth plant(const CohortSpec& spec, const DeformationSpec& d) {
  const auto tess = shared_icosphere(spec.subdivision);
  const auto fitter = shared_fitter(spec.subdivision, spec.max_degree);
  const CoefficientSet& base = d.side == Side::left ? spec.base_left : spec.base_right;
  const Eigen::MatrixX3d landmarks = fitter->synthesize(base);
  const Eigen::Vector3d centroid = base.at(0, 0) / (2.0 * std::sqrt(std::numbers::pi));
  const Eigen::Vector3d c = d.center.direction();

  DeformationTruth truth;
  truth.spec = d;
  const int nv = tess->vertex_count();
  truth.vertex_weights.resize(nv);
  Eigen::MatrixX3d displacement(nv, 3);
  for (int v = 0; v < nv; ++v) {
    const Eigen::Vector3d u = tess->vertices.row(v).transpose();
    const double dist = std::atan2(u.cross(c).norm(), u.dot(c));
    const double w = std::exp(-dist * dist / (2.0 * d.width * d.width));
    truth.vertex_weights(v) = w;
    if (w >= spec.affected_weight) truth.affected_vertices.push_back(v);
    Eigen::Vector3d radial = landmarks.row(v).transpose() - centroid;
    const double r = radial.norm();
    radial = r > 0.0 ? Eigen::Vector3d(radial / r) : u;
    displacement.row(v) = (d.amplitude * w) * radial.transpose();
  }
  // the fit is linear, so refitting base + displacement adds this delta
  truth.coefficient_delta = fitter->fit(displacement);
  const double top = truth.coefficient_delta.values().cwiseAbs().maxCoeff();
  if (top > 0.0) {
    for (int row = 0; row < truth.coefficient_delta.size(); ++row) {
      const BasisIndex idx = basis_index_at(row);
      for (int a = 0; a < 3; ++a) {
        if (std::abs(truth.coefficient_delta.values()(row, a)) >= 0.1 * top) {
          truth.affected_features.push_back(
              feature_index({d.side, idx.l, idx.m, static_cast<Axis>(a)}, spec.max_degree));
        }
      }
    }
    std::sort(truth.affected_features.begin(), truth.affected_features.end());
  }
  return truth;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle) {
  if (max_angle <= 0.0) return Eigen::Matrix3d::Identity();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, max_angle);
  Eigen::Vector3d axis;
  do {
    axis = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
  } while (axis.norm() < 1e-12);
  return Eigen::AngleAxisd(uniform(rng), axis.normalized()).toRotationMatrix();
}

}  // namespace

void CohortSpec::validate() const {
  if (n_patients < 2 || n_controls < 2) throw DomainError("each group needs at least 2 subjects");
  if (!(noise >= 0.0)) throw DomainError("noise sd must be non-negative");
  if (!(rotation_jitter >= 0.0) || !(translation_jitter >= 0.0)) throw DomainError("jitter ranges must be non-negative");
  if (max_degree < 0 || max_degree > kMaxDegree) throw DomainError("L out of range");
  if (base_left.max_degree() != max_degree || base_right.max_degree() != max_degree) {
    throw DomainError("base coefficient sets must have degree " + std::to_string(max_degree));
  }
  if (subdivision < 1 || icosphere_vertex_count(subdivision) < basis_size(max_degree)) {
    throw DomainError("deformation tessellation too coarse for degree " + std::to_string(max_degree));
  }
  for (const auto& d : deformations) {
    if (!(d.width > 0.0)) throw DomainError("deformation width must be positive");
  }
}

nlohmann::json CohortSpec::to_json() const {
  nlohmann::json defs = nlohmann::json::array();
  for (const auto& d : deformations) defs.push_back(deformation_json(d));
  return {{"name", name},
          {"L", max_degree},
          {"patients", n_patients},
          {"controls", n_controls},
          {"noise", noise},
          {"rotation_jitter", rotation_jitter},
          {"translation_jitter", translation_jitter},
          {"deformations", defs},
          {"subdivision", subdivision},
          {"affected_weight", affected_weight},
          {"seed", seed}};
}

CohortSpec CohortSpec::from_json(const nlohmann::json& j) {
  CohortSpec s;
  s.name = j.value("name", s.name);
  s.max_degree = j.value("L", s.max_degree);
  s.n_patients = j.value("patients", s.n_patients);
  s.n_controls = j.value("controls", s.n_controls);
  s.noise = j.value("noise", s.noise);
  s.rotation_jitter = j.value("rotation_jitter", s.rotation_jitter);
  s.translation_jitter = j.value("translation_jitter", s.translation_jitter);
  s.subdivision = j.value("subdivision", s.subdivision);
  s.affected_weight = j.value("affected_weight", s.affected_weight);
  s.seed = j.value("seed", s.seed);
  auto axes = [&](const char* key) {
    const auto v = j.value(key, std::vector<double>{5.0, 4.0, 10.0});
    if (v.size() != 3) throw DomainError(std::string(key) + " must list three semi-axes");
    return base_ellipsoid(v[0], v[1], v[2], s.max_degree);
  };
  if (s.max_degree < 0 || s.max_degree > kMaxDegree) throw DomainError("L out of range");
  s.base_left = axes("base_left");
  s.base_right = axes("base_right");
  for (const auto& d : j.value("deformations", nlohmann::json::array())) {
    DeformationSpec def;
    def.center = {d.value("theta", 0.0), d.value("phi", 0.0)};
    def.width = d.value("width", def.width);
    def.amplitude = d.value("amplitude", def.amplitude);
    def.target = parse_label(d.value("target", std::string("patient")));
    def.side = parse_side(d.value("side", std::string("left")));
    s.deformations.push_back(def);
  }
  s.validate();
  return s;
}

nlohmann::json SyntheticCohort::truth_json() const {
  nlohmann::json defs = nlohmann::json::array();
  for (const auto& d : deformations) {
    defs.push_back({{"spec", deformation_json(d.spec)},
                    {"affected_vertices", d.affected_vertices},
                    {"affected_features", d.affected_features},
                    {"vertex_weights", std::vector<double>(d.vertex_weights.data(),
                                                           d.vertex_weights.data() + d.vertex_weights.size())}});
  }
  nlohmann::json subjects = nlohmann::json::array();
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& t = jitter[i];
    nlohmann::json rot = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) rot.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
    subjects.push_back({{"id", cohort.subjects[i].id},
                        {"label", to_string(cohort.subjects[i].label)},
                        {"rotation", rot},
                        {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}});
  }
  return {{"spec", spec.to_json()}, {"deformations", defs}, {"subjects", subjects}};
}

SyntheticCohort make_cohort(const CohortSpec& spec, int threads) {
  spec.validate();
  SyntheticCohort out;
  out.spec = spec;
  for (const auto& d : spec.deformations) out.deformations.push_back(plant(spec, d));

  const int k = spec.n_patients + spec.n_controls;
  out.cohort.name = spec.name;
  out.cohort.max_degree = spec.max_degree;
  out.cohort.subjects.resize(k);
  out.jitter.resize(k);
  parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t i) {
    const bool patient = static_cast<int>(i) < spec.n_patients;
    SubjectRecord& s = out.cohort.subjects[i];
    s.id = patient ? subject_id('P', static_cast<int>(i)) : subject_id('C', static_cast<int>(i) - spec.n_patients);
    s.label = patient ? Label::patient : Label::control;
    std::mt19937_64 rng(io::derive_seed(spec.seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Side side : {Side::left, Side::right}) {
      CoefficientSet c = side == Side::left ? spec.base_left : spec.base_right;
      if (spec.noise > 0.0) {
        for (Eigen::Index r = 0; r < c.values().rows(); ++r) {
          for (int a = 0; a < 3; ++a) c.values()(r, a) += spec.noise * normal(rng);
        }
      }
      for (const auto& d : out.deformations) {
        if (d.spec.side == side && d.spec.target == s.label) c += d.coefficient_delta;
      }
      s.side(side) = c;
    }
    RigidTransform t;
    t.rotation = random_rotation(rng, spec.rotation_jitter);
    if (spec.translation_jitter > 0.0) {
      std::uniform_real_distribution<double> shift(-spec.translation_jitter, spec.translation_jitter);
      t.translation = Eigen::Vector3d(shift(rng), shift(rng), shift(rng));
    }
    s.left = apply_transform_coeffs(s.left, t);
    s.right = apply_transform_coeffs(s.right, t);
    out.jitter[i] = t;
  });
  return out;
}

void write_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir, io::StagedOutputs& staged,
                  const nlohmann::json& echo) {
  Manifest m;
  m.cohort = cohort.cohort.name;
  m.max_degree = cohort.cohort.max_degree;
  for (const auto& s : cohort.cohort.subjects) {
    ManifestEntry e{s.id, s.label, s.id + "_left.coef", s.id + "_right.coef"};
    staged.write(dir / e.left, format_coeffs(s.left));
    staged.write(dir / e.right, format_coeffs(s.right));
    m.subjects.push_back(std::move(e));
  }
  nlohmann::json manifest = manifest_to_json(m);
  manifest["run"] = echo;
  staged.write(dir / "manifest.json", dump_json(manifest));
  nlohmann::json truth = cohort.truth_json();
  truth["run"] = echo;
  staged.write(dir / "truth.json", dump_json(truth));
}

CoefficientSet base_ellipsoid(double a, double b, double c, int max_degree) {
  if (!(a > 0.0) || !(b > 0.0) || !(c > 0.0)) throw DomainError("ellipsoid semi-axes must be positive");
  const auto tess = shared_icosphere(kBaseSubdivision);
  const auto fitter = shared_fitter(kBaseSubdivision, max_degree);
  Eigen::MatrixX3d points(tess->vertex_count(), 3);
  for (int v = 0; v < tess->vertex_count(); ++v) {
    points.row(v) = tess->vertices.row(v).cwiseProduct(Eigen::RowVector3d(a, b, c));
  }
  return fitter->fit(points);
}

LabeledData make_feature_data(const GaussianFeatureSpec& spec) {
  if (spec.n_patients < 2 || spec.n_controls < 2) throw DomainError("each group needs at least 2 subjects");
  if (spec.informative < 0 || spec.informative > spec.dim) throw DomainError("informative count out of range");
  const int k = spec.n_patients + spec.n_controls;
  LabeledData data;
  data.x.resize(k, spec.dim);
  for (int i = 0; i < k; ++i) {
    const bool patient = i < spec.n_patients;
    data.ids.push_back(patient ? subject_id('P', i) : subject_id('C', i - spec.n_patients));
    data.y.push_back(patient ? 1 : -1);
    std::mt19937_64 rng(io::derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int f = 0; f < spec.dim; ++f) {
      data.x(i, f) = normal(rng) + (f < spec.informative ? (patient ? 0.5 : -0.5) * spec.effect : 0.0);
    }
  }
  return data;
}

}  // namespace spharm
