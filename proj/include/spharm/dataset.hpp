#pragma once

// Subjects, cohorts, feature vectors and the on-disk formats that carry them.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "spharm/core.hpp"

namespace spharm {

enum class Label : int { control = -1, patient = 1 };
enum class Side : int { left = 0, right = 1 };
enum class Axis : int { x = 0, y = 1, z = 2 };

inline int label_sign(Label l) { return static_cast<int>(l); }
std::string to_string(Label l);
std::string to_string(Side s);
std::string to_string(Axis a);
Label parse_label(const std::string& s);
Side parse_side(const std::string& s);

struct SubjectRecord {
  std::string id;
  Label label = Label::control;
  CoefficientSet left;
  CoefficientSet right;

  const CoefficientSet& side(Side s) const { return s == Side::left ? left : right; }
  CoefficientSet& side(Side s) { return s == Side::left ? left : right; }
};

using FeatureVector = Eigen::VectorXd;

/// Length 6 (L+1)^2: [left, right] x canonical index order x [x, y, z].
int feature_length(int max_degree);
FeatureVector build_feature_vector(const SubjectRecord& s);

/// Coordinates of one entry of the feature vector.
struct FeatureTuple {
  Side side = Side::left;
  int l = 0;
  int m = 0;
  Axis axis = Axis::x;
  friend bool operator==(const FeatureTuple&, const FeatureTuple&) = default;
};

FeatureTuple feature_tuple(int index, int max_degree);
int feature_index(const FeatureTuple& t, int max_degree);
nlohmann::json to_json(const FeatureTuple& t);

struct ManifestEntry {
  std::string id;
  Label label = Label::control;
  std::filesystem::path left;   // as written in the manifest
  std::filesystem::path right;
};

struct Manifest {
  std::string cohort;
  int max_degree = 0;
  std::vector<ManifestEntry> subjects;
  std::filesystem::path base_dir;  // relative subject paths resolve against this

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// JSON: { "cohort": str, "L": int, "subjects": [ { "id", "label", "left", "right" } ] }
/// Ids must be unique and both labels present.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                        const std::string& origin);
nlohmann::json manifest_to_json(const Manifest& m);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

/// Coefficient text file: `SPHARM v1 L=<L>` then `<l> <m> <cx> <cy> <cz>`
/// per index in canonical order.
CoefficientSet load_coeffs(const std::filesystem::path& path);
CoefficientSet parse_coeffs(const std::string& text, const std::string& origin);
std::string format_coeffs(const CoefficientSet& coeffs);
void save_coeffs(const CoefficientSet& coeffs, const std::filesystem::path& path);

/// Sampled surface text file: one `<theta> <phi> <x> <y> <z>` line per
/// sample; blank lines and lines starting with '#' are skipped.
SurfaceSampling parse_sampling(const std::string& text, const std::string& origin);
SurfaceSampling load_sampling(const std::filesystem::path& path);
std::string format_sampling(const SurfaceSampling& s);

struct Cohort {
  std::string name;
  int max_degree = 0;
  std::vector<SubjectRecord> subjects;

  /// K x 6(L+1)^2 feature matrix, one row per subject.
  Eigen::MatrixXd feature_matrix() const;
  std::vector<int> labels() const;  // +1 patient, -1 control
  std::vector<std::string> ids() const;
};

/// Loads every subject; a missing coefficient file raises FileNotFoundError
/// naming the subject, a degree mismatch raises ParseError.
Cohort load_cohort(const Manifest& manifest, int threads = 1);

/// Pretty-printed JSON written atomically.
std::string dump_json(const nlohmann::json& doc);
void save_report(const nlohmann::json& report, const std::filesystem::path& path);

}  // namespace spharm
