#include "spharm/dataset.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "spharm/error.hpp"
#include "spharm/io.hpp"
#include "spharm/parallel.hpp"

namespace spharm {

namespace fs = std::filesystem;

std::string to_string(Label l) { return l == Label::patient ? "patient" : "control"; }
std::string to_string(Side s) { return s == Side::left ? "left" : "right"; }
std::string to_string(Axis a) {
  switch (a) {
    case Axis::x:
      return "x";
    case Axis::y:
      return "y";
    case Axis::z:
      return "z";
  }
  return "?";
}

Label parse_label(const std::string& s) {
  if (s == "patient") return Label::patient;
  if (s == "control") return Label::control;
  throw Error("unknown label '" + s + "' (expected control|patient)");
}

Side parse_side(const std::string& s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw Error("unknown side '" + s + "' (expected left|right)");
}

int feature_length(int max_degree) { return 6 * basis_size(max_degree); }

FeatureVector build_feature_vector(const SubjectRecord& s) {
  if (s.left.max_degree() != s.right.max_degree()) {
    throw DimensionError("subject " + s.id + ": left and right degrees differ");
  }
  const int per_side = 3 * s.left.size();
  FeatureVector out(2 * per_side);
  for (int side = 0; side < 2; ++side) {
    const auto& v = side == 0 ? s.left.values() : s.right.values();
    for (int j = 0; j < v.rows(); ++j) {
      for (int a = 0; a < 3; ++a) out(side * per_side + 3 * j + a) = v(j, a);
    }
  }
  return out;
}

FeatureTuple feature_tuple(int index, int max_degree) {
  const int per_side = 3 * basis_size(max_degree);
  if (index < 0 || index >= 2 * per_side) {
    throw DomainError("feature index " + std::to_string(index) + " out of range");
  }
  const int side = index / per_side;
  const int rem = index % per_side;
  const BasisIndex b = basis_index_at(rem / 3);
  return {static_cast<Side>(side), b.l, b.m, static_cast<Axis>(rem % 3)};
}

int feature_index(const FeatureTuple& t, int max_degree) {
  if (t.l < 0 || t.l > max_degree || std::abs(t.m) > t.l) throw DomainError("feature tuple out of range");
  return static_cast<int>(t.side) * 3 * basis_size(max_degree) + 3 * canonical_position(t.l, t.m) +
         static_cast<int>(t.axis);
}

nlohmann::json to_json(const FeatureTuple& t) {
  return {{"side", to_string(t.side)}, {"l", t.l}, {"m", t.m}, {"axis", to_string(t.axis)}};
}

fs::path Manifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

Manifest parse_manifest(const nlohmann::json& doc, const fs::path& base_dir, const std::string& origin) {
  Manifest m;
  m.base_dir = base_dir;
  try {
    m.cohort = doc.at("cohort").get<std::string>();
    m.max_degree = doc.at("L").get<int>();
    if (m.max_degree < 0 || m.max_degree > kMaxDegree) throw Error("L out of range");
    std::set<std::string> ids;
    bool has_control = false, has_patient = false;
    for (const auto& s : doc.at("subjects")) {
      ManifestEntry e;
      e.id = s.at("id").get<std::string>();
      e.label = parse_label(s.at("label").get<std::string>());
      e.left = s.at("left").get<std::string>();
      e.right = s.at("right").get<std::string>();
      if (!ids.insert(e.id).second) throw Error("duplicate subject id '" + e.id + "'");
      (e.label == Label::patient ? has_patient : has_control) = true;
      m.subjects.push_back(std::move(e));
    }
    if (!has_control || !has_patient) throw Error("manifest must contain both control and patient subjects");
  } catch (const nlohmann::json::exception& ex) {
    throw Error(origin + ": invalid manifest: " + ex.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& ex) {
    throw Error(origin + ": " + ex.what());
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  const std::string text = io::read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(path.string(), 1, std::string("invalid JSON: ") + ex.what());
  }
  return parse_manifest(doc, path.parent_path(), path.string());
}

nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : m.subjects) {
    subjects.push_back({{"id", s.id}, {"label", to_string(s.label)}, {"left", s.left.generic_string()},
                        {"right", s.right.generic_string()}});
  }
  return {{"cohort", m.cohort}, {"L", m.max_degree}, {"subjects", subjects}};
}

void save_manifest(const Manifest& m, const fs::path& path) {
  io::write_file_atomic(path, dump_json(manifest_to_json(m)));
}

CoefficientSet parse_coeffs(const std::string& text, const std::string& origin) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  int max_degree = -1;
  int next = 0;
  Eigen::MatrixX3d values;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto tok = io::split_ws(line);
    if (line_no == 1) {
      if (tok.size() != 3 || tok[0] != "SPHARM" || tok[1] != "v1" || !tok[2].starts_with("L=")) {
        throw ParseError(origin, line_no, "expected header 'SPHARM v1 L=<L>'");
      }
      const auto l = io::parse_int(tok[2].substr(2));
      if (!l || *l < 0 || *l > kMaxDegree) throw ParseError(origin, line_no, "invalid degree in header");
      max_degree = static_cast<int>(*l);
      values = Eigen::MatrixX3d::Zero(basis_size(max_degree), 3);
      continue;
    }
    if (tok.empty()) continue;
    if (tok.size() != 5) throw ParseError(origin, line_no, "expected '<l> <m> <cx> <cy> <cz>'");
    if (next >= basis_size(max_degree)) {
      throw ParseError(origin, line_no, "expected " + std::to_string(basis_size(max_degree)) + " entries, found more");
    }
    const auto l = io::parse_int(tok[0]);
    const auto m = io::parse_int(tok[1]);
    const BasisIndex want = basis_index_at(next);
    if (!l || !m || *l != want.l || *m != want.m) {
      throw ParseError(origin, line_no,
                       "expected index (" + std::to_string(want.l) + ", " + std::to_string(want.m) + ")");
    }
    for (int a = 0; a < 3; ++a) {
      const auto v = io::parse_double(tok[2 + a]);
      if (!v) throw ParseError(origin, line_no, "invalid number '" + std::string(tok[2 + a]) + "'");
      values(next, a) = *v;
    }
    ++next;
  }
  if (max_degree < 0) throw ParseError(origin, 1, "empty coefficient file");
  if (next != basis_size(max_degree)) {
    throw ParseError(origin, line_no,
                     "expected " + std::to_string(basis_size(max_degree)) + " entries, found " + std::to_string(next));
  }
  return CoefficientSet(max_degree, std::move(values));
}

CoefficientSet load_coeffs(const fs::path& path) { return parse_coeffs(io::read_file(path), path.string()); }

std::string format_coeffs(const CoefficientSet& coeffs) {
  std::string out = "SPHARM v1 L=" + std::to_string(coeffs.max_degree()) + "\n";
  for (int j = 0; j < coeffs.size(); ++j) {
    const BasisIndex b = basis_index_at(j);
    out += std::to_string(b.l) + " " + std::to_string(b.m);
    for (int a = 0; a < 3; ++a) out += " " + io::format_double(coeffs.values()(j, a));
    out += "\n";
  }
  return out;
}

void save_coeffs(const CoefficientSet& coeffs, const fs::path& path) {
  io::write_file_atomic(path, format_coeffs(coeffs));
}

SurfaceSampling parse_sampling(const std::string& text, const std::string& origin) {
  SurfaceSampling out;
  std::vector<Eigen::Vector3d> points;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto tok = io::split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (tok.size() != 5) throw ParseError(origin, line_no, "expected '<theta> <phi> <x> <y> <z>'");
    double v[5];
    for (int i = 0; i < 5; ++i) {
      const auto d = io::parse_double(tok[i]);
      if (!d || !std::isfinite(*d)) throw ParseError(origin, line_no, "invalid number '" + std::string(tok[i]) + "'");
      v[i] = *d;
    }
    if (v[0] < 0.0 || v[0] > std::numbers::pi) throw ParseError(origin, line_no, "theta outside [0, pi]");
    out.params.push_back({v[0], v[1]});
    points.emplace_back(v[2], v[3], v[4]);
  }
  if (points.empty()) throw ParseError(origin, line_no, "no samples");
  out.points.resize(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) out.points.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return out;
}

SurfaceSampling load_sampling(const fs::path& path) { return parse_sampling(io::read_file(path), path.string()); }

std::string format_sampling(const SurfaceSampling& s) {
  std::string out;
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out += io::format_double(s.params[i].theta) + " " + io::format_double(s.params[i].phi) + " " +
           io::format_double(s.points(r, 0)) + " " + io::format_double(s.points(r, 1)) + " " +
           io::format_double(s.points(r, 2)) + "\n";
  }
  return out;
}

Eigen::MatrixXd Cohort::feature_matrix() const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(subjects.size()), feature_length(max_degree));
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = build_feature_vector(subjects[i]).transpose();
  }
  return x;
}

std::vector<int> Cohort::labels() const {
  std::vector<int> y;
  y.reserve(subjects.size());
  for (const auto& s : subjects) y.push_back(label_sign(s.label));
  return y;
}

std::vector<std::string> Cohort::ids() const {
  std::vector<std::string> out;
  for (const auto& s : subjects) out.push_back(s.id);
  return out;
}

Cohort load_cohort(const Manifest& manifest, int threads) {
  Cohort cohort;
  cohort.name = manifest.cohort;
  cohort.max_degree = manifest.max_degree;
  cohort.subjects.resize(manifest.subjects.size());
  parallel_for(manifest.subjects.size(), threads, [&](std::size_t i) {
    const auto& e = manifest.subjects[i];
    SubjectRecord& s = cohort.subjects[i];
    s.id = e.id;
    s.label = e.label;
    for (Side side : {Side::left, Side::right}) {
      const fs::path p = manifest.resolve(side == Side::left ? e.left : e.right);
      if (!fs::exists(p)) {
        throw FileNotFoundError("subject '" + e.id + "': " + to_string(side) + " coefficient file not found: " +
                                p.string());
      }
      CoefficientSet c = load_coeffs(p);
      if (c.max_degree() != manifest.max_degree) {
        throw ParseError(p.string(), 1, "subject '" + e.id + "': degree L=" + std::to_string(c.max_degree()) +
                                            " does not match manifest L=" + std::to_string(manifest.max_degree));
      }
      s.side(side) = std::move(c);
    }
  });
  return cohort;
}

std::string dump_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

void save_report(const nlohmann::json& report, const fs::path& path) {
  io::write_file_atomic(path, dump_json(report));
}

}  // namespace spharm
