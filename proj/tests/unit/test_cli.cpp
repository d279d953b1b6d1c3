#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "spharm/dataset.hpp"
#include "spharm/io.hpp"
#include "spharm/pdm.hpp"

using namespace spharm;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(SPHARM_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.output += buf.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spharm_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = io::read_file(e.path());
  }
  return files;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// A small planted cohort shared by the tests.
const fs::path& cohort_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("cohort");
    const std::string cfg =
        R"({"L": 6, "patients": 8, "controls": 8, "noise": 0.1, "subdivision": 8,)"
        R"( "rotation_jitter": 0.2, "translation_jitter": 1.0,)"
        R"( "deformations": [{"theta": 1.0, "phi": 0.5, "width": 0.5, "amplitude": 2.0}]})";
    const RunResult r = run("simulate --seed 5 --out " + quote(d) + " --config '" + cfg + "'");
    EXPECT_EQ(r.status, 0) << r.output;
    return d;
  }();
  return dir;
}

}  // namespace

TEST(Cli, SimulateWritesManifestAndTruth) {
  const fs::path d = cohort_dir();
  const Cohort c = load_cohort(load_manifest(d / "manifest.json"));
  EXPECT_EQ(c.subjects.size(), 16u);
  EXPECT_EQ(c.max_degree, 6);
  const auto truth = nlohmann::json::parse(io::read_file(d / "truth.json"));
  EXPECT_EQ(truth["run"]["seed"], 5);
  EXPECT_EQ(truth["run"]["command"], "simulate");
  EXPECT_TRUE(truth["run"].contains("version"));
  EXPECT_FALSE(truth["deformations"][0]["affected_vertices"].empty());
}

TEST(Cli, PdmAtFrequency20Has4002Landmarks) {
  const fs::path out = scratch("pdm");
  const RunResult r =
      run("pdm --input " + quote(cohort_dir() / "P000_left.coef") + " --subdivision 20 --out " + quote(out));
  ASSERT_EQ(r.status, 0) << r.output;
  const std::string text = io::read_file(out / "P000_left.pdm");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4002 + 1);
  EXPECT_TRUE(text.starts_with("PDM v1 n=20\n"));
  EXPECT_EQ(load_pdm(out / "P000_left.pdm").landmark_count(), 4002);
}

TEST(Cli, FitRecoversCoefficients) {
  const fs::path out = scratch("fit");
  const CoefficientSet c = load_coeffs(cohort_dir() / "C003_right.coef");
  const auto tess = icosphere(8);
  const PdmSurface p = coeffs_to_pdm(c, tess);
  SurfaceSampling s;
  s.params = tess.params;
  s.points = p.landmarks;
  {
    std::ofstream f(out / "surface.txt");
    f << "# theta phi x y z\n" << format_sampling(s);
  }
  const RunResult r = run("fit --input " + quote(out / "surface.txt") + " --degree 6 --out " + quote(out));
  ASSERT_EQ(r.status, 0) << r.output;
  const CoefficientSet back = load_coeffs(out / "surface.coef");
  EXPECT_LE((back.values() - c.values()).cwiseAbs().maxCoeff(), 1e-8 * c.values().cwiseAbs().maxCoeff());
}

TEST(Cli, RunsAreByteIdenticalAcrossRepeatsAndThreads) {
  const fs::path cohort = cohort_dir();
  const std::string manifest = " --manifest " + quote(cohort / "manifest.json");
  const std::vector<std::string> commands = {
      "simulate --seed 9 --config '{\"L\": 4, \"patients\": 5, \"controls\": 5, \"noise\": 0.2, \"subdivision\": 6}'",
      "pdm --subdivision 6 --input " + quote(cohort / "P001_left.coef"),
      "align --config '{\"subdivision\": 6}'" + manifest,
      "select --config '{\"selection\": {\"mode\": \"count\", \"count\": 5}}'" + manifest,
      "loocv --seed 3 --config '{\"counts\": [3, 6], \"C_exp\": 1, \"gamma_exp\": -3}'" + manifest,
      "grid --seed 3 --config '{\"counts\": [4], \"grid\": {\"C_exp\": [0, 3], \"gamma_exp\": [-5, -2]}}'" + manifest,
      "stats --seed 3 --config '{\"n_perm\": 150, \"subdivision\": 4}'" + manifest,
      "baseline --seed 3 --config '{\"variant\": \"pca_fld\", \"subdivision\": 3, \"counts\": [2, 4]}'" + manifest,
  };
  for (const std::string& cmd : commands) {
    std::vector<std::map<std::string, std::string>> outputs;
    for (const char* threads : {"1", "1", "3"}) {
      const fs::path out = scratch("det");
      const RunResult r = run(cmd + " --threads " + threads + " --out " + quote(out));
      ASSERT_EQ(r.status, 0) << cmd << "\n" << r.output;
      outputs.push_back(snapshot(out));
    }
    ASSERT_FALSE(outputs[0].empty()) << cmd;
    EXPECT_EQ(outputs[0], outputs[1]) << cmd;
    EXPECT_EQ(outputs[0], outputs[2]) << cmd;
  }
}

TEST(Cli, ReportsEmbedEcho) {
  const fs::path out = scratch("echo");
  const RunResult r = run("loocv --seed 77 --manifest " + quote(cohort_dir() / "manifest.json") + " --out " +
                          quote(out) + " --config '{\"selection\": {\"mode\": \"count\", \"count\": 4}}'");
  ASSERT_EQ(r.status, 0) << r.output;
  const auto report = nlohmann::json::parse(io::read_file(out / "report.json"));
  EXPECT_EQ(report["run"]["seed"], 77);
  EXPECT_EQ(report["run"]["tool"], "spharm_cli");
  EXPECT_EQ(report["run"]["config"]["sweep"][0]["count"], 4);
  EXPECT_EQ(report["subjects"].size(), 16u);
  const std::string csv = io::read_file(out / "surface.csv");
  EXPECT_TRUE(csv.starts_with("C_exp,gamma_exp,n_features,accuracy\n"));
}

TEST(Cli, NullCohortIsNearChance) {
  const fs::path d = scratch("null");
  const RunResult sim = run("simulate --seed 21 --out " + quote(d) +
                            " --config '{\"L\": 8, \"patients\": 24, \"controls\": 24, \"noise\": 0.3,"
                            " \"subdivision\": 8}'");
  ASSERT_EQ(sim.status, 0) << sim.output;
  const fs::path out = scratch("null_out");
  const RunResult r = run("loocv --manifest " + quote(d / "manifest.json") + " --out " + quote(out) +
                          " --config '{\"C_exp\": 0, \"gamma_exp\": -3}'");
  ASSERT_EQ(r.status, 0) << r.output;
  const double acc = nlohmann::json::parse(io::read_file(out / "report.json"))["metrics"]["accuracy"];
  EXPECT_GE(acc, 0.25);
  EXPECT_LE(acc, 0.75);
}

TEST(Cli, UsageErrorsNameTheFlag) {
  RunResult r = run("loocv --out /tmp");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("--manifest"), std::string::npos) << r.output;
  r = run("pdm --input x.coef --frobnicate 3");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("--frobnicate"), std::string::npos) << r.output;
  r = run("pdm --input x.coef --subdivision 0");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find("--subdivision"), std::string::npos) << r.output;
  r = run("");
  EXPECT_NE(r.status, 0);
}

TEST(Cli, InputErrorsAreStructured) {
  const fs::path d = scratch("bad_inputs");
  {
    std::ofstream f(d / "broken.coef");
    f << "SPHARM v1 L=1\n0 0 1 2 3\n1 -1 1 2 oops\n";
  }
  RunResult r = run("pdm --input " + quote(d / "broken.coef") + " --out " + quote(d));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("broken.coef"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("broken.coef:3:"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("parse error"), std::string::npos) << r.output;

  {
    std::ofstream f(d / "manifest.json");
    f << R"({"cohort": "x", "L": 6, "subjects": [
      {"id": "P000", "label": "patient", "left": ")" << (cohort_dir() / "P000_left.coef").string()
      << R"(", "right": ")" << (cohort_dir() / "P000_right.coef").string() << R"("},
      {"id": "lost-subject", "label": "control", "left": "nowhere.coef", "right": "nowhere.coef"}]})";
  }
  r = run("select --manifest " + quote(d / "manifest.json") + " --out " + quote(d / "out"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("lost-subject"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(d / "out" / "selection.json"));
}

TEST(Cli, FoldErrorsNameSubjectAndLeaveNoOutputs) {
  const fs::path d = scratch("tiny");
  ASSERT_EQ(run("simulate --out " + quote(d) +
                " --config '{\"L\": 3, \"patients\": 3, \"controls\": 5, \"noise\": 0.2, \"subdivision\": 4}'")
                .status,
            0);
  const fs::path out = scratch("tiny_out");
  const RunResult r = run("loocv --manifest " + quote(d / "manifest.json") + " --out " + quote(out));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("fold 0 (subject 'P000')"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::is_empty(out));
}

TEST(Cli, AlignFailureLeavesNoPartialOutputs) {
  const fs::path d = scratch("degenerate");
  for (const char* id : {"A", "B", "C", "D"}) {
    CoefficientSet c = load_coeffs(cohort_dir() / "P000_left.coef");
    if (std::string(id) == "D") c = CoefficientSet(6);  // collapses to a point
    save_coeffs(c, d / (std::string(id) + ".coef"));
  }
  {
    std::ofstream f(d / "manifest.json");
    f << R"({"cohort": "x", "L": 6, "subjects": [
      {"id": "a", "label": "patient", "left": "A.coef", "right": "A.coef"},
      {"id": "b", "label": "patient", "left": "B.coef", "right": "B.coef"},
      {"id": "c", "label": "control", "left": "C.coef", "right": "C.coef"},
      {"id": "d", "label": "control", "left": "D.coef", "right": "D.coef"}]})";
  }
  const fs::path out = scratch("degenerate_out");
  const RunResult r = run("align --config '{\"subdivision\": 4}' --manifest " + quote(d / "manifest.json") +
                          " --out " + quote(out));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("subject 'd'"), std::string::npos) << r.output;
  EXPECT_TRUE(fs::is_empty(out)) << snapshot(out).size();
}
