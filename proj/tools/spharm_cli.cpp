// spharm_cli: file-based front end to the shape-classification pipeline.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spharm/alignment.hpp"
#include "spharm/baselines.hpp"
#include "spharm/dataset.hpp"
#include "spharm/error.hpp"
#include "spharm/evaluation.hpp"
#include "spharm/group_stats.hpp"
#include "spharm/io.hpp"
#include "spharm/pdm.hpp"
#include "spharm/selection.hpp"
#include "spharm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spharm;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  std::string manifest;
  std::string config;
};

json load_config(const std::string& arg) {
  if (arg.empty()) return json::object();
  const std::string text = arg.front() == '{' ? arg : io::read_file(arg);
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw Error("--config: expected a JSON object");
    return j;
  } catch (const json::parse_error& ex) {
    throw Error("--config: " + std::string(ex.what()));
  }
}

json echo(const std::string& command, const Common& c, const json& config, const json& inputs) {
  return {{"tool", "spharm_cli"}, {"version", SPHARM_VERSION}, {"command", command},
          {"seed", c.seed},       {"config", config},          {"inputs", inputs}};
}

fs::path out_dir(const Common& c) { return c.out.empty() ? fs::path(".") : fs::path(c.out); }

Cohort cohort_from(const Common& c) {
  if (c.manifest.empty()) throw Error("--manifest is required");
  return load_cohort(load_manifest(c.manifest), c.threads);
}

TrainOptions train_options(const json& cfg) {
  TrainOptions t;
  if (cfg.contains("smo")) {
    t.tol = cfg["smo"].value("tol", t.tol);
    t.max_iter = cfg["smo"].value("max_iter", t.max_iter);
  }
  return t;
}

KernelSpec::Kind kernel_kind(const json& cfg) {
  const std::string k = cfg.value("kernel", std::string("rbf"));
  if (k == "rbf") return KernelSpec::Kind::rbf;
  if (k == "linear") return KernelSpec::Kind::linear;
  throw DomainError("unknown kernel '" + k + "' (expected rbf or linear)");
}

/// "sweep": [SelectionMode...], "counts": [int...] or "selection": SelectionMode.
std::vector<SelectionMode> sweep_from(const json& cfg, const SelectionMode& fallback) {
  std::vector<SelectionMode> sweep;
  if (cfg.contains("sweep")) {
    for (const auto& e : cfg["sweep"]) sweep.push_back(SelectionMode::from_json(e));
  } else if (cfg.contains("counts")) {
    for (int n : cfg["counts"].get<std::vector<int>>()) sweep.push_back(SelectionMode::top(n));
  } else if (cfg.contains("selection")) {
    sweep.push_back(SelectionMode::from_json(cfg["selection"]));
  } else {
    sweep.push_back(fallback);
  }
  if (sweep.empty()) throw DomainError("empty selection sweep");
  return sweep;
}

json sweep_json(const std::vector<SelectionMode>& sweep) {
  json a = json::array();
  for (const auto& s : sweep) a.push_back(s.to_json());
  return a;
}

int cmd_simulate(const Common& c) {
  const json cfg = load_config(c.config);
  CohortSpec spec = CohortSpec::from_json(cfg);
  spec.seed = c.seed;
  const SyntheticCohort cohort = make_cohort(spec, c.threads);
  io::StagedOutputs staged;
  write_cohort(cohort, out_dir(c), staged, echo("simulate", c, spec.to_json(), json::object()));
  staged.commit();
  return 0;
}

int cmd_fit(const Common& c, const std::string& input, int degree, const std::string& name) {
  if (input.empty()) throw Error("--input is required");
  const SurfaceSampling samples = load_sampling(input);
  const CoefficientSet coeffs = fit(samples, degree);
  const std::string stem = name.empty() ? fs::path(input).stem().string() : name;
  io::StagedOutputs staged;
  staged.write(out_dir(c) / (stem + ".coef"), format_coeffs(coeffs));
  staged.write(out_dir(c) / "fit_run.json",
               dump_json(echo("fit", c, {{"L", degree}, {"samples", samples.params.size()}}, {{"input", input}})));
  staged.commit();
  return 0;
}

int cmd_pdm(const Common& c, const std::string& input, int subdivision) {
  if (input.empty()) throw Error("--input is required");
  const CoefficientSet coeffs = load_coeffs(input);
  const auto tess = shared_icosphere(subdivision);
  const PdmSurface pdm = coeffs_to_pdm(coeffs, *tess);
  std::string text = "PDM v1 n=" + std::to_string(subdivision) + "\n";
  for (int v = 0; v < pdm.landmark_count(); ++v) {
    text += io::format_double(pdm.landmarks(v, 0)) + " " + io::format_double(pdm.landmarks(v, 1)) + " " +
            io::format_double(pdm.landmarks(v, 2)) + "\n";
  }
  io::StagedOutputs staged;
  staged.write(out_dir(c) / (fs::path(input).stem().string() + ".pdm"), text);
  staged.write(out_dir(c) / "pdm_run.json",
               dump_json(echo("pdm", c, {{"subdivision", subdivision}, {"landmarks", pdm.landmark_count()}},
                              {{"input", input}})));
  staged.commit();
  return 0;
}

int cmd_align(const Common& c) {
  const json cfg = load_config(c.config);
  const int subdivision = cfg.value("subdivision", 20);
  const double tol = cfg.value("tol", 1e-7);
  const int max_iter = cfg.value("max_iter", 100);
  Cohort cohort = cohort_from(c);
  const int k = static_cast<int>(cohort.subjects.size());
  const auto tess = shared_icosphere(subdivision);

  json report = json::object();
  io::StagedOutputs staged;
  for (Side side : {Side::left, Side::right}) {
    std::vector<PdmSurface> pdms(k);
    for (int i = 0; i < k; ++i) {
      auto& s = cohort.subjects[i];
      try {
        s.side(side) = ellipsoid_rotation(remove_translation(s.side(side))).coeffs;
      } catch (const Error& ex) {
        throw Error("subject '" + s.id + "' (" + to_string(side) + "): " + ex.what());
      }
      pdms[i] = coeffs_to_pdm(s.side(side), *tess);
    }
    const TemplateResult t = build_template(pdms, tol, max_iter, c.threads);
    for (int i = 0; i < k; ++i) {
      auto& s = cohort.subjects[i];
      s.side(side) = apply_transform_coeffs(s.side(side), t.transforms[i]);
    }
    PdmSurface tmpl{subdivision, t.tmpl.landmarks};
    std::string text = "PDM v1 n=" + std::to_string(subdivision) + "\n";
    for (int v = 0; v < tmpl.landmark_count(); ++v) {
      text += io::format_double(tmpl.landmarks(v, 0)) + " " + io::format_double(tmpl.landmarks(v, 1)) + " " +
              io::format_double(tmpl.landmarks(v, 2)) + "\n";
    }
    staged.write(out_dir(c) / ("template_" + to_string(side) + ".pdm"), text);
    report[to_string(side)] = {{"iterations", t.tmpl.iteration_count},
                               {"converged", t.tmpl.converged},
                               {"rms_changes", t.tmpl.rms_changes}};
  }

  Manifest m;
  m.cohort = cohort.name;
  m.max_degree = cohort.max_degree;
  for (const auto& s : cohort.subjects) {
    ManifestEntry e{s.id, s.label, s.id + "_left.coef", s.id + "_right.coef"};
    staged.write(out_dir(c) / e.left, format_coeffs(s.left));
    staged.write(out_dir(c) / e.right, format_coeffs(s.right));
    m.subjects.push_back(std::move(e));
  }
  const json run = echo("align", c, {{"subdivision", subdivision}, {"tol", tol}, {"max_iter", max_iter}},
                        {{"manifest", c.manifest}});
  json manifest = manifest_to_json(m);
  manifest["run"] = run;
  staged.write(out_dir(c) / "manifest.json", dump_json(manifest));
  json summary = {{"templates", report}, {"run", run}};
  staged.write(out_dir(c) / "align_run.json", dump_json(summary));
  staged.commit();
  return 0;
}

int cmd_select(const Common& c) {
  const json cfg = load_config(c.config);
  const SelectionMode mode =
      cfg.contains("selection") ? SelectionMode::from_json(cfg["selection"]) : SelectionMode::top(10);
  const Cohort cohort = cohort_from(c);
  const LabeledData data = coefficient_data(cohort);
  const SelectionResult r = select_and_normalize(data.x, data.y, mode);
  json selected = json::array();
  for (std::size_t i = 0; i < r.selected.size(); ++i) {
    const int idx = r.selected[i];
    selected.push_back({{"index", idx},
                        {"feature", data.describe(idx)},
                        {"score", r.scores(idx)},
                        {"p_value", t_to_pvalue(r.scores(idx), r.df)},
                        {"mean", r.zscore.mean(static_cast<Eigen::Index>(i))},
                        {"sd", r.zscore.sd(static_cast<Eigen::Index>(i))}});
  }
  const json doc = {{"selection", mode.to_json()},
                    {"df", r.df},
                    {"n_selected", r.selected.size()},
                    {"selected", selected},
                    {"scores", std::vector<double>(r.scores.data(), r.scores.data() + r.scores.size())},
                    {"run", echo("select", c, {{"selection", mode.to_json()}}, {{"manifest", c.manifest}})}};
  io::StagedOutputs staged;
  staged.write(out_dir(c) / "selection.json", dump_json(doc));
  staged.commit();
  return 0;
}

ClassifierSpec svm_spec(const json& cfg, const GridSpec& grid) {
  ClassifierSpec spec;
  spec.kind = ClassifierSpec::Kind::svm;
  spec.kernel = kernel_kind(cfg);
  spec.grid = grid;
  spec.train = train_options(cfg);
  return spec;
}

void write_grid_outputs(const Common& c, const std::string& command, const GridResult& r, const LabeledData& data,
                        const json& cfg, const std::string& report_name, const std::string& csv_name,
                        io::StagedOutputs& staged) {
  const json run = echo(command, c, cfg, {{"manifest", c.manifest}});
  json report = report_to_json(r.best_report, data);
  report["run"] = run;
  staged.write(out_dir(c) / report_name, dump_json(report));
  staged.write(out_dir(c) / csv_name, surface_csv(r.surface));
}

int cmd_loocv(const Common& c) {
  json cfg = load_config(c.config);
  const GridSpec grid = GridSpec::single(cfg.value("C_exp", 0), cfg.value("gamma_exp", 0));
  const std::vector<SelectionMode> sweep = sweep_from(cfg, SelectionMode::top(10));
  const ClassifierSpec spec = svm_spec(cfg, grid);
  const Cohort cohort = cohort_from(c);
  const LabeledData data = coefficient_data(cohort);
  const GridResult r = grid_search(data, UnivariateReducer{}, sweep, spec, c.threads, c.seed);
  json resolved = {{"classifier", spec.to_json()}, {"sweep", sweep_json(sweep)}};
  io::StagedOutputs staged;
  write_grid_outputs(c, "loocv", r, data, resolved, "report.json", "surface.csv", staged);
  staged.write(out_dir(c) / "loocv_run.json", dump_json(echo("loocv", c, resolved, {{"manifest", c.manifest}})));
  staged.commit();
  return 0;
}

int cmd_grid(const Common& c) {
  json cfg = load_config(c.config);
  const GridSpec grid = cfg.contains("grid") ? GridSpec::from_json(cfg["grid"]) : GridSpec::full();
  const std::vector<SelectionMode> sweep = sweep_from(cfg, SelectionMode::top(10));
  const ClassifierSpec spec = svm_spec(cfg, grid);
  const Cohort cohort = cohort_from(c);
  const LabeledData data = coefficient_data(cohort);
  const GridResult r = grid_search(data, UnivariateReducer{}, sweep, spec, c.threads, c.seed);
  json resolved = {{"classifier", spec.to_json()}, {"sweep", sweep_json(sweep)}};
  io::StagedOutputs staged;
  write_grid_outputs(c, "grid", r, data, resolved, "best.json", "surface.csv", staged);
  staged.write(out_dir(c) / "grid_run.json", dump_json(echo("grid", c, resolved, {{"manifest", c.manifest}})));
  staged.commit();
  return 0;
}

int cmd_stats(const Common& c) {
  const json cfg = load_config(c.config);
  const int n_perm = cfg.value("n_perm", 1000);
  const int subdivision = cfg.value("subdivision", 20);
  const Side side = parse_side(cfg.value("side", std::string("left")));
  const Cohort cohort = cohort_from(c);
  const auto tess = shared_icosphere(subdivision);
  std::vector<PdmSurface> patients, controls;
  Eigen::MatrixX3d mean = Eigen::MatrixX3d::Zero(tess->vertex_count(), 3);
  for (const auto& s : cohort.subjects) {
    PdmSurface p = coeffs_to_pdm(s.side(side), *tess);
    mean += p.landmarks;
    (s.label == Label::patient ? patients : controls).push_back(std::move(p));
  }
  mean /= static_cast<double>(cohort.subjects.size());
  const StatMap map = permutation_map(patients, controls, n_perm, c.seed, c.threads);
  const json resolved = {{"n_perm", n_perm}, {"subdivision", subdivision}, {"side", to_string(side)},
                         {"group1", "patient"}, {"group2", "control"}};
  json meta = stat_map_metadata(map);
  meta["run"] = echo("stats", c, resolved, {{"manifest", c.manifest}});
  io::StagedOutputs staged;
  staged.write(out_dir(c) / "statmap.csv", stat_map_csv(map));
  staged.write(out_dir(c) / "mesh.off", mesh_off(mean, *tess));
  staged.write(out_dir(c) / "mesh_t2.txt", scalar_sidecar(map.t2));
  staged.write(out_dir(c) / "mesh_p_corrected.txt", scalar_sidecar(map.p_corrected));
  staged.write(out_dir(c) / "stats.json", dump_json(meta));
  staged.commit();
  return 0;
}

int cmd_baseline(const Common& c) {
  const json cfg = load_config(c.config);
  PdmPipelineConfig pc;
  pc.variant = parse_pdm_variant(cfg.value("variant", std::string("univariate_svm")));
  pc.subdivision = cfg.value("subdivision", PdmPipelineConfig::default_subdivision(pc.variant));
  pc.sweep = sweep_from(cfg, SelectionMode::top(10));
  pc.svm = svm_spec(cfg, cfg.contains("grid") ? GridSpec::from_json(cfg["grid"]) : GridSpec::full());
  const Cohort cohort = cohort_from(c);
  const PdmPipelineResult r = pdm_pipeline(cohort, pc, c.threads, c.seed);
  json resolved = {{"variant", to_string(pc.variant)},
                   {"subdivision", pc.subdivision},
                   {"sweep", sweep_json(pc.sweep)},
                   {"classifier", pc.variant == PdmVariant::pca_fld ? json{{"kind", "fld"}} : pc.svm.to_json()}};
  io::StagedOutputs staged;
  for (std::size_t i = 0; i < r.parts.size(); ++i) {
    write_grid_outputs(c, "baseline", r.results[i], r.data[i], resolved, "report_" + r.parts[i] + ".json",
                       "surface_" + r.parts[i] + ".csv", staged);
  }
  staged.write(out_dir(c) / "baseline_run.json",
               dump_json(echo("baseline", c, resolved, {{"manifest", c.manifest}})));
  staged.commit();
  return 0;
}

std::string error_kind(const std::exception& ex) {
  if (dynamic_cast<const ParseError*>(&ex)) return "parse error";
  if (dynamic_cast<const FileNotFoundError*>(&ex)) return "file not found";
  if (dynamic_cast<const DimensionError*>(&ex)) return "dimension error";
  if (dynamic_cast<const RankDeficientError*>(&ex)) return "rank deficient";
  if (dynamic_cast<const DegenerateError*>(&ex)) return "degenerate input";
  if (dynamic_cast<const DomainError*>(&ex)) return "invalid argument";
  if (dynamic_cast<const nlohmann::json::exception*>(&ex)) return "config error";
  return "error";
}

void add_common(CLI::App* sub, Common& c, bool manifest) {
  sub->add_option("--seed", c.seed, "Random seed (u64)");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "Output directory");
  sub->add_option("--config", c.config, "JSON config file or inline JSON object");
  if (manifest) sub->add_option("--manifest", c.manifest, "Cohort manifest")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPHARM shape classification pipeline"};
  app.set_version_flag("--version", std::string(SPHARM_VERSION));
  app.require_subcommand(1);
  Common c;
  std::string input, name;
  int degree = 20;
  int subdivision = 20;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort from a CohortSpec JSON");
  add_common(simulate, c, false);
  auto* fit_cmd = app.add_subcommand("fit", "Fit coefficients to a sampled surface");
  add_common(fit_cmd, c, false);
  fit_cmd->add_option("--input", input, "Sampled surface file")->required();
  fit_cmd->add_option("--degree", degree, "Maximum degree L")->check(CLI::Range(0, kMaxDegree));
  fit_cmd->add_option("--name", name, "Output file stem");
  auto* align = app.add_subcommand("align", "Normalise and rigidly align a cohort");
  add_common(align, c, true);
  auto* pdm = app.add_subcommand("pdm", "Sample a coefficient file on a tessellation");
  add_common(pdm, c, false);
  pdm->add_option("--input", input, "Coefficient file")->required();
  pdm->add_option("--subdivision", subdivision, "Icosphere frequency n")->check(CLI::Range(1, kMaxSubdivision));
  auto* select_cmd = app.add_subcommand("select", "Jackknife t feature selection");
  add_common(select_cmd, c, true);
  auto* loocv = app.add_subcommand("loocv", "Leave-one-out evaluation at one (C, gamma)");
  add_common(loocv, c, true);
  auto* grid = app.add_subcommand("grid", "Leave-one-out grid search over (C, gamma)");
  add_common(grid, c, true);
  auto* stats = app.add_subcommand("stats", "Per-vertex Hotelling T2 permutation map");
  add_common(stats, c, true);
  auto* baseline = app.add_subcommand("baseline", "Landmark-feature comparison classifiers");
  add_common(baseline, c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) return cmd_simulate(c);
    if (*fit_cmd) return cmd_fit(c, input, degree, name);
    if (*align) return cmd_align(c);
    if (*pdm) return cmd_pdm(c, input, subdivision);
    if (*select_cmd) return cmd_select(c);
    if (*loocv) return cmd_loocv(c);
    if (*grid) return cmd_grid(c);
    if (*stats) return cmd_stats(c);
    if (*baseline) return cmd_baseline(c);
  } catch (const std::exception& ex) {
    std::cerr << "spharm_cli: " << error_kind(ex) << ": " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
