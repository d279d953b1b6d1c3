#include "spharm/evaluation.hpp"

#include <cmath>
#include <tuple>

#include "spharm/baselines.hpp"
#include "spharm/error.hpp"
#include "spharm/io.hpp"
#include "spharm/parallel.hpp"

namespace spharm {

Metrics metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DimensionError("metrics: prediction and truth lengths differ");
  int pos = 0, neg = 0, tp = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      ++pos;
      tp += predicted[i] == 1;
    } else {
      ++neg;
      tn += predicted[i] == -1;
    }
  }
  if (pos == 0 || neg == 0) throw DegenerateError("metrics: both classes must be present");
  Metrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(truth.size());
  m.error = 1.0 - m.accuracy;
  m.sensitivity = static_cast<double>(tp) / pos;
  m.specificity = static_cast<double>(tn) / neg;
  return m;
}

LabeledData LabeledData::without(int row) const {
  LabeledData out;
  out.describe = describe;
  const int k = size();
  out.x.resize(k - 1, x.cols());
  for (int i = 0, r = 0; i < k; ++i) {
    if (i == row) continue;
    out.ids.push_back(ids[i]);
    out.y.push_back(y[i]);
    out.x.row(r++) = x.row(i);
  }
  return out;
}

namespace {

class UnivariateReduction : public FoldReduction {
 public:
  UnivariateReduction(const Eigen::MatrixXd& train, std::span<const int> y)
      : train_(train), scores_(jackknife_t_scores(train, y)), df_(jackknife_df(static_cast<int>(train.rows()))) {}

  ReducedFold reduce(const SelectionMode& entry, const Eigen::VectorXd& test) const override {
    ReducedFold out;
    out.selected = select(scores_, entry, df_).selected;
    const Eigen::MatrixXd sel = take_columns(train_, out.selected);
    const ZScoreParams z = zscore_fit(sel);
    out.train = zscore_apply(sel, z);
    out.test = zscore_apply(take_entries(test, out.selected), z);
    out.n_features = static_cast<int>(out.selected.size());
    return out;
  }

 private:
  const Eigen::MatrixXd& train_;
  Eigen::VectorXd scores_;
  double df_;
};

struct Cells {
  std::vector<int> c_exps;
  std::vector<int> gamma_exps;
  std::vector<double> cs;
  std::vector<double> gammas;
};

Cells cells_for(const ClassifierSpec& spec) {
  Cells cells;
  if (spec.kind == ClassifierSpec::Kind::fld) {
    cells.c_exps = {0};
    cells.gamma_exps = {0};
    cells.cs = {1.0};
    cells.gammas = {0.0};
    return cells;
  }
  cells.c_exps = spec.grid.c_exps();
  for (int e : cells.c_exps) cells.cs.push_back(spec.grid.c_value(e));
  if (spec.kernel == KernelSpec::Kind::linear) {
    cells.gamma_exps = {0};
    cells.gammas = {0.0};
  } else {
    cells.gamma_exps = spec.grid.gamma_exps();
    for (int e : cells.gamma_exps) cells.gammas.push_back(spec.grid.gamma_value(e));
  }
  return cells;
}

struct FoldOutput {
  std::vector<std::vector<int>> selected;  // per sweep entry
  std::vector<int> n_features;             // per sweep entry
  std::vector<double> decision;            // per (entry, c, gamma)
};

FoldOutput run_fold(const LabeledData& data, int fold, const FoldReducer& reducer,
                    std::span<const SelectionMode> sweep, const ClassifierSpec& spec, const Cells& cells) {
  const LabeledData train = data.without(fold);
  const Eigen::VectorXd test = data.x.row(fold).transpose();
  const auto reduction = reducer.prepare(train.x, train.y);

  FoldOutput out;
  out.decision.reserve(sweep.size() * cells.cs.size() * cells.gammas.size());
  for (const auto& entry : sweep) {
    ReducedFold rf = reduction->reduce(entry, test);
    out.selected.push_back(rf.selected);
    out.n_features.push_back(rf.n_features);
    if (spec.kind == ClassifierSpec::Kind::fld) {
      const FldModel model = fld_train(rf.train, train.y);
      out.decision.push_back(fld_decision(model, rf.test));
      continue;
    }
    // decisions stored C-major within each entry
    std::vector<double> block(cells.cs.size() * cells.gammas.size());
    for (std::size_t g = 0; g < cells.gammas.size(); ++g) {
      const KernelSpec kernel =
          spec.kernel == KernelSpec::Kind::linear ? KernelSpec::linear() : KernelSpec::rbf(cells.gammas[g]);
      const Eigen::MatrixXd gram = kernel_matrix(kernel, rf.train, rf.train);
      const Eigen::VectorXd krow = kernel_matrix(kernel, rf.train, rf.test.transpose()).col(0);
      for (std::size_t c = 0; c < cells.cs.size(); ++c) {
        const SvmModel model = train_precomputed(gram, rf.train, train.y, cells.cs[c], kernel, spec.train);
        block[c * cells.gammas.size() + g] = decision_value_from_kernel(model, krow);
      }
    }
    out.decision.insert(out.decision.end(), block.begin(), block.end());
  }
  return out;
}

std::vector<FoldOutput> run_folds(const LabeledData& data, const FoldReducer& reducer,
                                  std::span<const SelectionMode> sweep, const ClassifierSpec& spec, const Cells& cells,
                                  int threads) {
  if (data.x.rows() != data.size() || static_cast<int>(data.ids.size()) != data.size()) {
    throw DimensionError("labeled data: ids, rows and labels differ in length");
  }
  int pos = 0, neg = 0;
  for (int v : data.y) (v == 1 ? pos : neg)++;
  if (pos < 2 || neg < 2) throw DegenerateError("LOOCV needs at least 2 subjects per class");

  std::vector<FoldOutput> folds(data.size());
  parallel_for(folds.size(), threads, [&](std::size_t k) {
    try {
      folds[k] = run_fold(data, static_cast<int>(k), reducer, sweep, spec, cells);
    } catch (const Error& ex) {
      throw Error("fold " + std::to_string(k) + " (subject '" + data.ids[k] + "'): " + ex.what());
    }
  });
  return folds;
}

CvReport make_report(const LabeledData& data, const std::vector<FoldOutput>& folds, std::size_t entry,
                     std::size_t cell_offset, nlohmann::json config, std::uint64_t seed) {
  CvReport report;
  report.config = std::move(config);
  report.seed = seed;
  std::vector<int> predicted;
  for (int k = 0; k < data.size(); ++k) {
    SubjectOutcome o;
    o.id = data.ids[k];
    o.truth = data.y[k];
    o.decision = folds[k].decision[cell_offset];
    o.predicted = sign_label(o.decision);
    o.selected = folds[k].selected[entry];
    o.n_features = folds[k].n_features[entry];
    predicted.push_back(o.predicted);
    report.subjects.push_back(std::move(o));
  }
  report.metrics = metrics(predicted, data.y);
  return report;
}

nlohmann::json base_config(const FoldReducer& reducer, const ClassifierSpec& spec) {
  nlohmann::json j;
  j["reducer"] = reducer.to_json();
  j["classifier"] = spec.to_json();
  j["protocol"] = "leave-one-out; selection, z-score and PCA refit on each training fold";
  j["t_statistic"] = "Welch unequal-variance t, jackknife score = min over replicates of |t|";
  return j;
}

}  // namespace

LabeledData coefficient_data(const Cohort& cohort) {
  LabeledData data;
  data.ids = cohort.ids();
  data.y = cohort.labels();
  data.x = cohort.feature_matrix();
  const int degree = cohort.max_degree;
  data.describe = [degree](int idx) { return to_json(feature_tuple(idx, degree)); };
  return data;
}

std::unique_ptr<FoldReduction> UnivariateReducer::prepare(const Eigen::MatrixXd& train, std::span<const int> y) const {
  return std::make_unique<UnivariateReduction>(train, y);
}

std::vector<int> GridSpec::c_exps() const {
  if (c_exp_max < c_exp_min) throw DomainError("empty C exponent range");
  std::vector<int> out;
  for (int e = c_exp_min; e <= c_exp_max; ++e) out.push_back(e);
  return out;
}

std::vector<int> GridSpec::gamma_exps() const {
  if (gamma_exp_max < gamma_exp_min) throw DomainError("empty gamma exponent range");
  std::vector<int> out;
  for (int e = gamma_exp_min; e <= gamma_exp_max; ++e) out.push_back(e);
  return out;
}

double GridSpec::c_value(int e) const { return std::ldexp(1.0, e); }
double GridSpec::gamma_value(int e) const { return gamma_scale * std::ldexp(1.0, e); }

nlohmann::json GridSpec::to_json() const {
  return {{"C_exp", {c_exp_min, c_exp_max}}, {"gamma_exp", {gamma_exp_min, gamma_exp_max}},
          {"gamma_scale", gamma_scale}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  GridSpec g;
  if (j.contains("C_exp")) {
    g.c_exp_min = j["C_exp"].at(0).get<int>();
    g.c_exp_max = j["C_exp"].at(1).get<int>();
  }
  if (j.contains("gamma_exp")) {
    g.gamma_exp_min = j["gamma_exp"].at(0).get<int>();
    g.gamma_exp_max = j["gamma_exp"].at(1).get<int>();
  }
  g.gamma_scale = j.value("gamma_scale", 1.0);
  if (!(g.gamma_scale > 0.0)) throw DomainError("gamma_scale must be positive");
  g.c_exps();
  g.gamma_exps();
  return g;
}

nlohmann::json ClassifierSpec::to_json() const {
  if (kind == Kind::fld) return {{"kind", "fld"}, {"threshold", "midpoint of projected class means"}};
  return {{"kind", "svm"},
          {"kernel", kernel == KernelSpec::Kind::linear ? "linear" : "rbf"},
          {"grid", grid.to_json()},
          {"smo", {{"tol", train.tol}, {"max_iter", train.max_iter}, {"working_set", "maximal violating pair"}}}};
}

nlohmann::json report_to_json(const CvReport& report, const LabeledData& data) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : report.subjects) {
    nlohmann::json sel = nlohmann::json::array();
    for (int idx : s.selected) {
      sel.push_back(data.describe ? data.describe(idx) : nlohmann::json(idx));
    }
    subjects.push_back({{"id", s.id},
                        {"label", s.truth == 1 ? "patient" : "control"},
                        {"predicted", s.predicted == 1 ? "patient" : "control"},
                        {"decision_value", s.decision},
                        {"n_selected", s.n_features},
                        {"selected_features", sel}});
  }
  return {{"metrics",
           {{"accuracy", report.metrics.accuracy},
            {"error", report.metrics.error},
            {"sensitivity", report.metrics.sensitivity},
            {"specificity", report.metrics.specificity}}},
          {"subjects", subjects},
          {"config", report.config},
          {"seed", report.seed}};
}

std::string surface_csv(const std::vector<SurfaceCell>& surface) {
  std::string out = "C_exp,gamma_exp,n_features,accuracy\n";
  for (const auto& c : surface) {
    out += std::to_string(c.c_exp) + "," + std::to_string(c.gamma_exp) + ",";
    out += c.entry.kind == SelectionMode::Kind::count ? std::to_string(c.entry.count)
                                                      : io::format_double(c.entry.p_threshold);
    out += "," + io::format_double(c.accuracy) + "\n";
  }
  return out;
}

GridResult grid_search(const LabeledData& data, const FoldReducer& reducer, std::span<const SelectionMode> sweep,
                       const ClassifierSpec& classifier, int threads, std::uint64_t seed) {
  if (sweep.empty()) throw DomainError("grid search needs at least one sweep entry");
  const Cells cells = cells_for(classifier);
  const auto folds = run_folds(data, reducer, sweep, classifier, cells, threads);

  GridResult result;
  result.sweep_outside_loop = sweep.size() > 1;
  const std::size_t nc = cells.cs.size(), ng = cells.gammas.size();
  // lexicographic key: accuracy desc, then count (sweep position for
  // threshold entries), C exponent, gamma exponent ascending
  auto size_key = [&](std::size_t e) {
    return sweep[e].kind == SelectionMode::Kind::count ? sweep[e].count : static_cast<int>(e);
  };
  std::size_t best_offset = 0, best_entry = 0;
  int best_correct = -1;
  for (std::size_t e = 0; e < sweep.size(); ++e) {
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t g = 0; g < ng; ++g) {
        const std::size_t offset = (e * nc + c) * ng + g;
        int correct = 0;
        for (int k = 0; k < data.size(); ++k) correct += sign_label(folds[k].decision[offset]) == data.y[k];
        SurfaceCell cell{cells.c_exps[c], cells.gamma_exps[g], sweep[e],
                         static_cast<double>(correct) / static_cast<double>(data.size())};
        result.surface.push_back(cell);
        const bool better =
            correct > best_correct ||
            (correct == best_correct &&
             std::tuple(size_key(e), cell.c_exp, cell.gamma_exp) <
                 std::tuple(size_key(best_entry), result.best.c_exp, result.best.gamma_exp));
        if (better) {
          best_correct = correct;
          best_offset = offset;
          best_entry = e;
          result.best = cell;
        }
      }
    }
  }

  nlohmann::json config = base_config(reducer, classifier);
  config["selection"] = sweep[best_entry].to_json();
  config["C_exp"] = result.best.c_exp;
  config["C"] = cells.cs[(best_offset / ng) % nc];
  if (classifier.kind == ClassifierSpec::Kind::svm && classifier.kernel == KernelSpec::Kind::rbf) {
    config["gamma_exp"] = result.best.gamma_exp;
    config["gamma"] = cells.gammas[best_offset % ng];
  }
  config["tie_break"] = "highest accuracy, then smaller feature count, then smaller C, then smaller gamma";
  if (result.sweep_outside_loop) {
    config["bias_note"] =
        "feature count and (C, gamma) chosen by maximising LOOCV accuracy over the sweep; the reported accuracy "
        "is optimistically biased";
  }
  result.best_report = make_report(data, folds, best_entry, best_offset, std::move(config), seed);
  return result;
}

CvReport loocv_with(const LabeledData& data, const FoldReducer& reducer, const SelectionMode& entry,
                    const ClassifierSpec& classifier, double C, double gamma, int threads, std::uint64_t seed) {
  Cells cells;
  cells.c_exps = {0};
  cells.gamma_exps = {0};
  cells.cs = {C};
  cells.gammas = {gamma};
  if (classifier.kind == ClassifierSpec::Kind::svm && !(C > 0.0)) throw DomainError("SVM cost C must be positive");
  const std::vector<SelectionMode> sweep{entry};
  const auto folds = run_folds(data, reducer, sweep, classifier, cells, threads);
  nlohmann::json config = base_config(reducer, classifier);
  config.erase("classifier");
  config["classifier"] = classifier.kind == ClassifierSpec::Kind::fld
                             ? classifier.to_json()
                             : nlohmann::json{{"kind", "svm"},
                                              {"kernel", classifier.kernel == KernelSpec::Kind::linear ? "linear" : "rbf"},
                                              {"smo", {{"tol", classifier.train.tol}, {"max_iter", classifier.train.max_iter}}}};
  config["selection"] = entry.to_json();
  if (classifier.kind == ClassifierSpec::Kind::svm) {
    config["C"] = C;
    if (classifier.kernel == KernelSpec::Kind::rbf) config["gamma"] = gamma;
  }
  return make_report(data, folds, 0, 0, std::move(config), seed);
}

CvReport loocv(const LabeledData& data, const LoocvConfig& config, int threads, std::uint64_t seed) {
  ClassifierSpec spec;
  spec.kind = ClassifierSpec::Kind::svm;
  spec.kernel = config.kernel.kind;
  spec.train = config.train;
  return loocv_with(data, UnivariateReducer{}, config.selection, spec, config.C, config.kernel.gamma, threads, seed);
}

}  // namespace spharm
