#include "spellforge/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "spellforge/util.hpp"

namespace spellforge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Split plan
// ---------------------------------------------------------------------------

SplitPlan split_train_holdout(int n, double ratio, std::uint64_t seed, int n_folds) {
  if (n < 2) throw std::invalid_argument("split_train_holdout: need n >= 2");
  if (ratio <= 0.0 || ratio >= 1.0)
    throw std::invalid_argument("split_train_holdout: ratio must be in (0,1)");
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  shuffle_portable(perm, rng);
  const int n_train = static_cast<int>(std::ceil(ratio * n));
  SplitPlan plan;
  plan.seed = seed;
  plan.n_folds = n_folds;
  plan.train.assign(perm.begin(), perm.begin() + n_train);
  plan.holdout.assign(perm.begin() + n_train, perm.end());
  plan.fold.resize(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) plan.fold[static_cast<std::size_t>(i)] = i % n_folds;
  return plan;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double mse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("mse: length mismatch");
  if (y.size() == 0) throw std::invalid_argument("mse: empty vectors");
  return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

std::optional<double> r_squared_corr(const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& yhat) {
  const double n = static_cast<double>(y.size());
  double my = y.mean(), mh = yhat.mean();
  double sy = (y.array() - my).square().sum() / n;
  double sh = (yhat.array() - mh).square().sum() / n;
  if (sy <= 0.0 || sh <= 0.0) return std::nullopt;
  double cov = ((y.array() - my) * (yhat.array() - mh)).sum() / n;
  return cov * cov / (sy * sh);
}

std::pair<double, double> bootstrap_ci(const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& yhat, int n_boot,
                                       double level, std::uint64_t seed) {
  if (n_boot < 100) throw std::invalid_argument("bootstrap_ci: n_boot must be >= 100");
  const std::size_t n = static_cast<std::size_t>(y.size());
  std::vector<double> stats(static_cast<std::size_t>(n_boot));
  Rng rng(seed);
  for (int b = 0; b < n_boot; ++b) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t pick = uniform_below(rng, n);
      double d = y(static_cast<Eigen::Index>(pick)) - yhat(static_cast<Eigen::Index>(pick));
      ss += d * d;
    }
    stats[static_cast<std::size_t>(b)] = ss / static_cast<double>(n);
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  auto pct = [&](double q) {
    // nearest-rank on the sorted bootstrap statistics
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(stats.size())));
    rank = std::min(std::max<std::size_t>(rank, 1), stats.size());
    return stats[rank - 1];
  };
  return {pct(alpha), pct(1.0 - alpha)};
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (count < 1 || lo <= 0 || hi < lo)
    throw std::invalid_argument("geometric_grid: bad parameters");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i)
    g[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  g.back() = hi;
  return g;
}

std::vector<double> linear_grid(double lo, double hi, int count) {
  if (count < 1 || hi < lo) throw std::invalid_argument("linear_grid: bad parameters");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  for (int i = 0; i < count; ++i)
    g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  return g;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

namespace {

FeatureMatrix take_rows(const FeatureMatrix& X, const std::vector<int>& rows) {
  FeatureMatrix out;
  out.names = X.names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.values.row(static_cast<Eigen::Index>(i)) = X.values.row(rows[i]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

// The entry's working design: selected inputs (or every column), plus the
// pairwise products of the explicit input list when requested.
FeatureMatrix working_matrix(const LearnerSpec& spec, const FeatureMatrix& X) {
  FeatureMatrix W;
  if (spec.all_inputs || spec.inputs.empty()) {
    W = X;
  } else {
    W.names = spec.inputs;
    W.values.resize(X.rows(), static_cast<Eigen::Index>(spec.inputs.size()));
    for (std::size_t j = 0; j < spec.inputs.size(); ++j) {
      auto idx = X.find_column(spec.inputs[j]);
      if (!idx)
        throw std::invalid_argument("model '" + spec.name + "': missing column '" +
                                    spec.inputs[j] + "'");
      W.values.col(static_cast<Eigen::Index>(j)) = X.values.col(*idx);
    }
  }
  if (spec.interactions) {
    const auto& base = spec.inputs.empty() ? W.names : spec.inputs;
    W = expand_interactions(W, base);
  }
  return W;
}

std::vector<int> capped_subset(const std::vector<int>& rows, int cap, std::uint64_t seed) {
  if (cap <= 0 || static_cast<int>(rows.size()) <= cap) return rows;
  std::vector<int> s = rows;
  Rng rng(seed);
  shuffle_portable(s, rng);
  s.resize(static_cast<std::size_t>(cap));
  return s;
}

}  // namespace

CvResult cross_validate(const LearnerSpec& spec, const SplitPlan& plan,
                        const FeatureMatrix& X, const OutcomeVector& y,
                        std::uint64_t seed, int threads) {
  CvResult res;
  const int n_folds = plan.n_folds;

  // fold row sets (indices into X)
  std::vector<std::vector<int>> fit_rows(static_cast<std::size_t>(n_folds));
  std::vector<std::vector<int>> val_rows(static_cast<std::size_t>(n_folds));
  for (std::size_t p = 0; p < plan.train.size(); ++p) {
    for (int f = 0; f < n_folds; ++f) {
      if (plan.fold[p] == f)
        val_rows[static_cast<std::size_t>(f)].push_back(plan.train[p]);
      else
        fit_rows[static_cast<std::size_t>(f)].push_back(plan.train[p]);
    }
  }

  using K = LearnerSpec::Kind;
  if (spec.kind == K::kLasso) {
    std::vector<double> grid = spec.lambda_grid;
    if (grid.empty()) grid = geometric_grid(0.0000340, 0.3400355, 100);
    // strongest regularization first for tie-breaking
    std::sort(grid.begin(), grid.end(), std::greater<>());
    const std::size_t cells = grid.size();
    std::vector<std::vector<double>> fold_mse(cells,
                                              std::vector<double>(n_folds, 0.0));
    std::vector<std::vector<char>> fold_fail(cells, std::vector<char>(n_folds, 0));
    parallel_for(static_cast<std::size_t>(n_folds), threads, [&](std::size_t f) {
      FeatureMatrix Xf = take_rows(X, fit_rows[f]);
      Eigen::VectorXd yf = take_rows(y, fit_rows[f]);
      FeatureMatrix Xv = take_rows(X, val_rows[f]);
      Eigen::VectorXd yv = take_rows(y, val_rows[f]);
      try {
        auto path = lasso_path(Xf, yf, grid);  // descending grid, warm starts
        for (std::size_t c = 0; c < cells; ++c)
          fold_mse[c][f] = mse(yv, predict(path[c], Xv));
      } catch (const std::exception&) {
        for (std::size_t c = 0; c < cells; ++c) fold_fail[c][f] = 1;
      }
    });
    bool have = false;
    for (std::size_t c = 0; c < cells; ++c) {
      CvCell cell;
      cell.params["lambda"] = grid[c];
      bool failed = false;
      double acc = 0.0;
      for (int f = 0; f < n_folds; ++f) {
        failed |= fold_fail[c][f] != 0;
        acc += fold_mse[c][f];
      }
      cell.failed = failed;
      cell.cv_mse = failed ? 0.0 : acc / n_folds;
      if (!failed && (!have || cell.cv_mse < res.selected_mse)) {
        have = true;
        res.selected = cell.params;
        res.selected_mse = cell.cv_mse;
      }
      res.cells.push_back(std::move(cell));
    }
    if (!have) throw NumericalFailure("cross_validate: every lambda cell failed");
    return res;
  }

  if (spec.kind == K::kSvr) {
    auto cg = spec.c_grid.empty() ? geometric_grid(0.001, 10.0, 5) : spec.c_grid;
    auto gg = spec.gamma_grid.empty() ? geometric_grid(0.001, 10.0, 5) : spec.gamma_grid;
    auto eg = spec.epsilon_grid.empty() ? geometric_grid(0.001, 10.0, 5)
                                        : spec.epsilon_grid;
    std::sort(cg.begin(), cg.end());  // smaller C first: stronger regularization
    std::sort(gg.begin(), gg.end());
    std::sort(eg.begin(), eg.end(), std::greater<>());  // wider tube first
    struct Cell {
      double C, gamma, eps;
    };
    std::vector<Cell> cells;
    for (double C : cg)
      for (double g : gg)
        for (double e : eg) cells.push_back({C, g, e});
    std::vector<std::vector<double>> fold_mse(cells.size(),
                                              std::vector<double>(n_folds, 0.0));
    std::vector<std::vector<char>> fold_fail(cells.size(),
                                             std::vector<char>(n_folds, 0));
    parallel_for(cells.size() * static_cast<std::size_t>(n_folds), threads,
                 [&](std::size_t task) {
                   std::size_t c = task / static_cast<std::size_t>(n_folds);
                   std::size_t f = task % static_cast<std::size_t>(n_folds);
                   auto rows = capped_subset(fit_rows[f], spec.train_cap,
                                             derive_seed(seed, c, f));
                   FeatureMatrix Xf = take_rows(X, rows);
                   Eigen::VectorXd yf = take_rows(y, rows);
                   FeatureMatrix Xv = take_rows(X, val_rows[f]);
                   Eigen::VectorXd yv = take_rows(y, val_rows[f]);
                   try {
                     SvrHyperParams hp{cells[c].C, cells[c].gamma, cells[c].eps};
                     auto m = svr_fit_scaled(Xf, yf, hp);
                     fold_mse[c][f] = mse(yv, predict(m, Xv));
                   } catch (const std::exception&) {
                     fold_fail[c][f] = 1;
                   }
                 });
    bool have = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      CvCell cell;
      cell.params["C"] = cells[c].C;
      cell.params["gamma"] = cells[c].gamma;
      cell.params["epsilon"] = cells[c].eps;
      bool failed = false;
      double acc = 0.0;
      for (int f = 0; f < n_folds; ++f) {
        failed |= fold_fail[c][f] != 0;
        acc += fold_mse[c][f];
      }
      cell.failed = failed;
      cell.cv_mse = failed ? 0.0 : acc / n_folds;
      if (!failed && (!have || cell.cv_mse < res.selected_mse)) {
        have = true;
        res.selected = cell.params;
        res.selected_mse = cell.cv_mse;
      }
      res.cells.push_back(std::move(cell));
    }
    if (!have) throw NumericalFailure("cross_validate: every SVR cell failed");
    return res;
  }

  if (spec.kind == K::kGbt) {
    std::vector<int> splits = spec.splits_grid;
    if (splits.empty()) splits = {1, 2, 3, 4, 5, 6};
    std::sort(splits.begin(), splits.end());
    const int T = spec.max_trees;
    // one incremental training pass per (splits, fold) yields all tree counts
    std::vector<std::vector<std::vector<double>>> fold_mse(
        splits.size(), std::vector<std::vector<double>>(
                           static_cast<std::size_t>(n_folds),
                           std::vector<double>(static_cast<std::size_t>(T), 0.0)));
    parallel_for(splits.size() * static_cast<std::size_t>(n_folds), threads,
                 [&](std::size_t task) {
                   std::size_t s = task / static_cast<std::size_t>(n_folds);
                   std::size_t f = task % static_cast<std::size_t>(n_folds);
                   FeatureMatrix Xf = take_rows(X, fit_rows[f]);
                   Eigen::VectorXd yf = take_rows(y, fit_rows[f]);
                   FeatureMatrix Xv = take_rows(X, val_rows[f]);
                   Eigen::VectorXd yv = take_rows(y, val_rows[f]);
                   std::uint64_t sub = derive_seed(seed, s, f);
                   TreeEnsemble e;
                   e.names = Xf.names;
                   e.initial = yf.mean();
                   e.shrinkage = spec.shrinkage;
                   e.bag_fraction = spec.bag_fraction;
                   e.max_splits = splits[s];
                   Eigen::VectorXd pv =
                       Eigen::VectorXd::Constant(Xv.rows(), e.initial);
                   for (int t = 0; t < T; ++t) {
                     gbt_grow(e, Xf, yf, 1, sub);
                     const auto& tree = e.trees.back();
                     for (Eigen::Index i = 0; i < Xv.rows(); ++i)
                       pv(i) += e.shrinkage *
                                tree.predict_row(Xv.values.row(i).transpose());
                     fold_mse[s][f][static_cast<std::size_t>(t)] = mse(yv, pv);
                   }
                 });
    bool have = false;
    for (std::size_t s = 0; s < splits.size(); ++s) {
      for (int t = 0; t < T; ++t) {
        CvCell cell;
        cell.params["splits"] = splits[s];
        cell.params["trees"] = t + 1;
        double acc = 0.0;
        for (int f = 0; f < n_folds; ++f)
          acc += fold_mse[s][static_cast<std::size_t>(f)][static_cast<std::size_t>(t)];
        cell.cv_mse = acc / n_folds;
        if (!have || cell.cv_mse < res.selected_mse) {
          have = true;
          res.selected = cell.params;
          res.selected_mse = cell.cv_mse;
        }
        res.cells.push_back(std::move(cell));
      }
    }
    return res;
  }

  // no hyperparameters to tune
  return res;
}

// ---------------------------------------------------------------------------
// Ladder
// ---------------------------------------------------------------------------

namespace {

std::string kind_name(LearnerSpec::Kind k) {
  using K = LearnerSpec::Kind;
  switch (k) {
    case K::kConstant: return "constant";
    case K::kOls: return "ols";
    case K::kLasso: return "lasso";
    case K::kSvr: return "svr";
    case K::kGbt: return "gbt";
    case K::kProbit: return "probit";
    case K::kEnsemble: return "ensemble";
  }
  return "?";
}

LearnerSpec::Kind kind_from_name(const std::string& s) {
  using K = LearnerSpec::Kind;
  if (s == "constant") return K::kConstant;
  if (s == "ols") return K::kOls;
  if (s == "lasso") return K::kLasso;
  if (s == "svr") return K::kSvr;
  if (s == "gbt") return K::kGbt;
  if (s == "probit") return K::kProbit;
  if (s == "ensemble") return K::kEnsemble;
  throw std::invalid_argument("unknown learner kind: '" + s + "'");
}

}  // namespace

Ladder load_ladder_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j = json::parse(in);
  Ladder ladder;
  for (const auto& jm : j.at("models")) {
    LearnerSpec s;
    s.name = jm.at("name");
    s.kind = kind_from_name(jm.at("learner"));
    if (jm.contains("inputs")) {
      if (jm["inputs"].is_string() && jm["inputs"] == "all")
        s.all_inputs = true;
      else
        s.inputs = jm["inputs"].get<std::vector<std::string>>();
    } else {
      s.all_inputs = true;
    }
    s.interactions = jm.value("interactions", false);
    s.components = jm.value("components", std::vector<std::string>{});
    if (jm.contains("grid")) {
      const auto& g = jm["grid"];
      auto axis = [&](const char* key) -> std::vector<double> {
        if (!g.contains(key)) return {};
        const auto& a = g[key];
        if (a.is_array()) return a.get<std::vector<double>>();
        std::string spacing = a.value("spacing", "geometric");
        int count = a.at("count");
        if (spacing == "geometric")
          return geometric_grid(a.at("min"), a.at("max"), count);
        return linear_grid(a.at("min"), a.at("max"), count);
      };
      s.lambda_grid = axis("lambda");
      s.c_grid = axis("C");
      s.gamma_grid = axis("gamma");
      s.epsilon_grid = axis("epsilon");
      if (g.contains("splits")) {
        for (double v : axis("splits")) s.splits_grid.push_back(static_cast<int>(v));
      }
      s.max_trees = g.value("max_trees", 100);
      s.shrinkage = g.value("shrinkage", 1.0);
      s.bag_fraction = g.value("bag_fraction", 0.8);
      s.train_cap = g.value("train_cap", 0);
    }
    ladder.models.push_back(std::move(s));
  }
  return ladder;
}

void save_ladder_json(const std::string& path, const Ladder& ladder) {
  json models = json::array();
  for (const auto& s : ladder.models) {
    json jm;
    jm["name"] = s.name;
    jm["learner"] = kind_name(s.kind);
    if (s.all_inputs)
      jm["inputs"] = "all";
    else
      jm["inputs"] = s.inputs;
    if (s.interactions) jm["interactions"] = true;
    if (!s.components.empty()) jm["components"] = s.components;
    json g;
    if (!s.lambda_grid.empty()) g["lambda"] = s.lambda_grid;
    if (!s.c_grid.empty()) g["C"] = s.c_grid;
    if (!s.gamma_grid.empty()) g["gamma"] = s.gamma_grid;
    if (!s.epsilon_grid.empty()) g["epsilon"] = s.epsilon_grid;
    if (!s.splits_grid.empty()) {
      std::vector<double> sp(s.splits_grid.begin(), s.splits_grid.end());
      g["splits"] = sp;
    }
    if (s.kind == LearnerSpec::Kind::kGbt) {
      g["max_trees"] = s.max_trees;
      g["shrinkage"] = s.shrinkage;
      g["bag_fraction"] = s.bag_fraction;
    }
    if (s.train_cap > 0) g["train_cap"] = s.train_cap;
    if (!g.empty()) jm["grid"] = g;
    models.push_back(std::move(jm));
  }
  json j;
  j["models"] = std::move(models);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

LadderRun run_model_ladder(const FeatureMatrix& X, const OutcomeVector& y,
                           const SplitPlan& plan, const Ladder& ladder,
                           std::uint64_t seed, int threads, int n_boot) {
  LadderRun run;
  Eigen::VectorXd y_train = take_rows(y, plan.train);
  Eigen::VectorXd y_hold = take_rows(y, plan.holdout);

  std::map<std::string, std::size_t> by_name;

  for (std::size_t mi = 0; mi < ladder.models.size(); ++mi) {
    const LearnerSpec& spec = ladder.models[mi];
    using K = LearnerSpec::Kind;
    EvalReport rep;
    rep.name = spec.name;
    Eigen::VectorXd pred_train, pred_hold;
    TrainedModel model = LinearModel{};
    std::optional<StackedModel> stack;

    if (spec.kind == K::kEnsemble) {
      if (spec.components.empty())
        throw std::invalid_argument("ensemble '" + spec.name + "' has no components");
      std::vector<Eigen::VectorXd> ptrain, phold;
      for (const auto& cname : spec.components) {
        auto it = by_name.find(cname);
        if (it == by_name.end())
          throw std::invalid_argument("ensemble '" + spec.name +
                                      "' references unknown model '" + cname + "'");
        ptrain.push_back(run.train_pred[it->second]);
        phold.push_back(run.holdout_pred[it->second]);
      }
      StackedModel sm = stack_ensemble(spec.components, ptrain, y_train);
      pred_train = stacked_predict(sm, ptrain);
      pred_hold = stacked_predict(sm, phold);
      rep.n_predictors = static_cast<int>(spec.components.size());
      stack = sm;
    } else {
      FeatureMatrix W = working_matrix(spec, X);
      FeatureMatrix W_train = take_rows(W, plan.train);
      FeatureMatrix W_hold = take_rows(W, plan.holdout);
      CvResult cv = cross_validate(spec, plan, W, y, derive_seed(seed, mi, 0), threads);
      rep.selected_params = cv.selected;

      switch (spec.kind) {
        case K::kConstant: {
          LinearModel m;
          m.intercept = y_train.mean();
          m.coef.resize(0);
          model = m;
          rep.n_predictors = 0;
          break;
        }
        case K::kOls: {
          LinearModel m = ols_fit(W_train, y_train);
          rep.n_predictors =
              static_cast<int>(m.names.size() - m.dropped.size());
          model = m;
          break;
        }
        case K::kLasso: {
          // warm path down the evaluated grid to the selected penalty
          double sel_lambda = cv.selected.at("lambda");
          std::vector<double> down;
          for (const auto& cell : cv.cells) {
            double lam = cell.params.at("lambda");
            if (lam >= sel_lambda) down.push_back(lam);
          }
          std::sort(down.begin(), down.end(), std::greater<>());
          SparseLinearModel m = lasso_path(W_train, y_train, down).back();
          post_lasso_ols(m, W_train, y_train);
          rep.n_predictors = m.support_size();
          model = m;
          break;
        }
        case K::kSvr: {
          auto rows_all = plan.train;
          auto rows = capped_subset(rows_all, spec.train_cap,
                                    derive_seed(seed, mi, 1));
          FeatureMatrix Wc = take_rows(W, rows);
          Eigen::VectorXd yc = take_rows(y, rows);
          SvrHyperParams hp{cv.selected.at("C"), cv.selected.at("gamma"),
                            cv.selected.at("epsilon")};
          KernelModel m = svr_fit_scaled(Wc, yc, hp);
          rep.n_predictors = static_cast<int>(W.names.size());
          model = m;
          break;
        }
        case K::kGbt: {
          int splits = static_cast<int>(cv.selected.at("splits"));
          int trees = static_cast<int>(cv.selected.at("trees"));
          TreeEnsemble m = gbt_fit(W_train, y_train, splits, trees, spec.shrinkage,
                                   spec.bag_fraction, derive_seed(seed, mi, 2));
          int used = 0;
          for (const auto& [name, inf] : gbt_influence(m))
            if (inf > 0) ++used;
          rep.n_predictors = used;
          model = m;
          break;
        }
        case K::kProbit: {
          ProbitModel m = fractional_probit_fit(W_train, y_train);
          rep.n_predictors = static_cast<int>(m.names.size());
          model = m;
          break;
        }
        default:
          break;
      }
      pred_train = predict(model, W_train);
      pred_hold = predict(model, W_hold);
    }

    rep.mse = mse(y_hold, pred_hold);
    rep.r_squared = r_squared_corr(y_hold, pred_hold);
    rep.n_bootstrap = n_boot;
    auto [lo, hi] = bootstrap_ci(y_hold, pred_hold, n_boot, 0.95,
                                 derive_seed(seed, mi, 3));
    rep.ci_low = lo;
    rep.ci_high = hi;

    by_name[spec.name] = mi;
    run.reports.push_back(std::move(rep));
    run.train_pred.push_back(std::move(pred_train));
    run.holdout_pred.push_back(std::move(pred_hold));
    run.models.push_back(std::move(model));
    run.stacks.push_back(std::move(stack));
  }
  return run;
}

void save_report_json(const std::string& path, const std::vector<EvalReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json jr;
    jr["name"] = r.name;
    jr["n_predictors"] = r.n_predictors;
    jr["mse"] = r.mse;
    if (r.r_squared) jr["r_squared"] = *r.r_squared;
    jr["ci_low"] = r.ci_low;
    jr["ci_high"] = r.ci_high;
    jr["n_bootstrap"] = r.n_bootstrap;
    if (!r.selected_params.empty()) jr["selected_params"] = r.selected_params;
    arr.push_back(std::move(jr));
  }
  json j;
  j["models"] = std::move(arr);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

std::vector<EvalReport> load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j = json::parse(in);
  std::vector<EvalReport> reports;
  for (const auto& jr : j.at("models")) {
    EvalReport r;
    r.name = jr.at("name");
    r.n_predictors = jr.at("n_predictors");
    r.mse = jr.at("mse");
    if (jr.contains("r_squared")) r.r_squared = jr["r_squared"].get<double>();
    r.ci_low = jr.at("ci_low");
    r.ci_high = jr.at("ci_high");
    r.n_bootstrap = jr.at("n_bootstrap");
    if (jr.contains("selected_params"))
      r.selected_params = jr["selected_params"].get<std::map<std::string, double>>();
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace spellforge
