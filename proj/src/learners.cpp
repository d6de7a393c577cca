#include "spellforge/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "spellforge/util.hpp"

namespace spellforge {

using json = nlohmann::json;

namespace {

Eigen::MatrixXd gather_columns(const FeatureMatrix& X,
                               const std::vector<std::string>& names) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = X.values.col(X.column(names[j]));
  return out;
}

// Minimum-norm least squares on a design that already carries its intercept
// column. Also reports which columns beyond the numerical rank were pivoted
// out (exactly collinear with earlier-pivoted ones).
Eigen::VectorXd min_norm_ls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y,
                            std::vector<Eigen::Index>* rank_deficient = nullptr) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  if (rank_deficient) {
    rank_deficient->clear();
    if (cod.rank() < A.cols()) {
      const auto& perm = cod.colsPermutation().indices();
      for (Eigen::Index p = cod.rank(); p < A.cols(); ++p)
        rank_deficient->push_back(perm(p));
    }
  }
  return cod.solve(y);
}

}  // namespace

// ---------------------------------------------------------------------------
// OLS
// ---------------------------------------------------------------------------

LinearModel ols_fit_columns(const FeatureMatrix& X, const OutcomeVector& y,
                            const std::vector<std::string>& columns) {
  if (X.rows() == 0 || y.size() == 0) throw std::invalid_argument("ols_fit: empty data");
  if (X.rows() != y.size()) throw std::invalid_argument("ols_fit: row mismatch");
  const Eigen::Index k = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd A(X.rows(), k + 1);
  A.col(0).setOnes();
  if (k > 0) A.rightCols(k) = gather_columns(X, columns);
  std::vector<Eigen::Index> deficient;
  Eigen::VectorXd beta = min_norm_ls(A, y, &deficient);
  if (!deficient.empty()) {
    // refit on the surviving columns so dropped ones carry exact zeros
    std::vector<char> drop(static_cast<std::size_t>(k + 1), 0);
    for (Eigen::Index d : deficient) drop[static_cast<std::size_t>(d)] = 1;
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j <= k; ++j)
      if (!drop[static_cast<std::size_t>(j)]) kept.push_back(j);
    Eigen::MatrixXd Ak(A.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j)
      Ak.col(static_cast<Eigen::Index>(j)) = A.col(kept[j]);
    Eigen::VectorXd bk = min_norm_ls(Ak, y);
    beta.setZero();
    for (std::size_t j = 0; j < kept.size(); ++j)
      beta(kept[j]) = bk(static_cast<Eigen::Index>(j));
  }
  LinearModel m;
  m.intercept = beta(0);
  m.names = columns;
  m.coef = beta.tail(k);
  for (Eigen::Index d : deficient)
    if (d > 0) m.dropped.push_back(columns[static_cast<std::size_t>(d - 1)]);
  return m;
}

LinearModel ols_fit(const FeatureMatrix& X, const OutcomeVector& y) {
  return ols_fit_columns(X, y, X.names);
}

// ---------------------------------------------------------------------------
// LASSO
// ---------------------------------------------------------------------------

int SparseLinearModel::support_size() const {
  int n = 0;
  for (Eigen::Index j = 0; j < coef.size(); ++j)
    if (coef(j) != 0.0) ++n;
  return n;
}

std::vector<std::string> SparseLinearModel::support() const {
  std::vector<std::string> s;
  for (Eigen::Index j = 0; j < coef.size(); ++j)
    if (coef(j) != 0.0) s.push_back(names[static_cast<std::size_t>(j)]);
  return s;
}

namespace {

// Standardized design shared across a lambda path.
struct LassoWork {
  Eigen::MatrixXd Z;
  std::vector<char> constant;
  Eigen::VectorXd col_mean, col_scale;
  double ybar = 0.0;
};

LassoWork lasso_prepare(const FeatureMatrix& X, const OutcomeVector& y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n == 0) throw std::invalid_argument("lasso_fit: empty data");
  if (n != y.size()) throw std::invalid_argument("lasso_fit: row mismatch");
  LassoWork w;
  w.Z.resize(n, k);
  w.constant.assign(static_cast<std::size_t>(k), 0);
  w.col_mean.resize(k);
  w.col_scale.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double mu = X.values.col(j).mean();
    double var = (X.values.col(j).array() - mu).square().sum() / n;
    double sd = std::sqrt(var);
    w.col_mean(j) = mu;
    if (sd <= 0) {
      w.col_scale(j) = 1.0;
      w.constant[static_cast<std::size_t>(j)] = 1;
      w.Z.col(j).setZero();
    } else {
      w.col_scale(j) = sd;
      w.Z.col(j) = (X.values.col(j).array() - mu) / sd;
    }
  }
  w.ybar = y.mean();
  return w;
}

// Coordinate descent at one lambda; beta and r carry warm-start state.
void lasso_solve(const LassoWork& w, double lambda, Eigen::VectorXd& beta,
                 Eigen::VectorXd& r) {
  const Eigen::Index k = w.Z.cols();
  const double denom = static_cast<double>(w.Z.rows());  // standardized ssq is n
  const double thresh = lambda / 2.0;

  auto update_one = [&](Eigen::Index j) -> double {
    if (w.constant[static_cast<std::size_t>(j)]) return 0.0;
    double rho = w.Z.col(j).dot(r) + denom * beta(j);
    double b = 0.0;
    if (rho > thresh)
      b = (rho - thresh) / denom;
    else if (rho < -thresh)
      b = (rho + thresh) / denom;
    double delta = b - beta(j);
    if (delta != 0.0) {
      r -= delta * w.Z.col(j);
      beta(j) = b;
    }
    return std::abs(delta);
  };

  const double tol = 1e-7;
  const int max_sweeps = 10000;
  int sweeps = 0;
  while (sweeps < max_sweeps) {
    // full sweep
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) max_delta = std::max(max_delta, update_one(j));
    ++sweeps;
    if (max_delta < tol) break;
    // active-set sweeps until stable, then recheck with a full sweep
    while (sweeps < max_sweeps) {
      double d = 0.0;
      for (Eigen::Index j = 0; j < k; ++j)
        if (beta(j) != 0.0) d = std::max(d, update_one(j));
      ++sweeps;
      if (d < tol) break;
    }
  }
}

SparseLinearModel lasso_package(const LassoWork& w, const FeatureMatrix& X,
                                double lambda, const Eigen::VectorXd& beta) {
  const Eigen::Index k = w.Z.cols();
  SparseLinearModel m;
  m.lambda = lambda;
  m.names = X.names;
  m.col_mean = w.col_mean;
  m.col_scale = w.col_scale;
  m.coef.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) m.coef(j) = beta(j) / w.col_scale(j);
  m.intercept = w.ybar;
  for (Eigen::Index j = 0; j < k; ++j) m.intercept -= m.coef(j) * w.col_mean(j);
  return m;
}

}  // namespace

SparseLinearModel lasso_fit(const FeatureMatrix& X, const OutcomeVector& y,
                            double lambda) {
  if (lambda < 0) throw std::invalid_argument("lasso_fit: negative lambda");
  LassoWork w = lasso_prepare(X, y);
  Eigen::VectorXd r = y.array() - w.ybar;  // residuals at beta = 0
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  lasso_solve(w, lambda, beta, r);
  return lasso_package(w, X, lambda, beta);
}

std::vector<SparseLinearModel> lasso_path(const FeatureMatrix& X,
                                          const OutcomeVector& y,
                                          const std::vector<double>& lambdas) {
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] < 0) throw std::invalid_argument("lasso_path: negative lambda");
    if (i > 0 && lambdas[i] > lambdas[i - 1])
      throw std::invalid_argument("lasso_path: lambdas must be non-increasing");
  }
  LassoWork w = lasso_prepare(X, y);
  Eigen::VectorXd r = y.array() - w.ybar;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  std::vector<SparseLinearModel> out;
  out.reserve(lambdas.size());
  for (double lam : lambdas) {
    lasso_solve(w, lam, beta, r);
    out.push_back(lasso_package(w, X, lam, beta));
  }
  return out;
}

LinearModel post_lasso_ols(SparseLinearModel& m, const FeatureMatrix& X,
                           const OutcomeVector& y) {
  LinearModel p = ols_fit_columns(X, y, m.support());
  m.post_lasso = p;
  return p;
}

// ---------------------------------------------------------------------------
// SVR
// ---------------------------------------------------------------------------

namespace {

// KKT violation for one training point given beta and r = y - f(x).
double svr_violation(double beta, double r, double C, double eps) {
  const double lo = 1e-12;
  if (beta >= C - lo) return std::max(0.0, eps - r);
  if (beta <= -C + lo) return std::max(0.0, r + eps);
  if (beta > lo) return std::abs(r - eps);
  if (beta < -lo) return std::abs(r + eps);
  return std::max(0.0, std::abs(r) - eps);
}

}  // namespace

KernelModel svr_fit(const FeatureMatrix& X, const OutcomeVector& y,
                    const SvrHyperParams& hp, double kkt_tol) {
  if (hp.C <= 0 || hp.gamma <= 0) throw std::invalid_argument("svr_fit: C and gamma must be positive");
  if (hp.epsilon < 0) throw std::invalid_argument("svr_fit: negative epsilon");
  const Eigen::Index n = X.rows();
  if (n == 0) throw std::invalid_argument("svr_fit: empty data");
  if (n != y.size()) throw std::invalid_argument("svr_fit: row mismatch");

  // Dense kernel matrix; callers keep n modest.
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double d2 = (X.values.row(i) - X.values.row(j)).squaredNorm();
      K(i, j) = K(j, i) = std::exp(-hp.gamma * d2);
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);  // kernel part, no bias
  double bias = y.mean();
  const double C = hp.C, eps = hp.epsilon;

  auto recompute_bias = [&]() {
    // Average the KKT-implied bias over free points; fall back to the middle
    // of the feasible interval.
    double sum = 0.0;
    int cnt = 0;
    const double lo = 1e-9;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (beta(i) > lo && beta(i) < C - lo) {
        sum += y(i) - f(i) - eps;
        ++cnt;
      } else if (beta(i) < -lo && beta(i) > -C + lo) {
        sum += y(i) - f(i) + eps;
        ++cnt;
      }
    }
    if (cnt) {
      bias = sum / cnt;
      return;
    }
    double hi = std::numeric_limits<double>::infinity();
    double lo_b = -hi;
    for (Eigen::Index i = 0; i < n; ++i) {
      double g = y(i) - f(i);
      // feasible interval for b from the box KKT conditions
      if (beta(i) < C - 1e-9) hi = std::min(hi, g + eps);   // can still increase beta
      if (beta(i) > -C + 1e-9) lo_b = std::max(lo_b, g - eps);
    }
    if (std::isfinite(lo_b) && std::isfinite(hi))
      bias = (lo_b + hi) / 2.0;
  };

  // Pairwise dual ascent keeping sum(beta) = 0.
  auto optimize_pair = [&](Eigen::Index i, Eigen::Index j) -> bool {
    const double t0 = beta(i);
    const double s = beta(i) + beta(j);
    const double L = std::max(-C, s - C);
    const double H = std::min(C, s + C);
    if (H - L < 1e-14) return false;
    const double Ei = f(i) + bias - y(i);
    const double Ej = f(j) + bias - y(j);
    const double eta = K(i, i) + K(j, j) - 2.0 * K(i, j);

    auto delta_obj = [&](double t) {
      // dual objective change moving beta_i from t0 to t at fixed s
      double quad = -0.5 * eta * (t * t - t0 * t0);
      double lin = (t - t0) * (Ej - Ei + eta * t0);
      double pen = -eps * (std::abs(t) - std::abs(t0) + std::abs(s - t) -
                           std::abs(s - t0));
      return quad + lin + pen;
    };

    double best_t = t0;
    double best_gain = 0.0;
    auto consider = [&](double t) {
      t = std::clamp(t, L, H);
      double g = delta_obj(t);
      if (g > best_gain + 1e-15) {
        best_gain = g;
        best_t = t;
      }
    };
    if (eta > 1e-12) {
      for (int si : {-1, 1})
        for (int sj : {-1, 1})
          consider(t0 + (Ej - Ei - eps * (si - sj)) / eta);
    }
    consider(0.0);
    consider(s);
    consider(L);
    consider(H);
    if (best_t == t0) return false;
    double dt = best_t - t0;
    beta(i) = best_t;
    beta(j) = s - best_t;
    f += dt * (K.col(i) - K.col(j));
    return true;
  };

  // Maximal-violating-pair selection on the dual gradient: transfer mass from
  // the point with the smallest descent derivative to the point with the
  // largest ascent derivative. The bias cancels out of both the selection and
  // the pair solve, so it is only recovered after convergence.
  // Each pass moves one pair; the budget must scale with n or large problems
  // run out of updates long before the KKT conditions can hold.
  const int max_passes = std::max(2000, static_cast<int>(50 * n));
  int pass = 0;
  for (; pass < max_passes; ++pass) {
    double up_best = -std::numeric_limits<double>::infinity();
    double dn_best = std::numeric_limits<double>::infinity();
    Eigen::Index ui = -1, di = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      double g = y(i) - f(i);
      if (beta(i) < C - 1e-12) {
        double up = g - eps * (beta(i) >= 0 ? 1.0 : -1.0);
        if (up > up_best) {
          up_best = up;
          ui = i;
        }
      }
      if (beta(i) > -C + 1e-12) {
        double dn = g - eps * (beta(i) > 0 ? 1.0 : -1.0);
        if (dn < dn_best) {
          dn_best = dn;
          di = i;
        }
      }
    }
    if (ui < 0 || di < 0 || ui == di) break;
    if (up_best - dn_best <= kkt_tol) break;  // dual feasibility gap closed
    if (!optimize_pair(ui, di)) break;
  }
  recompute_bias();
  if (pass == max_passes) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      v = std::max(v, svr_violation(beta(i), y(i) - f(i) - bias, C, eps));
    if (v > 10 * kkt_tol)
      throw NumericalFailure("svr_fit: KKT tolerance not reached (violation " +
                             std::to_string(v) + ")");
  }

  KernelModel m;
  m.hp = hp;
  m.names = X.names;
  m.bias = bias;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(beta(i)) > 1e-12) sv.push_back(i);
  m.support.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  m.dual.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t t = 0; t < sv.size(); ++t) {
    m.support.row(static_cast<Eigen::Index>(t)) = X.values.row(sv[t]);
    m.dual(static_cast<Eigen::Index>(t)) = beta(sv[t]);
  }
  return m;
}

KernelModel svr_fit_scaled(const FeatureMatrix& X, const OutcomeVector& y,
                           const SvrHyperParams& hp, double kkt_tol) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n == 0) throw std::invalid_argument("svr_fit: empty data");
  FeatureMatrix S;
  S.names = X.names;
  S.values.resize(n, k);
  Eigen::VectorXd mean(k), scale(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    double mu = X.values.col(j).mean();
    double sd = std::sqrt((X.values.col(j).array() - mu).square().sum() / n);
    mean(j) = mu;
    scale(j) = sd > 0 ? sd : 1.0;
    S.values.col(j) = (X.values.col(j).array() - mean(j)) / scale(j);
  }
  KernelModel m = svr_fit(S, y, hp, kkt_tol);
  m.col_mean = std::move(mean);
  m.col_scale = std::move(scale);
  return m;
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees
// ---------------------------------------------------------------------------

double RegressionTree::predict_row(const Eigen::VectorXd& x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& t = nodes[static_cast<std::size_t>(node)];
    node = x(t.feature) <= t.threshold ? t.left : t.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

namespace {

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// rows must be the leaf's row set; residual target in r.
SplitChoice best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& r,
                       const std::vector<std::vector<int>>& sorted_rows) {
  SplitChoice best;
  if (sorted_rows.empty() || sorted_rows[0].size() < 2) return best;
  const std::size_t m = sorted_rows[0].size();
  double total_sum = 0.0;
  for (int i : sorted_rows[0]) total_sum += r(i);
  for (std::size_t col = 0; col < sorted_rows.size(); ++col) {
    const auto& order = sorted_rows[col];
    double left_sum = 0.0;
    for (std::size_t p = 0; p + 1 < m; ++p) {
      left_sum += r(order[p]);
      double xv = X(order[p], static_cast<Eigen::Index>(col));
      double xn = X(order[p + 1], static_cast<Eigen::Index>(col));
      if (xn <= xv) continue;  // not a boundary between distinct values
      double nl = static_cast<double>(p + 1);
      double nr = static_cast<double>(m) - nl;
      double right_sum = total_sum - left_sum;
      // SSE reduction = nl*nr/m * (mean_l - mean_r)^2
      double diff = left_sum / nl - right_sum / nr;
      double gain = nl * nr / static_cast<double>(m) * diff * diff;
      double thr = (xv + xn) / 2.0;
      if (gain > best.gain + 1e-12 ||
          (best.found && std::abs(gain - best.gain) <= 1e-12 &&
           (static_cast<int>(col) < best.feature ||
            (static_cast<int>(col) == best.feature && thr < best.threshold)))) {
        best.found = true;
        best.feature = static_cast<int>(col);
        best.threshold = thr;
        best.gain = gain;
      }
    }
  }
  if (best.found && best.gain <= 1e-12) best.found = false;
  return best;
}

struct LeafState {
  int node = 0;
  std::vector<std::vector<int>> sorted_rows;  // per column, rows sorted by value
  SplitChoice split;
};

}  // namespace

void gbt_grow(TreeEnsemble& e, const FeatureMatrix& X, const OutcomeVector& y,
              int extra_trees, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n == 0) throw std::invalid_argument("gbt: empty data");

  // current ensemble predictions
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(n, e.initial);
  for (const auto& tree : e.trees)
    for (Eigen::Index i = 0; i < n; ++i)
      pred(i) += e.shrinkage * tree.predict_row(X.values.row(i).transpose());

  // presorted row order per column over all rows
  std::vector<std::vector<int>> global_order(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    auto& ord = global_order[static_cast<std::size_t>(j)];
    ord.resize(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
      return X.values(a, j) < X.values(b, j);
    });
  }

  std::vector<int> all_rows(static_cast<std::size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), 0);

  const int first = static_cast<int>(e.trees.size());
  for (int t = first; t < first + extra_trees; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t), 0));
    // bag without replacement
    std::vector<int> bag = all_rows;
    shuffle_portable(bag, rng);
    std::size_t bag_n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(e.bag_fraction * static_cast<double>(n))));
    bag.resize(bag_n);
    std::vector<char> in_bag(static_cast<std::size_t>(n), 0);
    for (int i : bag) in_bag[static_cast<std::size_t>(i)] = 1;

    Eigen::VectorXd resid = y - pred;

    RegressionTree tree;
    tree.nodes.push_back({});
    std::vector<std::vector<int>> root_rows(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
      auto& dst = root_rows[static_cast<std::size_t>(j)];
      dst.reserve(bag_n);
      for (int i : global_order[static_cast<std::size_t>(j)])
        if (in_bag[static_cast<std::size_t>(i)]) dst.push_back(i);
    }
    std::vector<LeafState> leaves;
    leaves.push_back({0, std::move(root_rows), {}});
    leaves[0].split = best_split(X.values, resid, leaves[0].sorted_rows);

    auto leaf_mean = [&](const std::vector<int>& rows) {
      double s = 0.0;
      for (int i : rows) s += resid(i);
      return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
    };

    int splits = 0;
    while (splits < e.max_splits) {
      // best-first: split the leaf with the largest gain
      int pick = -1;
      double best_gain = 0.0;
      for (std::size_t li = 0; li < leaves.size(); ++li) {
        if (leaves[li].split.found && leaves[li].split.gain > best_gain + 1e-15) {
          best_gain = leaves[li].split.gain;
          pick = static_cast<int>(li);
        }
      }
      if (pick < 0) break;
      LeafState leaf = std::move(leaves[static_cast<std::size_t>(pick)]);
      leaves.erase(leaves.begin() + pick);

      const auto& sp = leaf.split;
      std::vector<std::vector<int>> left_rows(static_cast<std::size_t>(k));
      std::vector<std::vector<int>> right_rows(static_cast<std::size_t>(k));
      for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
        for (int i : leaf.sorted_rows[j]) {
          if (X.values(i, sp.feature) <= sp.threshold)
            left_rows[j].push_back(i);
          else
            right_rows[j].push_back(i);
        }
      }
      int li = static_cast<int>(tree.nodes.size());
      int ri = li + 1;
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      TreeNode& parent = tree.nodes[static_cast<std::size_t>(leaf.node)];
      parent.feature = sp.feature;
      parent.threshold = sp.threshold;
      parent.left = li;
      parent.right = ri;
      parent.gain = sp.gain;
      tree.nodes[static_cast<std::size_t>(li)].value = leaf_mean(left_rows[0]);
      tree.nodes[static_cast<std::size_t>(ri)].value = leaf_mean(right_rows[0]);

      LeafState l{li, std::move(left_rows), {}};
      LeafState r2{ri, std::move(right_rows), {}};
      l.split = best_split(X.values, resid, l.sorted_rows);
      r2.split = best_split(X.values, resid, r2.sorted_rows);
      leaves.push_back(std::move(l));
      leaves.push_back(std::move(r2));
      ++splits;
    }
    if (tree.nodes.size() == 1) tree.nodes[0].value = leaf_mean(bag);

    for (Eigen::Index i = 0; i < n; ++i)
      pred(i) += e.shrinkage * tree.predict_row(X.values.row(i).transpose());
    e.trees.push_back(std::move(tree));
  }
}

TreeEnsemble gbt_fit(const FeatureMatrix& X, const OutcomeVector& y, int max_splits,
                     int n_trees, double shrinkage, double bag_fraction,
                     std::uint64_t seed) {
  if (max_splits < 1 || n_trees < 1)
    throw std::invalid_argument("gbt_fit: max_splits and n_trees must be >= 1");
  TreeEnsemble e;
  e.names = X.names;
  e.initial = y.mean();
  e.shrinkage = shrinkage;
  e.bag_fraction = bag_fraction;
  e.max_splits = max_splits;
  gbt_grow(e, X, y, n_trees, seed);
  return e;
}

std::vector<std::pair<std::string, double>> gbt_influence(const TreeEnsemble& e) {
  std::vector<double> gain(e.names.size(), 0.0);
  double total = 0.0;
  for (const auto& tree : e.trees) {
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) {
        gain[static_cast<std::size_t>(node.feature)] += node.gain;
        total += node.gain;
      }
    }
  }
  std::vector<std::pair<std::string, double>> out;
  out.reserve(e.names.size());
  for (std::size_t j = 0; j < e.names.size(); ++j)
    out.emplace_back(e.names[j], total > 0 ? gain[j] / total * 100.0 : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Fractional probit
// ---------------------------------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

namespace {

double probit_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = std::clamp(normal_cdf(eta(i)), 1e-12, 1.0 - 1e-12);
    ll += y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p);
  }
  return ll;
}

}  // namespace

ProbitModel fractional_probit_fit_columns(const FeatureMatrix& X,
                                          const OutcomeVector& y,
                                          const std::vector<std::string>& columns) {
  const Eigen::Index n = X.rows();
  if (n == 0) throw std::invalid_argument("fractional_probit_fit: empty data");
  for (Eigen::Index i = 0; i < n; ++i)
    if (y(i) < 0.0 || y(i) > 1.0)
      throw std::invalid_argument("fractional_probit_fit: outcome outside [0,1]");
  const Eigen::Index k = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd A(n, k + 1);
  A.col(0).setOnes();
  if (k > 0) A.rightCols(k) = gather_columns(X, columns);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k + 1);
  double ll = probit_loglik(A * beta, y);
  const int max_iter = 200;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd eta = A * beta;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(k + 1);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k + 1, k + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      double p = std::clamp(normal_cdf(eta(i)), 1e-12, 1.0 - 1e-12);
      double phi = normal_pdf(eta(i));
      double w = phi * phi / (p * (1.0 - p));  // Fisher scoring weight
      double g = (y(i) - p) * phi / (p * (1.0 - p));
      grad += g * A.row(i).transpose();
      info += w * A.row(i).transpose() * A.row(i);
    }
    if (grad.cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, static_cast<double>(n))) {
      converged = true;
      break;
    }
    Eigen::VectorXd step = (info + 1e-10 * Eigen::MatrixXd::Identity(k + 1, k + 1))
                               .ldlt()
                               .solve(grad);
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h < 30; ++h) {
      double cand = probit_loglik(A * (beta + scale * step), y);
      if (cand >= ll - 1e-12) {
        beta += scale * step;
        improved = cand > ll + 1e-12;
        ll = cand;
        break;
      }
      scale *= 0.5;
    }
    if (!improved && grad.cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, static_cast<double>(n))) {
      converged = true;
      break;
    }
    if (!improved && scale < 1.0 / (1 << 29))
      throw NumericalFailure("fractional_probit_fit: step halving exhausted");
  }
  {
    // final gradient check
    Eigen::VectorXd eta = A * beta;
    double gmax = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double p = std::clamp(normal_cdf(eta(i)), 1e-12, 1.0 - 1e-12);
      double phi = normal_pdf(eta(i));
      gmax += (y(i) - p) * phi / (p * (1.0 - p));
    }
    if (!converged && std::abs(gmax) > 1e-4 * std::max(1.0, static_cast<double>(n)))
      throw NumericalFailure("fractional_probit_fit: no convergence after iteration cap");
  }

  ProbitModel m;
  m.intercept = beta(0);
  m.names = columns;
  m.coef = beta.tail(k);
  return m;
}

ProbitModel fractional_probit_fit(const FeatureMatrix& X, const OutcomeVector& y) {
  return fractional_probit_fit_columns(X, y, X.names);
}

// ---------------------------------------------------------------------------
// Stacking
// ---------------------------------------------------------------------------

StackedModel stack_ensemble(const std::vector<std::string>& component_names,
                            const std::vector<Eigen::VectorXd>& predictions,
                            const OutcomeVector& y) {
  if (predictions.empty()) throw std::invalid_argument("stack_ensemble: no components");
  if (component_names.size() != predictions.size())
    throw std::invalid_argument("stack_ensemble: name/prediction count mismatch");
  const Eigen::Index n = y.size();
  const Eigen::Index k = static_cast<Eigen::Index>(predictions.size());
  Eigen::MatrixXd A(n, k + 1);
  A.col(0).setOnes();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (predictions[static_cast<std::size_t>(j)].size() != n)
      throw std::invalid_argument("stack_ensemble: prediction length mismatch");
    A.col(j + 1) = predictions[static_cast<std::size_t>(j)];
  }
  Eigen::VectorXd beta = min_norm_ls(A, y);
  StackedModel m;
  m.intercept = beta(0);
  m.component_names = component_names;
  m.weights = beta.tail(k);
  return m;
}

Eigen::VectorXd stacked_predict(const StackedModel& m,
                                const std::vector<Eigen::VectorXd>& predictions) {
  if (predictions.size() != static_cast<std::size_t>(m.weights.size()))
    throw std::invalid_argument("stacked_predict: component count mismatch");
  Eigen::VectorXd out =
      Eigen::VectorXd::Constant(predictions[0].size(), m.intercept);
  for (std::size_t j = 0; j < predictions.size(); ++j)
    out += m.weights(static_cast<Eigen::Index>(j)) * predictions[j];
  return out;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

Eigen::VectorXd predict(const LinearModel& m, const FeatureMatrix& X) {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), m.intercept);
  if (!m.names.empty()) out += gather_columns(X, m.names) * m.coef;
  return out;
}

Eigen::VectorXd predict(const SparseLinearModel& m, const FeatureMatrix& X) {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), m.intercept);
  for (Eigen::Index j = 0; j < m.coef.size(); ++j)
    if (m.coef(j) != 0.0)
      out += m.coef(j) * X.values.col(X.column(m.names[static_cast<std::size_t>(j)]));
  return out;
}

Eigen::VectorXd predict(const KernelModel& m, const FeatureMatrix& X) {
  Eigen::MatrixXd Z = gather_columns(X, m.names);
  if (m.col_scale.size() == Z.cols())
    for (Eigen::Index j = 0; j < Z.cols(); ++j)
      Z.col(j) = (Z.col(j).array() - m.col_mean(j)) / m.col_scale(j);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(Z.rows(), m.bias);
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index s = 0; s < m.support.rows(); ++s) {
      double d2 = (Z.row(i) - m.support.row(s)).squaredNorm();
      acc += m.dual(s) * std::exp(-m.hp.gamma * d2);
    }
    out(i) += acc;
  }
  return out;
}

Eigen::VectorXd predict(const TreeEnsemble& m, const FeatureMatrix& X) {
  Eigen::MatrixXd Z = gather_columns(X, m.names);
  Eigen::VectorXd out = Eigen::VectorXd::Constant(Z.rows(), m.initial);
  for (const auto& tree : m.trees)
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
      out(i) += m.shrinkage * tree.predict_row(Z.row(i).transpose());
  return out;
}

Eigen::VectorXd predict(const ProbitModel& m, const FeatureMatrix& X) {
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(X.rows(), m.intercept);
  if (!m.names.empty()) eta += gather_columns(X, m.names) * m.coef;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = normal_cdf(eta(i));
  return eta;
}

Eigen::VectorXd predict(const TrainedModel& m, const FeatureMatrix& X) {
  return std::visit([&](const auto& mm) { return predict(mm, X); }, m);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i];
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i)));
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& rows, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = vec_from_json(rows[i]).transpose();
  return m;
}

json linear_to_json(const LinearModel& m) {
  return {{"type", "linear"},
          {"intercept", m.intercept},
          {"names", m.names},
          {"coef", vec_to_json(m.coef)},
          {"dropped", m.dropped}};
}

LinearModel linear_from_json(const json& j) {
  LinearModel m;
  m.intercept = j.at("intercept");
  m.names = j.at("names").get<std::vector<std::string>>();
  m.coef = vec_from_json(j.at("coef"));
  m.dropped = j.value("dropped", std::vector<std::string>{});
  return m;
}

}  // namespace

void save_model_json(const std::string& path, const TrainedModel& m) {
  json j;
  if (const auto* lin = std::get_if<LinearModel>(&m)) {
    j = linear_to_json(*lin);
  } else if (const auto* las = std::get_if<SparseLinearModel>(&m)) {
    j = {{"type", "lasso"},
         {"lambda", las->lambda},
         {"intercept", las->intercept},
         {"names", las->names},
         {"coef", vec_to_json(las->coef)},
         {"col_mean", vec_to_json(las->col_mean)},
         {"col_scale", vec_to_json(las->col_scale)}};
    if (las->post_lasso) j["post_lasso"] = linear_to_json(*las->post_lasso);
  } else if (const auto* svr = std::get_if<KernelModel>(&m)) {
    j = {{"type", "svr"},
         {"C", svr->hp.C},
         {"gamma", svr->hp.gamma},
         {"epsilon", svr->hp.epsilon},
         {"names", svr->names},
         {"support", mat_to_json(svr->support)},
         {"dual", vec_to_json(svr->dual)},
         {"bias", svr->bias}};
    if (svr->col_scale.size()) {
      j["col_mean"] = vec_to_json(svr->col_mean);
      j["col_scale"] = vec_to_json(svr->col_scale);
    }
  } else if (const auto* gbt = std::get_if<TreeEnsemble>(&m)) {
    json trees = json::array();
    for (const auto& tree : gbt->trees) {
      json nodes = json::array();
      for (const auto& nd : tree.nodes)
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", nd.value},
                         {"gain", nd.gain}});
      trees.push_back(std::move(nodes));
    }
    j = {{"type", "gbt"},
         {"names", gbt->names},
         {"initial", gbt->initial},
         {"shrinkage", gbt->shrinkage},
         {"bag_fraction", gbt->bag_fraction},
         {"max_splits", gbt->max_splits},
         {"trees", std::move(trees)}};
  } else if (const auto* pb = std::get_if<ProbitModel>(&m)) {
    j = {{"type", "probit"},
         {"intercept", pb->intercept},
         {"names", pb->names},
         {"coef", vec_to_json(pb->coef)}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

TrainedModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j = json::parse(in);
  std::string type = j.at("type");
  if (type == "linear") return linear_from_json(j);
  if (type == "lasso") {
    SparseLinearModel m;
    m.lambda = j.at("lambda");
    m.intercept = j.at("intercept");
    m.names = j.at("names").get<std::vector<std::string>>();
    m.coef = vec_from_json(j.at("coef"));
    m.col_mean = vec_from_json(j.at("col_mean"));
    m.col_scale = vec_from_json(j.at("col_scale"));
    if (j.contains("post_lasso")) m.post_lasso = linear_from_json(j["post_lasso"]);
    return m;
  }
  if (type == "svr") {
    KernelModel m;
    m.hp.C = j.at("C");
    m.hp.gamma = j.at("gamma");
    m.hp.epsilon = j.at("epsilon");
    m.names = j.at("names").get<std::vector<std::string>>();
    m.dual = vec_from_json(j.at("dual"));
    m.support = mat_from_json(j.at("support"), static_cast<Eigen::Index>(m.names.size()));
    m.bias = j.at("bias");
    if (j.contains("col_scale")) {
      m.col_mean = vec_from_json(j.at("col_mean"));
      m.col_scale = vec_from_json(j.at("col_scale"));
    }
    return m;
  }
  if (type == "gbt") {
    TreeEnsemble m;
    m.names = j.at("names").get<std::vector<std::string>>();
    m.initial = j.at("initial");
    m.shrinkage = j.at("shrinkage");
    m.bag_fraction = j.at("bag_fraction");
    m.max_splits = j.at("max_splits");
    for (const auto& jt : j.at("trees")) {
      RegressionTree tree;
      for (const auto& jn : jt) {
        TreeNode nd;
        nd.feature = jn.at("feature");
        nd.threshold = jn.at("threshold");
        nd.left = jn.at("left");
        nd.right = jn.at("right");
        nd.value = jn.at("value");
        nd.gain = jn.at("gain");
        tree.nodes.push_back(nd);
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  }
  if (type == "probit") {
    ProbitModel m;
    m.intercept = j.at("intercept");
    m.names = j.at("names").get<std::vector<std::string>>();
    m.coef = vec_from_json(j.at("coef"));
    return m;
  }
  throw std::invalid_argument("unknown model type: '" + type + "'");
}

}  // namespace spellforge
