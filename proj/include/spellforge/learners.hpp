#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spellforge/features.hpp"

namespace spellforge {

// Raised when an iterative fit fails to converge; maps to CLI exit code 3.
struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Linear models
// ---------------------------------------------------------------------------

struct LinearModel {
  double intercept = 0.0;
  std::vector<std::string> names;  // columns used, in design order
  Eigen::VectorXd coef;            // aligned with names
  std::vector<std::string> dropped;  // columns removed as exactly collinear
};

// Least squares with intercept. Exact collinearity is resolved by a
// rank-revealing decomposition; removed columns are listed in `dropped` and
// get coefficient 0.
LinearModel ols_fit(const FeatureMatrix& X, const OutcomeVector& y);
LinearModel ols_fit_columns(const FeatureMatrix& X, const OutcomeVector& y,
                            const std::vector<std::string>& columns);

struct SparseLinearModel {
  double lambda = 0.0;
  double intercept = 0.0;
  std::vector<std::string> names;
  Eigen::VectorXd coef;  // original scale, explicit zeros
  // Internal standardization record (columns with zero spread get scale 1 and
  // a forced zero coefficient).
  Eigen::VectorXd col_mean, col_scale;
  std::optional<LinearModel> post_lasso;

  int support_size() const;
  std::vector<std::string> support() const;
};

// Coordinate descent on sum of squared errors + lambda * l1(beta), intercept
// unpenalized, columns standardized internally. Coefficients are reported on
// the original scale.
SparseLinearModel lasso_fit(const FeatureMatrix& X, const OutcomeVector& y,
                            double lambda);

// Fits along a descending lambda sequence, warm starting each solve from the
// previous solution. Returns one model per lambda, in input order. Much
// cheaper than independent fits when the grid reaches weak penalties.
std::vector<SparseLinearModel> lasso_path(const FeatureMatrix& X,
                                          const OutcomeVector& y,
                                          const std::vector<double>& lambdas);

// OLS refit on the selected support; also stored into m.post_lasso.
LinearModel post_lasso_ols(SparseLinearModel& m, const FeatureMatrix& X,
                           const OutcomeVector& y);

// ---------------------------------------------------------------------------
// Support vector regression
// ---------------------------------------------------------------------------

struct SvrHyperParams {
  double C = 1.0;
  double gamma = 1.0;
  double epsilon = 0.1;
};

struct KernelModel {
  SvrHyperParams hp;
  std::vector<std::string> names;
  Eigen::MatrixXd support;  // one row per support vector
  Eigen::VectorXd dual;     // in [-C, C], nonzero
  double bias = 0.0;
  // When nonempty, inputs are standardized before the kernel distance and the
  // stored support vectors are already in standardized coordinates.
  Eigen::VectorXd col_mean, col_scale;
};

// Epsilon-insensitive SVR with Gaussian kernel exp(-gamma*||x-z||^2), solved
// in the dual by pairwise updates to KKT tolerance.
KernelModel svr_fit(const FeatureMatrix& X, const OutcomeVector& y,
                    const SvrHyperParams& hp, double kkt_tol = 1e-3);

// Same solver on columns standardized with training statistics (population
// SD, constant columns kept at scale 1). One gamma cannot serve columns with
// wildly different units, so the pipeline fits kernels in standardized
// coordinates.
KernelModel svr_fit_scaled(const FeatureMatrix& X, const OutcomeVector& y,
                           const SvrHyperParams& hp, double kkt_tol = 1e-3);

// ---------------------------------------------------------------------------
// Gradient-boosted trees
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;  // leaf prediction
  double gain = 0.0;   // squared-error reduction at this split
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // node 0 is the root
  double predict_row(const Eigen::VectorXd& x) const;
};

struct TreeEnsemble {
  std::vector<std::string> names;
  double initial = 0.0;  // mean of training outcome
  double shrinkage = 1.0;
  double bag_fraction = 0.8;
  int max_splits = 1;
  std::vector<RegressionTree> trees;
};

// Squared-error boosting: each tree fits current residuals on a without-
// replacement bag, grown best-first up to max_splits internal nodes with
// exhaustive midpoint threshold search. Ties break to the lowest column
// index, then the lowest threshold.
TreeEnsemble gbt_fit(const FeatureMatrix& X, const OutcomeVector& y, int max_splits,
                     int n_trees, double shrinkage, double bag_fraction,
                     std::uint64_t seed);

// Continues training in place; used to sweep tree counts with one pass.
void gbt_grow(TreeEnsemble& e, const FeatureMatrix& X, const OutcomeVector& y,
              int extra_trees, std::uint64_t seed);

// Per-variable squared-error reduction summed over all splits, rescaled to
// total 100. All-degenerate ensemble yields all zeros.
std::vector<std::pair<std::string, double>> gbt_influence(const TreeEnsemble& e);

// ---------------------------------------------------------------------------
// Fractional probit and stacking
// ---------------------------------------------------------------------------

struct ProbitModel {
  double intercept = 0.0;
  std::vector<std::string> names;
  Eigen::VectorXd coef;
};

double normal_cdf(double x);
double normal_pdf(double x);

// Bernoulli quasi-likelihood probit for outcomes in [0,1], damped Newton.
ProbitModel fractional_probit_fit(const FeatureMatrix& X, const OutcomeVector& y);
ProbitModel fractional_probit_fit_columns(const FeatureMatrix& X,
                                          const OutcomeVector& y,
                                          const std::vector<std::string>& columns);

struct StackedModel {
  double intercept = 0.0;
  std::vector<std::string> component_names;
  Eigen::VectorXd weights;  // one per component
};

// OLS of y on component prediction vectors (with intercept).
StackedModel stack_ensemble(const std::vector<std::string>& component_names,
                            const std::vector<Eigen::VectorXd>& predictions,
                            const OutcomeVector& y);

Eigen::VectorXd stacked_predict(const StackedModel& m,
                                const std::vector<Eigen::VectorXd>& predictions);

// ---------------------------------------------------------------------------
// Unified prediction and serialization
// ---------------------------------------------------------------------------

using TrainedModel =
    std::variant<LinearModel, SparseLinearModel, KernelModel, TreeEnsemble, ProbitModel>;

// Columns are looked up by name; a missing required column throws.
Eigen::VectorXd predict(const TrainedModel& m, const FeatureMatrix& X);
Eigen::VectorXd predict(const LinearModel& m, const FeatureMatrix& X);
Eigen::VectorXd predict(const SparseLinearModel& m, const FeatureMatrix& X);
Eigen::VectorXd predict(const KernelModel& m, const FeatureMatrix& X);
Eigen::VectorXd predict(const TreeEnsemble& m, const FeatureMatrix& X);
Eigen::VectorXd predict(const ProbitModel& m, const FeatureMatrix& X);

void save_model_json(const std::string& path, const TrainedModel& m);
TrainedModel load_model_json(const std::string& path);

}  // namespace spellforge
