#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spellforge/learners.hpp"

namespace spellforge {

// ---------------------------------------------------------------------------
// Split plan
// ---------------------------------------------------------------------------

struct SplitPlan {
  std::uint64_t seed = 0;
  std::vector<int> train;    // row indices
  std::vector<int> holdout;  // row indices
  std::vector<int> fold;     // fold id 0..n_folds-1 per train position
  int n_folds = 5;
};

// Seeded permutation; first ceil(ratio*n) rows go to train. Folds are dealt
// round-robin over the permuted train rows so sizes differ by at most one.
SplitPlan split_train_holdout(int n, double ratio, std::uint64_t seed,
                              int n_folds = 5);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double mse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

// Squared Pearson correlation; absent when either vector has zero variance.
std::optional<double> r_squared_corr(const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& yhat);

// Percentile interval of the MSE over paired resamples.
std::pair<double, double> bootstrap_ci(const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& yhat, int n_boot,
                                       double level, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

std::vector<double> geometric_grid(double lo, double hi, int count);
std::vector<double> linear_grid(double lo, double hi, int count);

// ---------------------------------------------------------------------------
// Cross-validated grid search
// ---------------------------------------------------------------------------

struct CvCell {
  std::map<std::string, double> params;
  double cv_mse = 0.0;
  bool failed = false;
  std::string error;
};

struct CvResult {
  std::map<std::string, double> selected;
  double selected_mse = 0.0;
  std::vector<CvCell> cells;
};

struct LearnerSpec {
  enum class Kind { kConstant, kOls, kLasso, kSvr, kGbt, kProbit, kEnsemble };
  Kind kind = Kind::kOls;
  std::string name;
  std::vector<std::string> inputs;  // empty means every column
  bool all_inputs = false;
  bool interactions = false;  // append pairwise products of the inputs
  std::vector<std::string> components;  // ensemble only, earlier entry names

  std::vector<double> lambda_grid;
  std::vector<double> c_grid, gamma_grid, epsilon_grid;
  std::vector<int> splits_grid;
  int max_trees = 100;
  double shrinkage = 1.0;
  double bag_fraction = 0.8;
  int train_cap = 0;  // if > 0, fit on at most this many train rows (SVR)
};

// Five-fold CV over the learner's hyperparameter grid on the plan's train
// rows. Cells run in parallel with per-cell derived seeds; ties break toward
// stronger regularization (larger lambda, smaller C, fewer splits/trees).
CvResult cross_validate(const LearnerSpec& spec, const SplitPlan& plan,
                        const FeatureMatrix& X, const OutcomeVector& y,
                        std::uint64_t seed, int threads = 1);

// ---------------------------------------------------------------------------
// Model ladder
// ---------------------------------------------------------------------------

struct EvalReport {
  std::string name;
  int n_predictors = 0;
  double mse = 0.0;
  std::optional<double> r_squared;
  double ci_low = 0.0, ci_high = 0.0;
  int n_bootstrap = 0;
  std::map<std::string, double> selected_params;
};

struct Ladder {
  std::vector<LearnerSpec> models;
};

Ladder load_ladder_json(const std::string& path);
void save_ladder_json(const std::string& path, const Ladder& ladder);

struct LadderRun {
  std::vector<EvalReport> reports;
  // Per-model holdout and train predictions, ladder order.
  std::vector<Eigen::VectorXd> train_pred, holdout_pred;
  std::vector<TrainedModel> models;  // empty slot semantics: ensemble stores none
  std::vector<std::optional<StackedModel>> stacks;
};

LadderRun run_model_ladder(const FeatureMatrix& X, const OutcomeVector& y,
                           const SplitPlan& plan, const Ladder& ladder,
                           std::uint64_t seed, int threads = 1,
                           int n_boot = 1000);

void save_report_json(const std::string& path, const std::vector<EvalReport>& reports);
std::vector<EvalReport> load_report_json(const std::string& path);

}  // namespace spellforge
