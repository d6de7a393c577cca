#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "spellforge/learners.hpp"

using namespace spellforge;

namespace {

FeatureMatrix make_matrix(const std::vector<std::string>& names,
                          const Eigen::MatrixXd& v) {
  FeatureMatrix m;
  m.names = names;
  m.values = v;
  return m;
}

FeatureMatrix random_matrix(int n, int k, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd v(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) v(i, j) = nd(gen);
  std::vector<std::string> names;
  for (int j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
  return make_matrix(names, v);
}

}  // namespace

TEST_CASE("ols recovers an exact linear rule") {
  Eigen::MatrixXd v(4, 1);
  v << 0, 1, 2, 3;
  FeatureMatrix X = make_matrix({"x"}, v);
  OutcomeVector y(4);
  y << 2, 5, 8, 11;  // y = 2 + 3x
  LinearModel m = ols_fit(X, y);
  CHECK(m.intercept == doctest::Approx(2.0));
  CHECK(m.coef(0) == doctest::Approx(3.0));
  CHECK(m.dropped.empty());
  Eigen::VectorXd p = predict(m, X);
  CHECK((p - y).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ols with no predictors is the mean") {
  FeatureMatrix X = random_matrix(6, 2, 1);
  OutcomeVector y(6);
  y << 1, 2, 3, 4, 5, 9;
  LinearModel m = ols_fit_columns(X, y, {});
  CHECK(m.intercept == doctest::Approx(4.0));
  CHECK(m.coef.size() == 0);
}

TEST_CASE("ols matches the normal equations on a random problem") {
  const int n = 60, k = 5;
  FeatureMatrix X = random_matrix(n, k, 7);
  OutcomeVector y(n);
  std::mt19937 gen(8);
  std::normal_distribution<double> nd;
  for (int i = 0; i < n; ++i) y(i) = 0.5 + X.values.row(i).sum() * 0.3 + nd(gen);

  LinearModel m = ols_fit(X, y);

  // independent oracle: solve [1|X]'[1|X] b = [1|X]'y directly
  Eigen::MatrixXd D(n, k + 1);
  D.col(0).setOnes();
  D.rightCols(k) = X.values;
  Eigen::VectorXd b = (D.transpose() * D).ldlt().solve(D.transpose() * y);
  CHECK(m.intercept == doctest::Approx(b(0)).epsilon(1e-8));
  for (int j = 0; j < k; ++j)
    CHECK(m.coef(j) == doctest::Approx(b(j + 1)).epsilon(1e-8));
}

TEST_CASE("ols drops exactly collinear columns and still fits") {
  const int n = 30;
  FeatureMatrix X = random_matrix(n, 2, 3);
  X.names.push_back("dup");
  X.values.conservativeResize(n, 3);
  X.values.col(2) = X.values.col(0) * 2.0;  // exact duplicate direction
  OutcomeVector y = X.values.col(0) * 1.5 + X.values.col(1) * (-0.7);

  LinearModel m = ols_fit(X, y);
  CHECK(m.dropped.size() == 1);
  Eigen::VectorXd p = predict(m, X);
  CHECK((p - y).cwiseAbs().maxCoeff() < 1e-8);
  // dropped column carries coefficient zero
  for (std::size_t j = 0; j < m.names.size(); ++j)
    for (const auto& d : m.dropped)
      if (m.names[j] == d) CHECK(m.coef(static_cast<Eigen::Index>(j)) == 0.0);
}

TEST_CASE("column subset fitting uses only the requested predictors") {
  FeatureMatrix X = random_matrix(40, 4, 11);
  OutcomeVector y = X.values.col(2);
  LinearModel m = ols_fit_columns(X, y, {"x2"});
  REQUIRE(m.names == std::vector<std::string>{"x2"});
  CHECK(m.coef(0) == doctest::Approx(1.0));
  CHECK(m.intercept == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("normal cdf and pdf reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
  CHECK(normal_cdf(-1.959963984540054) == doctest::Approx(0.025).epsilon(1e-9));
  CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)));
}

TEST_CASE("fractional probit intercept-only inverts the mean") {
  FeatureMatrix X = random_matrix(50, 2, 21);
  OutcomeVector y(50);
  for (int i = 0; i < 50; ++i) y(i) = (i % 4 == 0) ? 0.9 : 0.2;
  ProbitModel m = fractional_probit_fit_columns(X, y, {});
  CHECK(normal_cdf(m.intercept) == doctest::Approx(y.mean()).epsilon(1e-7));
}

TEST_CASE("fractional probit score equations vanish at the fit") {
  const int n = 200;
  FeatureMatrix X = random_matrix(n, 3, 33);
  OutcomeVector y(n);
  std::mt19937 gen(34);
  std::uniform_real_distribution<double> ud;
  for (int i = 0; i < n; ++i) {
    double mu = normal_cdf(-0.3 + 0.8 * X.values(i, 0) - 0.5 * X.values(i, 1));
    double u = ud(gen);
    y(i) = u < 0.15 ? 0.0 : (u < 0.3 ? 1.0 : std::clamp(mu + 0.2 * (ud(gen) - 0.5), 0.0, 1.0));
  }
  ProbitModel m = fractional_probit_fit(X, y);

  // independent oracle: the quasi-likelihood score at the solution
  Eigen::MatrixXd D(n, 4);
  D.col(0).setOnes();
  D.rightCols(3) = X.values;
  Eigen::VectorXd beta(4);
  beta(0) = m.intercept;
  for (int j = 0; j < 3; ++j) beta(j + 1) = m.coef(j);
  Eigen::VectorXd score = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < n; ++i) {
    double xb = D.row(i).dot(beta);
    double mu = normal_cdf(xb);
    mu = std::clamp(mu, 1e-10, 1.0 - 1e-10);
    double w = normal_pdf(xb) / (mu * (1.0 - mu));
    score += w * (y(i) - mu) * D.row(i).transpose();
  }
  CHECK(score.cwiseAbs().maxCoeff() < 1e-5 * n);
}

TEST_CASE("probit predictions stay in the unit interval") {
  FeatureMatrix X = random_matrix(80, 2, 55);
  OutcomeVector y(80);
  for (int i = 0; i < 80; ++i) y(i) = i % 2 ? 1.0 : 0.0;  // exact endpoints allowed
  ProbitModel m = fractional_probit_fit(X, y);
  Eigen::VectorXd p = predict(m, X);
  CHECK(p.minCoeff() >= 0.0);
  CHECK(p.maxCoeff() <= 1.0);
}

TEST_CASE("stacking recovers exact blend weights") {
  const int n = 25;
  OutcomeVector y(n);
  Eigen::VectorXd p1(n), p2(n);
  std::mt19937 gen(9);
  std::normal_distribution<double> nd;
  for (int i = 0; i < n; ++i) {
    p1(i) = nd(gen);
    p2(i) = nd(gen);
  }
  y = 0.5 * p1 + 0.5 * p2;
  StackedModel s = stack_ensemble({"a", "b"}, {p1, p2}, y);
  CHECK(s.weights(0) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(s.weights(1) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(s.intercept == doctest::Approx(0.0).epsilon(1e-8));
  Eigen::VectorXd p = stacked_predict(s, {p1, p2});
  CHECK((p - y).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("stacking a single perfect component is the identity") {
  OutcomeVector y(10);
  for (int i = 0; i < 10; ++i) y(i) = i * 0.3 - 1.0;
  StackedModel s = stack_ensemble({"only"}, {y}, y);
  CHECK(s.weights(0) == doctest::Approx(1.0));
  CHECK(s.intercept == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("linear and probit models survive a json round trip") {
  FeatureMatrix X = random_matrix(30, 3, 77);
  OutcomeVector y = X.values.col(0) - 0.25 * X.values.col(2);
  LinearModel lm = ols_fit(X, y);
  save_model_json("test_linear_lm.json", TrainedModel(lm));
  TrainedModel back = load_model_json("test_linear_lm.json");
  REQUIRE(std::holds_alternative<LinearModel>(back));
  Eigen::VectorXd p0 = predict(lm, X);
  Eigen::VectorXd p1 = predict(back, X);
  CHECK((p0 - p1).cwiseAbs().maxCoeff() == 0.0);

  OutcomeVector yb(30);
  for (int i = 0; i < 30; ++i) yb(i) = (i % 3) / 2.0;
  ProbitModel pm = fractional_probit_fit(X, yb);
  save_model_json("test_linear_pm.json", TrainedModel(pm));
  TrainedModel back2 = load_model_json("test_linear_pm.json");
  REQUIRE(std::holds_alternative<ProbitModel>(back2));
  CHECK((predict(pm, X) - predict(back2, X)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("prediction requires the model's columns") {
  FeatureMatrix X = random_matrix(10, 2, 5);
  OutcomeVector y = X.values.col(0);
  LinearModel m = ols_fit(X, y);
  FeatureMatrix other = random_matrix(10, 2, 6);
  other.names = {"a", "b"};
  CHECK_THROWS((void)predict(m, other));
}
