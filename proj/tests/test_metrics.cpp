#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "deepesn/metrics.hpp"
#include "deepesn/random.hpp"

using namespace deepesn;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}
}  // namespace

TEST_CASE("perfect predictions score zero everywhere") {
  const Eigen::VectorXd y = vec({1, 2, 3});
  CHECK(rmse(y, y) == 0.0);
  CHECK(nrmse(y, y) == 0.0);
  CHECK(mape(y, y) == 0.0);
}

TEST_CASE("unit-offset predictions have unit rmse") {
  CHECK(rmse(vec({0, 0}), vec({1, 1})) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("hand-evaluated nrmse") {
  // mean 2, errors (1,1), deviations (1,1) -> sqrt(2/2) = 1
  CHECK(nrmse(vec({1, 3}), vec({2, 2})) == Catch::Approx(1.0).margin(1e-15));
  CHECK(rmse(vec({1, 3}), vec({2, 2})) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("predicting the mean gives nrmse one") {
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Eigen::VectorXd y(64);
  for (Eigen::Index i = 0; i < 64; ++i) y(i) = dist(rng);
  const Eigen::VectorXd mean_pred = Eigen::VectorXd::Constant(64, y.mean());
  CHECK(nrmse(y, mean_pred) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("rmse is translation invariant") {
  Rng rng = make_rng(6);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd y(32), y_hat(32);
  for (Eigen::Index i = 0; i < 32; ++i) {
    y(i) = dist(rng);
    y_hat(i) = dist(rng);
  }
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(32, 3.7);
  CHECK(rmse(y + c, y_hat + c) == Catch::Approx(rmse(y, y_hat)).margin(1e-13));
}

TEST_CASE("mape offset rescues series touching zero") {
  const Eigen::VectorXd y = vec({0.0, 1.0});
  const Eigen::VectorXd y_hat = vec({0.1, 0.9});
  CHECK_THROWS_AS(mape(y, y_hat, 0.0), std::invalid_argument);
  // |0-0.1|/0.1 = 1, |1-0.9|/1.1 = 1/11; mean * 100
  const double expected = (1.0 + 0.1 / 1.1) / 2.0 * 100.0;
  CHECK(mape(y, y_hat, 0.1) == Catch::Approx(expected).margin(1e-12));
  CHECK(std::isfinite(mape(y, y_hat, 0.1)));
}

TEST_CASE("metric preconditions are enforced") {
  CHECK_THROWS_AS(rmse(vec({1, 2}), vec({1, 2, 3})), DimensionError);
  CHECK_THROWS_AS(rmse(Eigen::VectorXd(), Eigen::VectorXd()), std::invalid_argument);
  CHECK_THROWS_AS(nrmse(vec({2, 2, 2}), vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("evaluate bundles all three metrics") {
  const MetricReport r = evaluate(vec({1, 3}), vec({2, 2}), 0.0);
  CHECK(r.rmse == Catch::Approx(1.0));
  CHECK(r.nrmse == Catch::Approx(1.0));
  CHECK(r.n == 2);
  const nlohmann::json j = r;
  CHECK(j.contains("rmse"));
  CHECK(j.at("n") == 2);
}
