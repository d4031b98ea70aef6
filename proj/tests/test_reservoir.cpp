#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "deepesn/reservoir.hpp"

using namespace deepesn;

namespace {

ReservoirParams small_params(std::uint64_t seed = 7) {
  ReservoirParams p;
  p.size = 50;
  p.input_dim = 2;
  p.input_scaling = 0.4;
  p.spectral_radius = 0.9;
  p.leak_rate = 0.7;
  p.sparsity = 0.1;
  p.seed = seed;
  return p;
}

Eigen::MatrixXd random_inputs(Eigen::Index steps, Eigen::Index dim, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Eigen::MatrixXd m(steps, dim);
  for (Eigen::Index i = 0; i < steps; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = dist(rng);
  return m;
}

// Copy a layer with its recurrent matrix rescaled to a target largest
// singular value (stability experiments).
ReservoirLayer with_singular_value(const ReservoirLayer& layer, double target) {
  Eigen::MatrixXd w = layer.recurrent_weights_dense();
  w *= target / largest_singular_value(w);
  return ReservoirLayer(layer.params(), layer.input_weights(), w);
}

}  // namespace

TEST_CASE("reservoir params are validated") {
  ReservoirParams p = small_params();
  p.spectral_radius = 1.0;
  CHECK_THROWS_AS(ReservoirLayer(p), std::invalid_argument);
  p = small_params();
  p.leak_rate = 0.0;
  CHECK_THROWS_AS(ReservoirLayer(p), std::invalid_argument);
  p = small_params();
  p.sparsity = 0.0;
  CHECK_THROWS_AS(ReservoirLayer(p), std::invalid_argument);
  p = small_params();
  p.input_scaling = 1.5;
  CHECK_THROWS_AS(ReservoirLayer(p), std::invalid_argument);
}

TEST_CASE("zero input scaling gives a zero input matrix") {
  ReservoirParams p = small_params();
  p.input_scaling = 0.0;
  ReservoirLayer layer(p);
  CHECK(layer.input_weights().isZero(0.0));
}

TEST_CASE("input weights stay within [-IS, IS]") {
  ReservoirLayer layer(small_params());
  CHECK(layer.input_weights().cwiseAbs().maxCoeff() <= 0.4);
}

TEST_CASE("recurrent matrix hits the requested spectral radius") {
  ReservoirLayer layer(small_params());
  const double sr = spectral_radius_of(layer.recurrent_weights_dense());
  CHECK(std::abs(sr - 0.9) <= 1e-8 * 0.9);
}

TEST_CASE("sparsity fraction matches within one entry") {
  ReservoirParams p = small_params();
  p.sparsity = 0.13;
  ReservoirLayer layer(p);
  const auto expected = std::llround(0.13 * 50.0 * 50.0);
  CHECK(std::abs(static_cast<long long>(layer.recurrent_weights().nonZeros()) - expected) <= 1);
}

TEST_CASE("identical seeds give bit-identical layers") {
  ReservoirLayer a(small_params(42)), b(small_params(42)), c(small_params(43));
  CHECK(a.input_weights() == b.input_weights());
  CHECK(a.recurrent_weights_dense() == b.recurrent_weights_dense());
  CHECK(a.input_weights() != c.input_weights());
}

TEST_CASE("step fixes the origin for zero input") {
  ReservoirLayer layer(small_params());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(2);
  CHECK(layer.step(u).isZero(0.0));
}

TEST_CASE("full leak reproduces the memoryless update") {
  ReservoirParams p = small_params();
  p.leak_rate = 1.0;
  ReservoirLayer layer(p);
  Eigen::VectorXd u(2);
  u << 0.3, -0.2;
  const Eigen::VectorXd expected = (layer.input_weights() * u).array().tanh();
  CHECK(layer.step(u).isApprox(expected, 1e-15));
}

TEST_CASE("half leak blends old state and activation") {
  // hand-evaluated scalar case: W_res = 0, W_in = I, u = e1, gamma = 0.5
  ReservoirParams p;
  p.size = 3;
  p.input_dim = 3;
  p.leak_rate = 0.5;
  ReservoirLayer layer(p, Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Zero(3, 3));
  Eigen::VectorXd u(3);
  u << 1.0, 0.0, 0.0;
  const Eigen::VectorXd x = layer.step(u);
  CHECK(x(0) == Catch::Approx(0.5 * std::tanh(1.0)).epsilon(1e-15));
  CHECK(x(1) == 0.0);
  CHECK(x(2) == 0.0);
}

TEST_CASE("step rejects wrong input length and non-finite states") {
  ReservoirLayer layer(small_params());
  Eigen::VectorXd bad(3);
  bad.setZero();
  CHECK_THROWS_AS(layer.step(bad), DimensionError);
  Eigen::VectorXd nan_input(2);
  nan_input << std::nan(""), 0.0;
  CHECK_THROWS_AS(layer.step(nan_input), NonFiniteError);
}

TEST_CASE("run_sequence honors washout") {
  ReservoirLayer layer(small_params());
  const Eigen::MatrixXd inputs = random_inputs(5, 2, 3);

  SECTION("no washout keeps every step") {
    CHECK(layer.run_sequence(inputs, 0).rows() == 5);
  }
  SECTION("washout 4 keeps exactly the final state") {
    ReservoirLayer full(small_params());
    const Eigen::MatrixXd all = full.run_sequence(inputs, 0);
    const Eigen::MatrixXd tail = layer.run_sequence(inputs, 4);
    REQUIRE(tail.rows() == 1);
    CHECK(tail.row(0) == all.row(4));
  }
  SECTION("washout >= T is rejected") {
    CHECK_THROWS_AS(layer.run_sequence(inputs, 5), std::invalid_argument);
  }
  SECTION("zero inputs from a fresh layer give zero states") {
    ReservoirLayer fresh(small_params());
    CHECK(fresh.run_sequence(Eigen::MatrixXd::Zero(4, 2), 0).isZero(0.0));
  }
  SECTION("stored state equals the final state") {
    ReservoirLayer fresh(small_params());
    const Eigen::MatrixXd states = fresh.run_sequence(inputs, 0);
    CHECK(fresh.state().transpose() == states.row(4));
  }
}

TEST_CASE("echo state property under contracting weights") {
  // sufficient condition: largest singular value < 1 washes out initial states
  ReservoirLayer base(small_params(11));
  ReservoirLayer a = with_singular_value(base, 0.9);
  ReservoirLayer b = with_singular_value(base, 0.9);

  Rng rng = make_rng(99);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd xa(50), xb(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    xa(i) = dist(rng);
    xb(i) = dist(rng);
  }
  a.set_state(xa);
  b.set_state(xb);

  const Eigen::MatrixXd inputs = random_inputs(1000, 2, 5);
  double prev = (a.state() - b.state()).norm();
  Eigen::Index converged_at = -1;
  for (Eigen::Index t = 0; t < 1000; ++t) {
    a.step(inputs.row(t).transpose());
    b.step(inputs.row(t).transpose());
    const double d = (a.state() - b.state()).norm();
    CHECK(d <= prev + 1e-12);  // monotone nonincreasing
    prev = d;
    if (d < 1e-6 && converged_at < 0) converged_at = t;
  }
  CHECK(converged_at >= 0);
}

TEST_CASE("per-step contraction bound with unit leak") {
  ReservoirParams p = small_params(13);
  p.leak_rate = 1.0;
  ReservoirLayer base(p);
  ReservoirLayer a = with_singular_value(base, 0.9);
  ReservoirLayer b = with_singular_value(base, 0.9);
  const double sigma = largest_singular_value(a.recurrent_weights_dense());

  Rng rng = make_rng(21);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd xa(50), xb(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    xa(i) = dist(rng);
    xb(i) = dist(rng);
  }
  a.set_state(xa);
  b.set_state(xb);

  const Eigen::MatrixXd inputs = random_inputs(200, 2, 6);
  for (Eigen::Index t = 0; t < 200; ++t) {
    const double before = (a.state() - b.state()).norm();
    a.step(inputs.row(t).transpose());
    b.step(inputs.row(t).transpose());
    const double after = (a.state() - b.state()).norm();
    CHECK(after <= sigma * before + 1e-12);
  }
}

TEST_CASE("deterministic outputs for fixed seed, params, inputs") {
  const Eigen::MatrixXd inputs = random_inputs(64, 2, 17);
  ReservoirLayer a(small_params(5)), b(small_params(5));
  CHECK(a.run_sequence(inputs, 3) == b.run_sequence(inputs, 3));
}
