#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "deepesn/metrics.hpp"
#include "deepesn/stack.hpp"

using namespace deepesn;

namespace {

ReservoirParams layer_params(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  ReservoirParams p;
  p.size = n;
  p.input_dim = d;
  p.input_scaling = 0.5;
  p.spectral_radius = 0.8;
  p.leak_rate = 0.6;
  p.sparsity = 0.2;
  p.seed = seed;
  return p;
}

EncoderSpec encoder_spec(EncoderKind kind, Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  EncoderSpec s;
  s.kind = kind;
  s.input_dim = n;
  s.output_dim = m;
  s.seed = seed;
  return s;
}

DeepEsnConfig stack_config(int depth, Eigen::Index n, Eigen::Index m, EncoderKind kind,
                           Eigen::Index d_in, Eigen::Index washout, std::uint64_t seed) {
  DeepEsnConfig c;
  const Eigen::Index enc_out = kind == EncoderKind::Identity ? n : m;
  for (int i = 0; i < depth; ++i)
    c.layers.push_back(layer_params(n, i == 0 ? d_in : enc_out, seed + static_cast<std::uint64_t>(i)));
  for (int j = 0; j + 1 < depth; ++j)
    c.encoders.push_back(encoder_spec(kind, n, enc_out, seed + 100 + static_cast<std::uint64_t>(j)));
  c.washout = washout;
  return c;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("config validation catches wiring mistakes") {
  DeepEsnConfig c = stack_config(3, 20, 6, EncoderKind::Pca, 1, 2, 5);
  c.encoders[0].output_dim = 7;  // breaks layer-2 input
  CHECK_THROWS_AS(DeepEsnModel(c), std::invalid_argument);

  DeepEsnConfig empty;
  CHECK_THROWS_AS(DeepEsnModel(empty), std::invalid_argument);

  DeepEsnConfig one = stack_config(1, 20, 6, EncoderKind::Pca, 1, 2, 5);
  one.encoders.push_back(encoder_spec(EncoderKind::Pca, 20, 6, 9));
  CHECK_THROWS_AS(DeepEsnModel(one), std::invalid_argument);
}

TEST_CASE("one-layer model without links degenerates to a plain feature set") {
  DeepEsnConfig c = stack_config(1, 25, 0, EncoderKind::Pca, 2, 3, 8);
  c.feature_links = false;
  c.direct_input = false;
  DeepEsnModel model(c);

  const Eigen::MatrixXd inputs = random_matrix(40, 2, 1);
  const Eigen::MatrixXd teachers = random_matrix(40, 1, 2);
  auto [collection, teacher_mat] = model.forward_collect(inputs, teachers);

  REQUIRE(collection.layout.size() == 1);
  CHECK(collection.layout[0].role == SegmentRole::LastReservoir);
  CHECK(collection.feature_dim() == 25);
  CHECK(collection.steps() == 40 - 3);
  CHECK(teacher_mat.cols() == 37);
}

TEST_CASE("feature dimension counts every enabled segment") {
  // 3 layers of 300 units, encoders of 30, scalar input: 300 + 1 + 2*30
  DeepEsnConfig c = stack_config(3, 300, 30, EncoderKind::Pca, 1, 0, 3);
  DeepEsnModel model(c);
  CHECK(model.feature_dim() == 361);
}

TEST_CASE("identity encoders without links give the stacked baseline") {
  DeepEsnConfig c = stack_config(2, 15, 15, EncoderKind::Identity, 1, 2, 4);
  c.feature_links = false;
  DeepEsnModel model(c);
  const Eigen::MatrixXd inputs = random_matrix(30, 1, 3);
  auto [collection, teacher_mat] = model.forward_collect(inputs, random_matrix(30, 1, 4));

  // encoder output == reservoir-1 retained states (identity pass-through)
  REQUIRE(model.encoders().size() == 1);
  CHECK(collection.feature_dim() == 15 + 1);
  REQUIRE(collection.layout.size() == 2);
  CHECK(collection.layout[1].role == SegmentRole::RawInput);
}

TEST_CASE("washout discipline shortens every layer and aligns segments") {
  DeepEsnConfig c = stack_config(2, 10, 4, EncoderKind::Pca, 1, 3, 6);
  DeepEsnModel model(c);
  const Eigen::MatrixXd inputs = random_matrix(20, 1, 5);
  auto [collection, teacher_mat] = model.forward_collect(inputs, random_matrix(20, 1, 6));
  CHECK(collection.steps() == 20 - 2 * 3);

  DeepEsnModel too_short(stack_config(2, 10, 4, EncoderKind::Pca, 1, 3, 6));
  CHECK_THROWS_AS(too_short.forward_collect(random_matrix(6, 1, 7), random_matrix(6, 1, 8)),
                  std::invalid_argument);
}

TEST_CASE("ridge readout solves the hand cases") {
  StateCollection sc;

  sc.features = Eigen::MatrixXd::Constant(1, 1, 1.0);
  Eigen::MatrixXd teachers = Eigen::MatrixXd::Constant(1, 1, 2.0);
  CHECK(DeepEsnModel::fit_readout(sc, teachers, 0.0)(0, 0) == Catch::Approx(2.0).margin(1e-14));

  sc.features = Eigen::MatrixXd::Identity(2, 2);
  CHECK(DeepEsnModel::fit_readout(sc, Eigen::MatrixXd::Identity(2, 2), 0.0)
            .isApprox(Eigen::MatrixXd::Identity(2, 2), 1e-12));

  sc.features = Eigen::MatrixXd::Constant(1, 2, 1.0);
  teachers = Eigen::MatrixXd::Constant(1, 2, 1.0);
  // T M^T (M M^T + beta)^-1 = 2 * (2 + 1)^-1 = 2/3
  CHECK(DeepEsnModel::fit_readout(sc, teachers, 1.0)(0, 0) ==
        Catch::Approx(2.0 / 3.0).margin(1e-14));
}

TEST_CASE("ridge readout rejects singular systems at beta = 0") {
  StateCollection sc;
  sc.features = Eigen::MatrixXd::Constant(2, 3, 1.0);  // rank 1
  const Eigen::MatrixXd teachers = random_matrix(1, 3, 9);
  CHECK_THROWS_AS(DeepEsnModel::fit_readout(sc, teachers, 0.0), SingularSystemError);
  CHECK_NOTHROW(DeepEsnModel::fit_readout(sc, teachers, 1e-6));
}

TEST_CASE("ridge readout matches an independent dense solution") {
  StateCollection sc;
  sc.features = random_matrix(50, 200, 10);
  const Eigen::MatrixXd teachers = random_matrix(3, 200, 11);

  for (const double beta : {0.0, 1e-5, 1e-2}) {
    const Eigen::MatrixXd got = DeepEsnModel::fit_readout(sc, teachers, beta);
    const Eigen::MatrixXd oracle =
        teachers * sc.features.transpose() *
        (sc.features * sc.features.transpose() + beta * Eigen::MatrixXd::Identity(50, 50))
            .inverse();
    CHECK((got - oracle).norm() / oracle.norm() < 1e-8);
  }
}

TEST_CASE("training error is nondecreasing in the regularizer") {
  StateCollection sc;
  sc.features = random_matrix(20, 100, 12);
  const Eigen::MatrixXd teachers = random_matrix(1, 100, 13);
  double prev = -1.0;
  for (const double beta : {0.0, 1e-5, 1e-2, 1.0}) {
    const Eigen::MatrixXd w = DeepEsnModel::fit_readout(sc, teachers, beta);
    const double err = (w * sc.features - teachers).norm();
    CHECK(err >= prev - 1e-12);
    prev = err;
  }
}

TEST_CASE("feature links change only the appended segments") {
  const Eigen::MatrixXd inputs = random_matrix(100, 1, 14);
  const Eigen::MatrixXd teachers = random_matrix(100, 1, 15);

  DeepEsnConfig with_links = stack_config(3, 30, 5, EncoderKind::Pca, 1, 2, 21);
  DeepEsnConfig without_links = with_links;
  without_links.feature_links = false;

  DeepEsnModel a(with_links), b(without_links);
  auto [ca, ta] = a.forward_collect(inputs, teachers);
  auto [cb, tb] = b.forward_collect(inputs, teachers);

  const Eigen::Index n_last = 30;
  CHECK(ca.features.topRows(n_last) == cb.features.topRows(n_last));
  CHECK(ca.feature_dim() == cb.feature_dim() + 2 * 5);
}

TEST_CASE("a one-layer model equals a standalone reservoir pipeline bit for bit") {
  const Eigen::MatrixXd inputs = random_matrix(120, 1, 16);
  const Eigen::MatrixXd teachers = random_matrix(120, 1, 17);
  const Eigen::Index washout = 4;

  DeepEsnConfig c = stack_config(1, 20, 0, EncoderKind::Pca, 1, washout, 33);
  DeepEsnModel model(c);
  model.train(inputs, teachers);
  const Eigen::MatrixXd deep_pred = model.predict(inputs, washout);

  // standalone route: same layer params, hand-assembled design matrix
  ReservoirLayer layer(c.layers[0]);
  const Eigen::MatrixXd states = layer.run_sequence(inputs, washout);
  Eigen::MatrixXd features(20 + 1, states.rows());
  features.topRows(20) = states.transpose();
  features.bottomRows(1) = inputs.bottomRows(states.rows()).transpose();
  StateCollection sc;
  sc.features = features;
  const Eigen::MatrixXd w_out = DeepEsnModel::fit_readout(
      sc, teachers.bottomRows(states.rows()).transpose(), c.ridge_beta);

  ReservoirLayer replay(c.layers[0]);
  const Eigen::MatrixXd replay_states = replay.run_sequence(inputs, washout);
  Eigen::MatrixXd replay_features(21, replay_states.rows());
  replay_features.topRows(20) = replay_states.transpose();
  replay_features.bottomRows(1) = inputs.bottomRows(replay_states.rows()).transpose();
  const Eigen::MatrixXd esn_pred = (w_out * replay_features).transpose();

  CHECK(deep_pred == esn_pred);
}

TEST_CASE("in-sample predictions beat the zero predictor") {
  const Eigen::MatrixXd inputs = random_matrix(300, 1, 18);
  Eigen::MatrixXd teachers(300, 1);
  for (Eigen::Index t = 0; t < 300; ++t)
    teachers(t, 0) = std::sin(0.07 * static_cast<double>(t)) + 0.1 * inputs(t, 0);

  DeepEsnConfig c = stack_config(2, 40, 8, EncoderKind::Pca, 1, 5, 44);
  c.ridge_beta = 1e-5;
  DeepEsnModel model(c);
  model.train(inputs, teachers);

  const Eigen::MatrixXd pred = model.predict(inputs, c.washout);
  const Eigen::VectorXd truth = teachers.bottomRows(pred.rows()).col(0);
  const double model_rmse = rmse(truth, pred.col(0));
  const double zero_rmse = rmse(truth, Eigen::VectorXd::Zero(truth.size()));
  CHECK(model_rmse <= zero_rmse * 1.01);
}

TEST_CASE("zero readout predicts zero") {
  DeepEsnConfig c = stack_config(2, 15, 4, EncoderKind::Pca, 1, 2, 55);
  DeepEsnModel model(c);
  model.train(random_matrix(60, 1, 19), random_matrix(60, 1, 20));
  model.set_readout(Eigen::MatrixXd::Zero(1, model.feature_dim()));
  CHECK(model.predict(random_matrix(30, 1, 21), 2).isZero(0.0));
}

TEST_CASE("prediction is deterministic and repeatable") {
  DeepEsnConfig c = stack_config(3, 20, 5, EncoderKind::ElmAutoencoder, 1, 2, 66);
  DeepEsnModel model(c);
  model.train(random_matrix(90, 1, 22), random_matrix(90, 1, 23));
  const Eigen::MatrixXd inputs = random_matrix(50, 1, 24);
  CHECK(model.predict(inputs, 2) == model.predict(inputs, 2));
}

TEST_CASE("stacked stability: forced-contractive layers forget initial states") {
  // rebuild each reservoir with its recurrent matrix scaled to sigma = 0.9
  DeepEsnConfig c = stack_config(3, 25, 25, EncoderKind::Identity, 1, 0, 77);
  std::vector<ReservoirLayer> layers;
  for (const auto& p : c.layers) {
    ReservoirLayer raw(p);
    Eigen::MatrixXd w = raw.recurrent_weights_dense();
    w *= 0.9 / largest_singular_value(w);
    layers.emplace_back(p, raw.input_weights(), w);
  }
  std::vector<FittedEncoder> encoders;
  for (const auto& e : c.encoders)
    encoders.emplace_back(e, Eigen::MatrixXd::Identity(25, 25), Eigen::VectorXd::Zero(25));
  DeepEsnModel model(c, layers, encoders, std::nullopt);

  auto drive = [&](std::uint64_t state_seed) {
    std::vector<ReservoirLayer> copy = model.reservoirs();
    Rng rng = make_rng(state_seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& l : copy) {
      Eigen::VectorXd x(25);
      for (Eigen::Index i = 0; i < 25; ++i) x(i) = dist(rng);
      l.set_state(x);
    }
    return copy;
  };

  std::vector<ReservoirLayer> a = drive(1), b = drive(2);
  const Eigen::MatrixXd inputs = random_matrix(1000, 1, 25);
  Eigen::Index converged = -1;
  for (Eigen::Index t = 0; t < 1000 && converged < 0; ++t) {
    Eigen::VectorXd fa = inputs.row(t).transpose();
    Eigen::VectorXd fb = fa;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      fa = a[i].step(fa);
      fb = b[i].step(fb);
      worst = std::max(worst, (fa - fb).norm());
      if (i + 1 < a.size()) {
        fa = model.encoders()[i].encode(fa);
        fb = model.encoders()[i].encode(fb);
      }
    }
    if (worst < 1e-6) converged = t;
  }
  CHECK(converged >= 0);
}
