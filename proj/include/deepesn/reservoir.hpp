#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "deepesn/errors.hpp"
#include "deepesn/random.hpp"

namespace deepesn {

/// Hyperparameters of a single echo-state reservoir layer.
struct ReservoirParams {
  Eigen::Index size = 0;          // N, number of units
  Eigen::Index input_dim = 0;     // D_in
  double input_scaling = 0.5;     // IS in [0, 1]
  double spectral_radius = 0.9;   // SR in (0, 1)
  double leak_rate = 1.0;         // gamma in (0, 1]
  double sparsity = 0.1;          // alpha in (0, 1], fraction of nonzero recurrent weights
  std::uint64_t seed = 0;

  void validate() const {
    if (size <= 0) throw std::invalid_argument("reservoir size must be positive");
    if (input_dim <= 0) throw std::invalid_argument("reservoir input_dim must be positive");
    if (input_scaling < 0.0 || input_scaling > 1.0)
      throw std::invalid_argument("input_scaling must be in [0, 1]");
    if (spectral_radius <= 0.0 || spectral_radius >= 1.0)
      throw std::invalid_argument("spectral_radius must be in (0, 1)");
    if (leak_rate <= 0.0 || leak_rate > 1.0)
      throw std::invalid_argument("leak_rate must be in (0, 1]");
    if (sparsity <= 0.0 || sparsity > 1.0)
      throw std::invalid_argument("sparsity must be in (0, 1]");
  }
};

/// Largest eigenvalue magnitude of a dense real matrix.
inline double spectral_radius_of(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline double largest_singular_value(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

/// One reservoir: fixed random input weights in [-IS, IS], a sparse recurrent
/// matrix rescaled so its spectral radius equals SR exactly, and a leaky
/// tanh state update
///
///   z(t)   = tanh(W_res x(t) + W_in u(t+1))
///   x(t+1) = (1 - gamma) x(t) + gamma z(t)
///
/// Weights are frozen at construction; only the state mutates.
class ReservoirLayer {
 public:
  explicit ReservoirLayer(const ReservoirParams& params) : params_(params) {
    params.validate();
    Rng rng = make_rng(params.seed);
    const Eigen::Index n = params.size;
    const Eigen::Index d = params.input_dim;

    // Draw order is part of the determinism contract: W_in row-major,
    // then the dense recurrent candidate row-major, then the keep-mask.
    std::uniform_real_distribution<double> in_dist(-params.input_scaling, params.input_scaling);
    w_in_.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) w_in_(i, j) = in_dist(rng);

    std::uniform_real_distribution<double> res_dist(-0.5, 0.5);
    Eigen::MatrixXd dense(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) dense(i, j) = res_dist(rng);

    // Keep exactly round(alpha * N^2) entries, positions chosen uniformly
    // without replacement (partial Fisher-Yates); everything else is zeroed.
    const std::uint64_t total = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n);
    std::uint64_t keep = static_cast<std::uint64_t>(std::llround(params.sparsity * static_cast<double>(total)));
    if (keep == 0) keep = 1;
    if (keep > total) keep = total;

    std::vector<std::uint64_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::uint64_t i = 0; i < keep; ++i) {
      std::uniform_int_distribution<std::uint64_t> pick(i, total - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }

    Eigen::MatrixXd sparse_dense = Eigen::MatrixXd::Zero(n, n);
    for (std::uint64_t i = 0; i < keep; ++i) {
      const Eigen::Index r = static_cast<Eigen::Index>(idx[i] / static_cast<std::uint64_t>(n));
      const Eigen::Index c = static_cast<Eigen::Index>(idx[i] % static_cast<std::uint64_t>(n));
      sparse_dense(r, c) = dense(r, c);
    }

    const double lambda_max = spectral_radius_of(sparse_dense);
    if (lambda_max < 1e-12)
      throw DegenerateSpectrumError("recurrent matrix spectral radius below 1e-12; cannot rescale");
    sparse_dense *= params.spectral_radius / lambda_max;

    w_res_ = to_sparse(sparse_dense);
    state_ = Eigen::VectorXd::Zero(n);
  }

  /// Adopt explicit weights (model loading, instrumented tests). No rescaling
  /// is performed; the caller owns any spectral-radius guarantee.
  ReservoirLayer(const ReservoirParams& params, Eigen::MatrixXd w_in, const Eigen::MatrixXd& w_res)
      : params_(params), w_in_(std::move(w_in)), w_res_(to_sparse(w_res)) {
    if (w_in_.rows() != params.size || w_in_.cols() != params.input_dim)
      throw DimensionError("input weight matrix must be N x D_in");
    if (w_res.rows() != params.size || w_res.cols() != params.size)
      throw DimensionError("recurrent weight matrix must be N x N");
    state_ = Eigen::VectorXd::Zero(params.size);
  }

  const ReservoirParams& params() const { return params_; }
  const Eigen::MatrixXd& input_weights() const { return w_in_; }
  const Eigen::SparseMatrix<double>& recurrent_weights() const { return w_res_; }
  Eigen::MatrixXd recurrent_weights_dense() const { return Eigen::MatrixXd(w_res_); }
  const Eigen::VectorXd& state() const { return state_; }

  void reset_state() { state_.setZero(); }

  void set_state(const Eigen::VectorXd& x) {
    if (x.size() != params_.size) throw DimensionError("state must have N entries");
    state_ = x;
  }

  /// Advance one step with input u(t+1); returns the new state.
  const Eigen::VectorXd& step(const Eigen::Ref<const Eigen::VectorXd>& input) {
    if (input.size() != params_.input_dim)
      throw DimensionError("input has " + std::to_string(input.size()) + " entries, expected " +
                           std::to_string(params_.input_dim));
    Eigen::VectorXd z = (w_res_ * state_ + w_in_ * input).array().tanh();
    state_ = (1.0 - params_.leak_rate) * state_ + params_.leak_rate * z;
    if (!state_.allFinite()) throw NonFiniteError("reservoir state became non-finite");
    return state_;
  }

  /// Drive the layer over all rows of `inputs` (T x D_in) and return the
  /// states after the first `washout` steps, one row per retained step.
  /// The stored state advances to the final state.
  Eigen::MatrixXd run_sequence(const Eigen::MatrixXd& inputs, Eigen::Index washout) {
    const Eigen::Index steps = inputs.rows();
    if (washout < 0 || washout >= steps)
      throw std::invalid_argument("washout must be in [0, T)");
    Eigen::MatrixXd states(steps - washout, params_.size);
    for (Eigen::Index t = 0; t < steps; ++t) {
      step(inputs.row(t).transpose());
      if (t >= washout) states.row(t - washout) = state_.transpose();
    }
    return states;
  }

 private:
  static Eigen::SparseMatrix<double> to_sparse(const Eigen::MatrixXd& dense) {
    Eigen::SparseMatrix<double> s(dense.rows(), dense.cols());
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index i = 0; i < dense.rows(); ++i)
      for (Eigen::Index j = 0; j < dense.cols(); ++j)
        if (dense(i, j) != 0.0) triplets.emplace_back(i, j, dense(i, j));
    s.setFromTriplets(triplets.begin(), triplets.end());
    s.makeCompressed();
    return s;
  }

  ReservoirParams params_;
  Eigen::MatrixXd w_in_;
  Eigen::SparseMatrix<double> w_res_;
  Eigen::VectorXd state_;
};

}  // namespace deepesn
