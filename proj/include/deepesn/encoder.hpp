#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "deepesn/errors.hpp"
#include "deepesn/random.hpp"

namespace deepesn {

enum class EncoderKind { Pca, ElmAutoencoder, RandomProjection, Identity };

inline std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Pca: return "pca";
    case EncoderKind::ElmAutoencoder: return "elm_ae";
    case EncoderKind::RandomProjection: return "rp";
    case EncoderKind::Identity: return "identity";
  }
  return "unknown";
}

inline EncoderKind encoder_kind_from_string(const std::string& s) {
  if (s == "pca") return EncoderKind::Pca;
  if (s == "elm_ae") return EncoderKind::ElmAutoencoder;
  if (s == "rp") return EncoderKind::RandomProjection;
  if (s == "identity") return EncoderKind::Identity;
  throw std::invalid_argument("unknown encoder kind: " + s);
}

struct EncoderSpec {
  EncoderKind kind = EncoderKind::Pca;
  Eigen::Index input_dim = 0;   // N
  Eigen::Index output_dim = 0;  // M
  double ridge_lambda = 1e-5;   // ELM-AE regularizer
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim <= 0) throw std::invalid_argument("encoder input_dim must be positive");
    if (output_dim < 1) throw std::invalid_argument("encoder output_dim must be >= 1");
    if (kind == EncoderKind::Pca && output_dim > input_dim)
      throw std::invalid_argument("PCA output_dim must not exceed input_dim");
    if (kind == EncoderKind::Identity && output_dim != input_dim)
      throw std::invalid_argument("identity encoder requires output_dim == input_dim");
    if (ridge_lambda < 0.0) throw std::invalid_argument("ridge_lambda must be nonnegative");
  }
};

/// A frozen linear dimension-reduction map x -> W_enc (x - mu).
///
/// PCA        rows of W_enc are the leading eigenvectors of the covariance of
///            the fitted data, mu its per-dimension mean.
/// ELM-AE     W_enc = (W*)^T where W* solves the random-feature ridge problem
///            min ||W H - X||^2 + lambda ||W||^2, H = tanh(W0 X + b0).
/// RP         sqrt(3) * {+1 w.p. 1/6, 0 w.p. 2/3, -1 w.p. 1/6}, data-free.
/// Identity   pass-through (used for the stacked baseline without encoders).
///
/// mu is zero for everything except PCA. Fitting happens once on training
/// states; encode() never changes the object.
class FittedEncoder {
 public:
  FittedEncoder(EncoderSpec spec, Eigen::MatrixXd weights, Eigen::VectorXd mean,
                bool rank_deficient = false)
      : spec_(spec), weights_(std::move(weights)), mean_(std::move(mean)),
        rank_deficient_(rank_deficient) {
    spec_.validate();
    if (weights_.rows() != spec_.output_dim || weights_.cols() != spec_.input_dim)
      throw DimensionError("encoder weights must be M x N");
    if (mean_.size() != spec_.input_dim)
      throw DimensionError("encoder mean must have N entries");
  }

  /// Fit on `states` (T x N, rows are time steps).
  static FittedEncoder fit(const EncoderSpec& spec, const Eigen::MatrixXd& states) {
    spec.validate();
    if (states.cols() != spec.input_dim)
      throw DimensionError("states have " + std::to_string(states.cols()) +
                           " columns, expected " + std::to_string(spec.input_dim));
    if (!states.allFinite()) throw NonFiniteError("encoder fit input contains NaN/Inf");
    const Eigen::Index n = spec.input_dim;
    const Eigen::Index m = spec.output_dim;

    switch (spec.kind) {
      case EncoderKind::Identity:
        return FittedEncoder(spec, Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));

      case EncoderKind::RandomProjection: {
        Rng rng = make_rng(spec.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double root3 = std::sqrt(3.0);
        Eigen::MatrixXd w(m, n);
        for (Eigen::Index i = 0; i < m; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) {
            const double u = unit(rng);
            w(i, j) = u < 1.0 / 6.0 ? root3 : (u < 1.0 / 3.0 ? -root3 : 0.0);
          }
        }
        return FittedEncoder(spec, std::move(w), Eigen::VectorXd::Zero(n));
      }

      case EncoderKind::Pca: {
        if (states.rows() < 2) throw std::invalid_argument("PCA fit needs at least 2 samples");
        const Eigen::VectorXd mu = states.colwise().mean().transpose();
        const Eigen::MatrixXd centered = states.rowwise() - mu.transpose();
        const Eigen::MatrixXd cov = centered.transpose() * centered;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        // eigenvalues ascend; take the top m, descending
        const Eigen::VectorXd evals = eig.eigenvalues();
        const Eigen::MatrixXd evecs = eig.eigenvectors();
        const double lambda_max = std::max(evals(n - 1), 0.0);
        bool deficient = false;
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, n);
        for (Eigen::Index r = 0; r < m; ++r) {
          const double lambda = evals(n - 1 - r);
          if (lambda <= 0.0 || lambda < 1e-12 * lambda_max) {
            deficient = true;  // missing component left as a zero row
            continue;
          }
          Eigen::VectorXd v = evecs.col(n - 1 - r);
          Eigen::Index max_idx = 0;
          v.cwiseAbs().maxCoeff(&max_idx);
          if (v(max_idx) < 0.0) v = -v;
          w.row(r) = v.transpose();
        }
        return FittedEncoder(spec, std::move(w), mu, deficient);
      }

      case EncoderKind::ElmAutoencoder: {
        if (states.rows() < 2) throw std::invalid_argument("ELM-AE fit needs at least 2 samples");
        Rng rng = make_rng(spec.seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        Eigen::MatrixXd w0(m, n);
        for (Eigen::Index i = 0; i < m; ++i)
          for (Eigen::Index j = 0; j < n; ++j) w0(i, j) = unit(rng);
        Eigen::VectorXd b0(m);
        for (Eigen::Index i = 0; i < m; ++i) b0(i) = unit(rng);

        const Eigen::MatrixXd x = states.transpose();  // N x T, columns are samples
        Eigen::MatrixXd h = ((w0 * x).colwise() + b0).array().tanh();  // M x T
        Eigen::MatrixXd gram = h * h.transpose();
        gram.diagonal().array() += spec.ridge_lambda;
        // W* = X H^T (H H^T + lambda I)^-1, solved rather than inverted
        const Eigen::MatrixXd w_star = gram.ldlt().solve(h * x.transpose()).transpose();  // N x M
        return FittedEncoder(spec, w_star.transpose(), Eigen::VectorXd::Zero(n));
      }
    }
    throw std::logic_error("unreachable encoder kind");
  }

  const EncoderSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  bool rank_deficient() const { return rank_deficient_; }

  Eigen::VectorXd encode(const Eigen::Ref<const Eigen::VectorXd>& state) const {
    if (state.size() != spec_.input_dim)
      throw DimensionError("encode input has wrong dimension");
    if (spec_.kind == EncoderKind::Identity) return state;
    if (spec_.kind == EncoderKind::Pca) return weights_ * (state - mean_);
    return weights_ * state;
  }

  /// Encode every row of `states` (T x N) -> T x M.
  Eigen::MatrixXd encode_rows(const Eigen::MatrixXd& states) const {
    if (states.cols() != spec_.input_dim)
      throw DimensionError("encode input has wrong dimension");
    if (spec_.kind == EncoderKind::Identity) return states;
    if (spec_.kind == EncoderKind::Pca)
      return (states.rowwise() - mean_.transpose()) * weights_.transpose();
    return states * weights_.transpose();
  }

 private:
  EncoderSpec spec_;
  Eigen::MatrixXd weights_;  // M x N
  Eigen::VectorXd mean_;     // N (zero unless PCA)
  bool rank_deficient_ = false;
};

}  // namespace deepesn
