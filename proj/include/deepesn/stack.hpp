#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepesn/encoder.hpp"
#include "deepesn/errors.hpp"
#include "deepesn/reservoir.hpp"

namespace deepesn {

/// Wiring of K reservoirs and K-1 encoders.
///
/// encoder j consumes the states of reservoir j and feeds reservoir j+1;
/// with K = 1 the model degenerates to a plain ESN. Each reservoir discards
/// its own first `washout` steps, so layer i's retained states start at
/// absolute step i*washout and the readout aligns all segments on the final
/// common range of length T - K*washout.
struct DeepEsnConfig {
  std::vector<ReservoirParams> layers;
  std::vector<EncoderSpec> encoders;
  bool feature_links = true;
  bool direct_input = true;
  double ridge_beta = 1e-5;
  Eigen::Index washout = 0;  // per reservoir

  Eigen::Index depth() const { return static_cast<Eigen::Index>(layers.size()); }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("model needs at least one reservoir");
    if (static_cast<Eigen::Index>(encoders.size()) != depth() - 1)
      throw std::invalid_argument("model needs exactly K-1 encoders");
    if (ridge_beta < 0.0) throw std::invalid_argument("ridge_beta must be nonnegative");
    if (washout < 0) throw std::invalid_argument("washout must be nonnegative");
    for (const auto& l : layers) l.validate();
    for (std::size_t j = 0; j < encoders.size(); ++j) {
      encoders[j].validate();
      if (encoders[j].input_dim != layers[j].size)
        throw std::invalid_argument("encoder " + std::to_string(j) +
                                    " input_dim must equal its reservoir size");
      if (layers[j + 1].input_dim != encoders[j].output_dim)
        throw std::invalid_argument("reservoir " + std::to_string(j + 1) +
                                    " input_dim must equal encoder output_dim");
    }
  }
};

enum class SegmentRole { LastReservoir, RawInput, EncoderOutput };

inline std::string to_string(SegmentRole role) {
  switch (role) {
    case SegmentRole::LastReservoir: return "last_reservoir";
    case SegmentRole::RawInput: return "raw_input";
    case SegmentRole::EncoderOutput: return "encoder_output";
  }
  return "unknown";
}

struct Segment {
  SegmentRole role;
  int index;            // encoder index for EncoderOutput, otherwise 0
  Eigen::Index offset;  // first row in the feature matrix
  Eigen::Index length;
};

/// Readout design matrix M (P x T_eff, columns are time steps) with its
/// segment layout [last-reservoir states | raw inputs | encoder outputs].
struct StateCollection {
  Eigen::MatrixXd features;
  std::vector<Segment> layout;

  Eigen::Index feature_dim() const { return features.rows(); }
  Eigen::Index steps() const { return features.cols(); }

  const Segment* find(SegmentRole role, int index = 0) const {
    for (const auto& s : layout)
      if (s.role == role && s.index == index) return &s;
    return nullptr;
  }
};

/// All per-layer retained state matrices from one forward pass
/// (rows are time steps; layer i covers absolute steps i*washout .. T-1).
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> reservoir_states;  // K entries, (T - (i+1)*w) x N_i
  std::vector<Eigen::MatrixXd> encoder_outputs;   // K-1 entries, aligned with their reservoir
  Eigen::Index common_steps = 0;                  // T - K*w
};

class DeepEsnModel {
 public:
  explicit DeepEsnModel(DeepEsnConfig config) : config_(std::move(config)) {
    config_.validate();
    reservoirs_.reserve(config_.layers.size());
    for (const auto& p : config_.layers) reservoirs_.emplace_back(p);
  }

  /// Rebuild from serialized parts (see model_io.hpp).
  DeepEsnModel(DeepEsnConfig config, std::vector<ReservoirLayer> reservoirs,
               std::vector<FittedEncoder> encoders, std::optional<Eigen::MatrixXd> readout)
      : config_(std::move(config)),
        reservoirs_(std::move(reservoirs)),
        encoders_(std::move(encoders)),
        readout_(std::move(readout)) {
    config_.validate();
  }

  const DeepEsnConfig& config() const { return config_; }
  const std::vector<ReservoirLayer>& reservoirs() const { return reservoirs_; }
  const std::vector<FittedEncoder>& encoders() const { return encoders_; }
  bool encoders_fitted() const { return encoders_.size() == config_.encoders.size(); }
  bool trained() const { return readout_.has_value(); }
  const Eigen::MatrixXd& readout() const {
    if (!readout_) throw std::logic_error("model has no trained readout");
    return *readout_;
  }

  /// Training-mode pass: drive layer 1 with the inputs, fit encoder 1 on its
  /// retained states, apply it, drive layer 2 with the result, and so on.
  /// Returns the design matrix and the identically truncated teacher matrix
  /// (L x T_eff). Encoders are frozen afterwards.
  std::pair<StateCollection, Eigen::MatrixXd> forward_collect(const Eigen::MatrixXd& inputs,
                                                              const Eigen::MatrixXd& teachers) {
    if (encoders_fitted() && !config_.encoders.empty())
      throw std::logic_error("forward_collect called on a model with fitted encoders");
    if (teachers.rows() != inputs.rows())
      throw DimensionError("teachers must have one row per input step");
    check_input_dim(inputs);

    ForwardTrace trace = run_layers(reservoirs_, inputs, /*fit=*/true);
    StateCollection collection = assemble(trace, inputs);
    Eigen::MatrixXd teacher_mat =
        teachers.bottomRows(trace.common_steps).transpose();  // L x T_eff
    return {std::move(collection), std::move(teacher_mat)};
  }

  /// Ridge readout, Tikhonov-regularized:  W = T M^T (M M^T + beta I)^-1.
  /// Solved through an LDLT factorization of the symmetric system.
  static Eigen::MatrixXd fit_readout(const StateCollection& states,
                                     const Eigen::MatrixXd& teachers, double beta) {
    if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
    if (teachers.cols() != states.steps())
      throw DimensionError("teacher matrix must be L x T_eff");
    if (states.steps() < 1) throw std::invalid_argument("empty state collection");

    const Eigen::MatrixXd& m = states.features;
    Eigen::MatrixXd gram = m * m.transpose();
    gram.diagonal().array() += beta;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (beta == 0.0) {
      const Eigen::VectorXd d = ldlt.vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      if (ldlt.info() != Eigen::Success || dmax <= 0.0 ||
          d.minCoeff() < dmax * 1e-13)
        throw SingularSystemError("normal matrix is singular; use beta > 0");
    }
    Eigen::MatrixXd w_out = ldlt.solve(m * teachers.transpose()).transpose();
    if (!w_out.allFinite()) throw NonFiniteError("readout solve produced NaN/Inf");
    return w_out;
  }

  /// forward_collect + fit_readout with this config's beta.
  void train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& teachers) {
    auto [collection, teacher_mat] = forward_collect(inputs, teachers);
    readout_ = fit_readout(collection, teacher_mat, config_.ridge_beta);
  }

  /// Frozen-encoder pass from fresh zero states; per-layer washout discipline
  /// as in training. Layer states are returned for diagnostics.
  ForwardTrace run_forward(const Eigen::MatrixXd& inputs, Eigen::Index washout) const {
    if (!encoders_fitted())
      throw std::logic_error("encoders not fitted; train or load the model first");
    check_input_dim(inputs);
    std::vector<ReservoirLayer> fresh = reservoirs_;
    for (auto& r : fresh) r.reset_state();
    return run_layers_frozen(fresh, inputs, washout);
  }

  /// Predictions y(t) = W_out M(t) for the retained common range
  /// (T_eff x L, rows are time steps).
  Eigen::MatrixXd predict(const Eigen::MatrixXd& inputs, Eigen::Index washout) const {
    if (!trained()) throw std::logic_error("model has no trained readout");
    ForwardTrace trace = run_forward(inputs, washout);
    StateCollection collection = assemble(trace, inputs);
    return (*readout_ * collection.features).transpose();
  }

  /// Design matrix for arbitrary inputs with frozen encoders (used by
  /// diagnostics and by predict()).
  StateCollection collect_frozen(const Eigen::MatrixXd& inputs, Eigen::Index washout) const {
    return assemble(run_forward(inputs, washout), inputs);
  }

  void set_readout(Eigen::MatrixXd w_out) {
    const Eigen::Index p = feature_dim();
    if (w_out.cols() != p)
      throw DimensionError("readout must have " + std::to_string(p) + " columns");
    readout_ = std::move(w_out);
  }

  /// Width P of the assembled design rows.
  Eigen::Index feature_dim() const {
    Eigen::Index p = config_.layers.back().size;
    if (config_.direct_input) p += config_.layers.front().input_dim;
    if (config_.feature_links)
      for (const auto& e : config_.encoders) p += e.output_dim;
    return p;
  }

 private:
  void check_input_dim(const Eigen::MatrixXd& inputs) const {
    if (inputs.cols() != config_.layers.front().input_dim)
      throw DimensionError("inputs have " + std::to_string(inputs.cols()) +
                           " columns, expected " +
                           std::to_string(config_.layers.front().input_dim));
  }

  // Training pass: fits encoders in place (layer-greedy, then frozen).
  ForwardTrace run_layers(std::vector<ReservoirLayer>& layers, const Eigen::MatrixXd& inputs,
                          bool fit) {
    const Eigen::Index k = config_.depth();
    const Eigen::Index w = config_.washout;
    if (inputs.rows() <= k * w)
      throw std::invalid_argument("cumulative washout " + std::to_string(k * w) +
                                  " >= sequence length " + std::to_string(inputs.rows()));
    ForwardTrace trace;
    trace.common_steps = inputs.rows() - k * w;
    Eigen::MatrixXd seq = inputs;
    for (Eigen::Index i = 0; i < k; ++i) {
      Eigen::MatrixXd states = layers[static_cast<std::size_t>(i)].run_sequence(seq, w);
      if (i < k - 1) {
        if (fit)
          encoders_.push_back(
              FittedEncoder::fit(config_.encoders[static_cast<std::size_t>(i)], states));
        seq = encoders_[static_cast<std::size_t>(i)].encode_rows(states);
        trace.encoder_outputs.push_back(seq);
      }
      trace.reservoir_states.push_back(std::move(states));
    }
    return trace;
  }

  ForwardTrace run_layers_frozen(std::vector<ReservoirLayer>& layers,
                                 const Eigen::MatrixXd& inputs, Eigen::Index washout) const {
    const Eigen::Index k = config_.depth();
    if (inputs.rows() <= k * washout)
      throw std::invalid_argument("cumulative washout " + std::to_string(k * washout) +
                                  " >= sequence length " + std::to_string(inputs.rows()));
    ForwardTrace trace;
    trace.common_steps = inputs.rows() - k * washout;
    Eigen::MatrixXd seq = inputs;
    for (Eigen::Index i = 0; i < k; ++i) {
      Eigen::MatrixXd states = layers[static_cast<std::size_t>(i)].run_sequence(seq, washout);
      if (i < k - 1) {
        seq = encoders_[static_cast<std::size_t>(i)].encode_rows(states);
        trace.encoder_outputs.push_back(seq);
      }
      trace.reservoir_states.push_back(std::move(states));
    }
    return trace;
  }

  // Align every segment on the last T_eff steps and stack them as
  // M = [A; B; C] per the architecture's readout definition.
  StateCollection assemble(const ForwardTrace& trace, const Eigen::MatrixXd& inputs) const {
    const Eigen::Index t_eff = trace.common_steps;
    StateCollection out;
    out.features.resize(feature_dim(), t_eff);

    Eigen::Index offset = 0;
    const Eigen::MatrixXd& last = trace.reservoir_states.back();
    out.features.middleRows(offset, last.cols()) =
        last.bottomRows(t_eff).transpose();
    out.layout.push_back({SegmentRole::LastReservoir, 0, offset, last.cols()});
    offset += last.cols();

    if (config_.direct_input) {
      out.features.middleRows(offset, inputs.cols()) =
          inputs.bottomRows(t_eff).transpose();
      out.layout.push_back({SegmentRole::RawInput, 0, offset, inputs.cols()});
      offset += inputs.cols();
    }
    if (config_.feature_links) {
      for (std::size_t j = 0; j < trace.encoder_outputs.size(); ++j) {
        const Eigen::MatrixXd& enc = trace.encoder_outputs[j];
        out.features.middleRows(offset, enc.cols()) =
            enc.bottomRows(t_eff).transpose();
        out.layout.push_back({SegmentRole::EncoderOutput, static_cast<int>(j), offset, enc.cols()});
        offset += enc.cols();
      }
    }
    return out;
  }

  DeepEsnConfig config_;
  std::vector<ReservoirLayer> reservoirs_;
  std::vector<FittedEncoder> encoders_;
  std::optional<Eigen::MatrixXd> readout_;  // L x P
};

}  // namespace deepesn
