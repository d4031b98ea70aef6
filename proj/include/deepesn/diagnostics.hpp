#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "deepesn/errors.hpp"
#include "deepesn/stack.hpp"

namespace deepesn {

/// sigma_max / sigma_min. Reports +inf when sigma_min < 1e-14 * sigma_max.
inline double condition_number(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) throw std::invalid_argument("empty matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double sigma_max = sv(0);
  const double sigma_min = sv(sv.size() - 1);
  if (sigma_max <= 0.0) throw std::invalid_argument("zero matrix has no condition number");
  if (sigma_min < 1e-14 * sigma_max) return std::numeric_limits<double>::infinity();
  return sigma_max / sigma_min;
}

struct CondEntry {
  std::string label;  // R1, E1, R2, ..., RK
  double cond = 0.0;
  double log10_cond = 0.0;
};

struct CondReport {
  std::vector<CondEntry> entries;

  const CondEntry* find(const std::string& label) const {
    for (const auto& e : entries)
      if (e.label == label) return &e;
    return nullptr;
  }
};

/// Condition numbers of every layer's retained state matrix and every
/// encoder's output matrix over one forward pass, interleaved
/// R1, E1, R2, E2, ..., RK.
inline CondReport condition_analysis(const DeepEsnModel& model, const Eigen::MatrixXd& inputs) {
  const ForwardTrace trace = model.run_forward(inputs, model.config().washout);
  CondReport report;
  auto add = [&report](const std::string& label, const Eigen::MatrixXd& states) {
    CondEntry e;
    e.label = label;
    e.cond = condition_number(states.transpose());  // N x T orientation
    e.log10_cond = std::log10(e.cond);
    report.entries.push_back(std::move(e));
  };
  for (std::size_t i = 0; i < trace.reservoir_states.size(); ++i) {
    add("R" + std::to_string(i + 1), trace.reservoir_states[i]);
    if (i < trace.encoder_outputs.size())
      add("E" + std::to_string(i + 1), trace.encoder_outputs[i]);
  }
  return report;
}

struct EspEntry {
  int layer = 0;
  double sigma_max = 0.0;       // largest singular value of W_res
  bool sufficient = false;      // sigma_max < 1 (global asymptotic stability)
  double spectral_radius = 0.0; // largest |eigenvalue| of W_res
  bool necessary = false;       // spectral_radius < 1
};

/// Per-layer stability report: the sufficient condition (largest singular
/// value < 1) and the necessary condition (spectral radius < 1), both
/// recomputed from the actual weights.
inline std::vector<EspEntry> check_esp(const DeepEsnModel& model) {
  std::vector<EspEntry> out;
  int layer = 1;
  for (const auto& r : model.reservoirs()) {
    const Eigen::MatrixXd w = r.recurrent_weights_dense();
    EspEntry e;
    e.layer = layer++;
    e.sigma_max = largest_singular_value(w);
    e.sufficient = e.sigma_max < 1.0;
    e.spectral_radius = spectral_radius_of(w);
    e.necessary = e.spectral_radius < 1.0;
    out.push_back(e);
  }
  return out;
}

struct PerturbTrace {
  // deltas(t, c): per-step L2 distance between the perturbed and reference
  // state of layer c+1; the final column is the single-layer reference ESN.
  Eigen::MatrixXd deltas;
  std::vector<std::string> labels;
  Eigen::Index perturb_step = 0;
  double magnitude = 0.0;
};

namespace detail {

// One synchronous step through the whole stack; returns each layer's state.
inline void stack_step(std::vector<ReservoirLayer>& layers,
                       const std::vector<FittedEncoder>& encoders,
                       const Eigen::VectorXd& input, std::vector<Eigen::VectorXd>& states_out) {
  Eigen::VectorXd feed = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    feed = layers[i].step(feed);
    states_out[i] = feed;
    if (i + 1 < layers.size()) feed = encoders[i].encode(feed);
  }
}

}  // namespace detail

/// Drive two copies of the model with a series S and a copy S' that differs
/// by `magnitude` added at `perturb_step` (0-based); record each layer's
/// state distance per step, plus a single-layer reference ESN built from
/// layer 1's hyperparameters.
inline PerturbTrace perturbation_trace(const DeepEsnModel& model, const Eigen::MatrixXd& series,
                                       Eigen::Index perturb_step, double magnitude,
                                       Eigen::Index horizon) {
  if (!model.encoders_fitted()) throw std::logic_error("model encoders must be fitted");
  if (horizon > series.rows()) throw std::invalid_argument("horizon exceeds series length");
  if (perturb_step < 0 || perturb_step >= horizon)
    throw std::invalid_argument("perturb_step must lie in [0, horizon)");

  Eigen::MatrixXd perturbed = series;
  perturbed.row(perturb_step).array() += magnitude;

  const std::size_t k = model.reservoirs().size();
  std::vector<ReservoirLayer> ref_layers = model.reservoirs();
  std::vector<ReservoirLayer> pert_layers = model.reservoirs();
  for (auto& r : ref_layers) r.reset_state();
  for (auto& r : pert_layers) r.reset_state();

  ReservoirLayer ref_esn(model.config().layers.front());
  ReservoirLayer pert_esn(model.config().layers.front());

  PerturbTrace trace;
  trace.deltas.resize(horizon, static_cast<Eigen::Index>(k) + 1);
  trace.perturb_step = perturb_step;
  trace.magnitude = magnitude;
  for (std::size_t i = 1; i <= k; ++i) trace.labels.push_back("R" + std::to_string(i));
  trace.labels.push_back("ESN");

  std::vector<Eigen::VectorXd> ref_states(k), pert_states(k);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    detail::stack_step(ref_layers, model.encoders(), series.row(t).transpose(), ref_states);
    detail::stack_step(pert_layers, model.encoders(), perturbed.row(t).transpose(), pert_states);
    for (std::size_t i = 0; i < k; ++i)
      trace.deltas(t, static_cast<Eigen::Index>(i)) = (pert_states[i] - ref_states[i]).norm();
    ref_esn.step(series.row(t).transpose());
    pert_esn.step(perturbed.row(t).transpose());
    trace.deltas(t, static_cast<Eigen::Index>(k)) = (pert_esn.state() - ref_esn.state()).norm();
  }
  return trace;
}

/// Numeric echo-state-property check: assign two random initial states to
/// every layer, drive both stacks with the same inputs, and return the
/// first step at which every layer's state distance drops below `tol`
/// (or -1 if it never does).
inline Eigen::Index esp_convergence_step(const DeepEsnModel& model, const Eigen::MatrixXd& inputs,
                                         std::uint64_t seed, double tol = 1e-6) {
  if (!model.encoders_fitted()) throw std::logic_error("model encoders must be fitted");
  std::vector<ReservoirLayer> a = model.reservoirs();
  std::vector<ReservoirLayer> b = model.reservoirs();
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& layer : a) {
    Eigen::VectorXd x(layer.params().size);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = unit(rng);
    layer.set_state(x);
  }
  for (auto& layer : b) {
    Eigen::VectorXd x(layer.params().size);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = unit(rng);
    layer.set_state(x);
  }
  const std::size_t k = a.size();
  std::vector<Eigen::VectorXd> sa(k), sb(k);
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    detail::stack_step(a, model.encoders(), inputs.row(t).transpose(), sa);
    detail::stack_step(b, model.encoders(), inputs.row(t).transpose(), sb);
    double worst = 0.0;
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, (sa[i] - sb[i]).norm());
    if (worst < tol) return t;
  }
  return -1;
}

inline void write_cond_csv(const std::filesystem::path& path, const CondReport& report) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << "label,cond,log10_cond\n";
    out.precision(12);
    for (const auto& e : report.entries)
      out << e.label << "," << e.cond << "," << e.log10_cond << "\n";
  }
  std::filesystem::rename(tmp, path);
}

inline void write_esp_csv(const std::filesystem::path& path, const std::vector<EspEntry>& entries) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << "layer,sigma_max,sufficient,spectral_radius,necessary\n";
    out.precision(12);
    for (const auto& e : entries)
      out << e.layer << "," << e.sigma_max << "," << (e.sufficient ? 1 : 0) << ","
          << e.spectral_radius << "," << (e.necessary ? 1 : 0) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

/// Emit (t, layer, delta) rows from `from_step` on; pass 0 for the full trace.
inline void write_trace_csv(const std::filesystem::path& path, const PerturbTrace& trace,
                            Eigen::Index from_step) {
  if (from_step < 0) from_step = 0;
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << "t,layer,delta\n";
    out.precision(12);
    for (Eigen::Index t = from_step; t < trace.deltas.rows(); ++t)
      for (Eigen::Index c = 0; c < trace.deltas.cols(); ++c)
        out << t << "," << trace.labels[static_cast<std::size_t>(c)] << "," << trace.deltas(t, c)
            << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace deepesn
