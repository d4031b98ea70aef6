#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepesn/errors.hpp"
#include "deepesn/random.hpp"

namespace deepesn {

struct SplitSpec {
  Eigen::Index train = 0;
  Eigen::Index validate = 0;
  Eigen::Index test = 0;
  Eigen::Index sum() const { return train + validate + test; }
};

enum class SplitPart { Train, Validate, Test };

inline std::string to_string(SplitPart p) {
  switch (p) {
    case SplitPart::Train: return "train";
    case SplitPart::Validate: return "validate";
    case SplitPart::Test: return "test";
  }
  return "unknown";
}

/// A prediction task: inputs u (T x D) paired with targets so that
/// targets.row(t) is the desired output for input step t. For horizon tasks
/// targets(t) = u(t+h), defined for the first T-h steps; the final h input
/// steps carry no target and are never scored.
struct SeriesTask {
  std::string name;
  Eigen::MatrixXd inputs;   // T x D
  Eigen::MatrixXd targets;  // T_d x L with T_d <= T
  Eigen::Index horizon = 0;
  SplitSpec split;
  double mape_offset = 0.0;

  Eigen::Index steps() const { return inputs.rows(); }
  Eigen::Index target_steps() const { return targets.rows(); }

  Eigen::Index part_begin(SplitPart p) const {
    switch (p) {
      case SplitPart::Train: return 0;
      case SplitPart::Validate: return split.train;
      case SplitPart::Test: return split.train + split.validate;
    }
    return 0;
  }
  Eigen::Index part_end(SplitPart p) const {
    switch (p) {
      case SplitPart::Train: return split.train;
      case SplitPart::Validate: return split.train + split.validate;
      case SplitPart::Test: return split.sum();
    }
    return 0;
  }
  /// Last step of the part that actually has a target.
  Eigen::Index scored_end(SplitPart p) const { return std::min(part_end(p), target_steps()); }
};

struct MackeyGlassParams {
  Eigen::Index length = 10000;
  double tau = 17.0;
  double delta = 0.1;  // internal integration step; one point emitted per 1/delta steps
  double a = 0.2;
  double b = -0.1;
  int n = 10;
  std::uint64_t seed = 0;
  double history_value = 1.2;
  double history_jitter = 0.01;
  Eigen::Index transient = 1000;  // emitted points discarded before the returned range
};

/// Chaotic delay-differential series dy/dt = a y(t-tau) / (1 + y(t-tau)^n) + b y(t),
/// integrated with fourth-order Runge-Kutta at step `delta`. The delayed term
/// is held constant over each internal step (discrete-delay reading).
inline Eigen::VectorXd gen_mackey_glass(const MackeyGlassParams& p) {
  if (p.length < 1) throw std::invalid_argument("length must be >= 1");
  if (p.tau <= 0.0 || p.delta <= 0.0) throw std::invalid_argument("tau and delta must be positive");
  if (p.transient < 0) throw std::invalid_argument("transient must be nonnegative");

  const Eigen::Index hist = static_cast<Eigen::Index>(std::llround(p.tau / p.delta));
  const Eigen::Index per_point = static_cast<Eigen::Index>(std::llround(1.0 / p.delta));
  const Eigen::Index internal_steps = per_point * (p.transient + p.length);

  Rng rng = make_rng(p.seed);
  std::uniform_real_distribution<double> jitter(-p.history_jitter, p.history_jitter);

  // v[0..hist] holds the history buffer (times -tau .. 0)
  std::vector<double> v(static_cast<std::size_t>(hist + 1 + internal_steps));
  for (Eigen::Index i = 0; i <= hist; ++i)
    v[static_cast<std::size_t>(i)] =
        p.history_value + (p.history_jitter > 0.0 ? jitter(rng) : 0.0);

  auto deriv = [&](double y, double delayed) {
    return p.a * delayed / (1.0 + std::pow(delayed, p.n)) + p.b * y;
  };
  for (Eigen::Index k = 0; k < internal_steps; ++k) {
    const double y = v[static_cast<std::size_t>(hist + k)];
    const double delayed = v[static_cast<std::size_t>(k)];
    const double k1 = deriv(y, delayed);
    const double k2 = deriv(y + 0.5 * p.delta * k1, delayed);
    const double k3 = deriv(y + 0.5 * p.delta * k2, delayed);
    const double k4 = deriv(y + p.delta * k3, delayed);
    v[static_cast<std::size_t>(hist + k + 1)] =
        y + p.delta / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Eigen::VectorXd out(p.length);
  for (Eigen::Index i = 0; i < p.length; ++i)
    out(i) = v[static_cast<std::size_t>(hist + per_point * (p.transient + i + 1))];
  return out;
}

struct Narma10Series {
  Eigen::VectorXd u;
  Eigen::VectorXd y;
};

/// Tenth-order NARMA response to a given input series:
///   y(t+1) = 0.3 y(t) + 0.05 y(t) sum_{i=0..9} y(t-i) + 1.5 u(t-9) u(t) + 0.1
/// with the first ten outputs initialized to zero.
inline Eigen::VectorXd narma10_response(const Eigen::VectorXd& u) {
  const Eigen::Index length = u.size();
  if (length <= 10) throw std::invalid_argument("narma10 needs length > 10");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(length);
  for (Eigen::Index t = 10; t < length; ++t) {
    double acc = 0.0;
    for (Eigen::Index i = 1; i <= 10; ++i) acc += y(t - i);
    y(t) = 0.3 * y(t - 1) + 0.05 * y(t - 1) * acc + 1.5 * u(t - 10) * u(t - 1) + 0.1;
    if (!std::isfinite(y(t)) || std::abs(y(t)) > 1e6)
      throw NonFiniteError("narma10 diverged at step " + std::to_string(t) +
                           "; use a different seed");
  }
  return y;
}

/// NARMA benchmark series with i.i.d. uniform [0, 0.5] inputs.
inline Narma10Series gen_narma10(Eigen::Index length, std::uint64_t seed) {
  if (length <= 10) throw std::invalid_argument("narma10 needs length > 10");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 0.5);
  Eigen::VectorXd u(length);
  for (Eigen::Index t = 0; t < length; ++t) u(t) = dist(rng);
  Eigen::VectorXd y = narma10_response(u);
  return {std::move(u), std::move(y)};
}

/// Quasi-periodic nonnegative series in roughly [0, 1]: an ~11-year cycle of
/// drifting period and amplitude with a slow secular modulation and mild
/// noise. Stand-in for a smoothed monthly sunspot-number record (per-month
/// samples, deep minima near zero).
inline Eigen::VectorXd gen_quasi_periodic(Eigen::Index length, std::uint64_t seed) {
  if (length < 1) throw std::invalid_argument("length must be >= 1");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  constexpr double two_pi = 6.283185307179586476925286766559;
  Eigen::VectorXd out(length);
  double phase = unit(rng) * two_pi;
  double period = 128.0;  // months; drifts slowly between cycles
  double amp = 0.55;
  double ar = 0.0;
  for (Eigen::Index t = 0; t < length; ++t) {
    period = std::clamp(period + 0.002 * gauss(rng), 100.0, 160.0);
    amp = std::clamp(amp + 0.0015 * gauss(rng), 0.25, 0.95);
    const double secular = 0.12 * std::sin(two_pi * static_cast<double>(t) / 1600.0 + 0.8);
    phase += two_pi / period;
    ar = 0.92 * ar + 0.008 * gauss(rng);
    const double base = std::pow(std::max(0.0, std::sin(phase)), 1.4);
    out(t) = std::max(0.0, (amp + secular) * base + ar);
  }
  return out;
}

/// Seasonal daily series: an annual sinusoid around 11 degrees with
/// autocorrelated weather noise. Stand-in for a daily minimum-temperature
/// record.
inline Eigen::VectorXd gen_seasonal_daily(Eigen::Index length, std::uint64_t seed) {
  if (length < 1) throw std::invalid_argument("length must be >= 1");
  constexpr double two_pi = 6.283185307179586476925286766559;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd out(length);
  double ar = 0.0;
  for (Eigen::Index t = 0; t < length; ++t) {
    ar = 0.75 * ar + 1.1 * gauss(rng);
    const double season = 11.0 + 5.5 * std::sin(two_pi * static_cast<double>(t) / 365.25 + 0.3);
    out(t) = season + ar;
  }
  return out;
}

/// Read one value per line from a delimited text file. `column` is 0-based;
/// fields may be separated by commas, semicolons, or whitespace. A single
/// leading header line is skipped if its target field is not numeric.
inline Eigen::VectorXd load_csv(const std::filesystem::path& path, int column = 0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
      if (c == ',' || c == ';' || c == ' ' || c == '\t' || c == '\r') {
        if (!field.empty()) fields.push_back(std::move(field));
        field.clear();
      } else {
        field.push_back(c);
      }
    }
    if (!field.empty()) fields.push_back(std::move(field));
    if (fields.empty()) continue;
    if (column < 0 || column >= static_cast<int>(fields.size()))
      throw ParseError(path.string() + ": no column " + std::to_string(column), line_no);
    try {
      std::size_t used = 0;
      const double v = std::stod(fields[static_cast<std::size_t>(column)], &used);
      if (used != fields[static_cast<std::size_t>(column)].size()) throw std::invalid_argument("");
      values.push_back(v);
    } catch (const std::exception&) {
      if (line_no == 1 && values.empty()) continue;  // header
      throw ParseError(path.string() + ": cannot parse '" +
                           fields[static_cast<std::size_t>(column)] + "'",
                       line_no);
    }
  }
  if (values.empty()) throw ParseError(path.string() + ": no data rows", line_no);
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Centered moving average with an odd window; windows shrink symmetrically
/// at the edges so every output stays centered on its input.
inline Eigen::VectorXd smooth(const Eigen::VectorXd& series, int window = 5) {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("window must be odd and >= 1");
  if (window == 1) return series;
  const Eigen::Index t_len = series.size();
  const Eigen::Index half = window / 2;
  Eigen::VectorXd out(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Eigen::Index r = std::min({half, t, t_len - 1 - t});
    out(t) = series.segment(t - r, 2 * r + 1).mean();
  }
  return out;
}

/// Pair a scalar series with its h-step-ahead value: u(t) = series(t),
/// d(t) = series(t+h). The final h steps have no target.
inline SeriesTask make_task(std::string name, const Eigen::VectorXd& series, Eigen::Index horizon,
                            SplitSpec split, double mape_offset = 0.0) {
  if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
  const Eigen::Index t_len = series.size();
  if (split.train < 0 || split.validate < 0 || split.test < 0 || split.sum() > t_len)
    throw std::invalid_argument("split exceeds series length " + std::to_string(t_len));
  if (t_len <= horizon) throw std::invalid_argument("series shorter than horizon");
  SeriesTask task;
  task.name = std::move(name);
  task.inputs = series;
  task.targets = series.segment(horizon, t_len - horizon);
  task.horizon = horizon;
  task.split = split;
  task.mape_offset = mape_offset;
  return task;
}

/// Pair two aligned series (system identification): input u(t), target y(t).
inline SeriesTask make_paired_task(std::string name, const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& y, SplitSpec split,
                                   double mape_offset = 0.0) {
  if (u.size() != y.size()) throw DimensionError("paired series must have equal length");
  if (split.train < 0 || split.validate < 0 || split.test < 0 || split.sum() > u.size())
    throw std::invalid_argument("split exceeds series length " + std::to_string(u.size()));
  SeriesTask task;
  task.name = std::move(name);
  task.inputs = u;
  task.targets = y;
  task.horizon = 0;
  task.split = split;
  task.mape_offset = mape_offset;
  return task;
}

inline void write_series_csv(const std::filesystem::path& path, const Eigen::VectorXd& series,
                             const std::string& header = "value") {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << header << "\n";
    out.precision(17);
    for (Eigen::Index t = 0; t < series.size(); ++t) out << series(t) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

inline void write_sidecar(const std::filesystem::path& csv_path, const nlohmann::json& meta) {
  std::filesystem::path side = csv_path;
  side.replace_extension(".meta.json");
  const std::filesystem::path tmp = side.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << meta.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, side);
}

}  // namespace deepesn
