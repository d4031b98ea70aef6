#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "deepesn/datasets.hpp"
#include "deepesn/diagnostics.hpp"
#include "deepesn/errors.hpp"
#include "deepesn/io_util.hpp"
#include "deepesn/metrics.hpp"
#include "deepesn/model_io.hpp"
#include "deepesn/optimizer.hpp"
#include "deepesn/stack.hpp"

namespace deepesn {

// ---------------------------------------------------------------------------
// Declarative experiment configuration (JSON schema documented in the README)
// ---------------------------------------------------------------------------

struct DatasetSpec {
  std::string kind;  // mackey_glass | narma10 | quasi_periodic | seasonal | csv
  std::string name;
  Eigen::Index length = 0;
  std::uint64_t seed = 0;
  // mackey_glass
  double tau = 17.0;
  double delta = 0.1;
  double a = 0.2;
  double b = -0.1;
  int n = 10;
  Eigen::Index transient = 1000;
  // csv
  std::string path;
  int column = 0;
  Eigen::Index drop_last = 0;
  // preprocessing / task
  int smooth_window = 1;
  Eigen::Index horizon = 1;
  SplitSpec split;
  double mape_offset = 0.0;
};

struct EncoderChoice {
  std::string kind = "pca";
  Eigen::Index size = 30;
};

struct ArchitectureSpec {
  int depth = 1;
  Eigen::Index reservoir_size = 300;
  EncoderChoice encoder;
  bool feature_links = true;
  bool direct_input = true;
  double ridge_beta = 1e-5;
  Eigen::Index washout = 30;
  double sparsity = 0.1;
  std::vector<LayerHyper> hyper;  // 1..depth rows; expanded by the copy scheme
};

struct RunSpec {
  int repetitions = 1;
  std::uint64_t base_seed = 1;
  bool parallel = true;
};

struct OptimizerSpec {
  std::string mode = "fixed";  // fixed | ga
  GaConfig ga;
};

struct ExperimentConfig {
  std::string name;
  DatasetSpec dataset;
  ArchitectureSpec architecture;
  OptimizerSpec optimizer;
  RunSpec run;
  std::string output_dir;
};

// ---- JSON (de)serialization ------------------------------------------------

inline void to_json(nlohmann::json& j, const SplitSpec& s) {
  j = {{"train", s.train}, {"validate", s.validate}, {"test", s.test}};
}
inline void from_json(const nlohmann::json& j, SplitSpec& s) {
  s.train = j.value("train", Eigen::Index{0});
  s.validate = j.value("validate", Eigen::Index{0});
  s.test = j.value("test", Eigen::Index{0});
}

inline void to_json(nlohmann::json& j, const DatasetSpec& d) {
  j = {{"kind", d.kind},       {"name", d.name},     {"length", d.length},
       {"seed", d.seed},       {"tau", d.tau},       {"delta", d.delta},
       {"a", d.a},             {"b", d.b},           {"n", d.n},
       {"transient", d.transient}, {"path", d.path}, {"column", d.column},
       {"drop_last", d.drop_last}, {"smooth_window", d.smooth_window},
       {"horizon", d.horizon}, {"split", d.split},   {"mape_offset", d.mape_offset}};
}
inline void from_json(const nlohmann::json& j, DatasetSpec& d) {
  d.kind = j.value("kind", std::string{});
  d.name = j.value("name", d.kind);
  d.length = j.value("length", Eigen::Index{0});
  d.seed = j.value("seed", std::uint64_t{0});
  d.tau = j.value("tau", 17.0);
  d.delta = j.value("delta", 0.1);
  d.a = j.value("a", 0.2);
  d.b = j.value("b", -0.1);
  d.n = j.value("n", 10);
  d.transient = j.value("transient", Eigen::Index{1000});
  d.path = j.value("path", std::string{});
  d.column = j.value("column", 0);
  d.drop_last = j.value("drop_last", Eigen::Index{0});
  d.smooth_window = j.value("smooth_window", 1);
  d.horizon = j.value("horizon", Eigen::Index{1});
  if (j.contains("split")) j.at("split").get_to(d.split);
  d.mape_offset = j.value("mape_offset", 0.0);
}

inline void to_json(nlohmann::json& j, const LayerHyper& h) {
  j = nlohmann::json::array({h.input_scaling, h.spectral_radius, h.leak_rate});
}
inline void from_json(const nlohmann::json& j, LayerHyper& h) {
  if (j.is_array() && j.size() == 3) {
    h.input_scaling = j[0].get<double>();
    h.spectral_radius = j[1].get<double>();
    h.leak_rate = j[2].get<double>();
  } else {
    h.input_scaling = j.at("input_scaling").get<double>();
    h.spectral_radius = j.at("spectral_radius").get<double>();
    h.leak_rate = j.at("leak_rate").get<double>();
  }
}

inline void to_json(nlohmann::json& j, const ArchitectureSpec& a) {
  j = {{"depth", a.depth},
       {"reservoir_size", a.reservoir_size},
       {"encoder", {{"kind", a.encoder.kind}, {"size", a.encoder.size}}},
       {"feature_links", a.feature_links},
       {"direct_input", a.direct_input},
       {"ridge_beta", a.ridge_beta},
       {"washout", a.washout},
       {"sparsity", a.sparsity},
       {"hyperparameters", a.hyper}};
}
inline void from_json(const nlohmann::json& j, ArchitectureSpec& a) {
  a.depth = j.value("depth", 1);
  a.reservoir_size = j.value("reservoir_size", Eigen::Index{300});
  if (j.contains("encoder")) {
    a.encoder.kind = j.at("encoder").value("kind", std::string{"pca"});
    a.encoder.size = j.at("encoder").value("size", Eigen::Index{30});
  }
  a.feature_links = j.value("feature_links", true);
  a.direct_input = j.value("direct_input", true);
  a.ridge_beta = j.value("ridge_beta", 1e-5);
  a.washout = j.value("washout", Eigen::Index{30});
  a.sparsity = j.value("sparsity", 0.1);
  if (j.contains("hyperparameters"))
    a.hyper = j.at("hyperparameters").get<std::vector<LayerHyper>>();
}

inline void to_json(nlohmann::json& j, const GaConfig& g) {
  j = {{"population", g.population},       {"generations", g.generations},
       {"crossover_rate", g.crossover_rate}, {"mutation_rate", g.mutation_rate},
       {"mutation_sigma", g.mutation_sigma}, {"elitism", g.elitism},
       {"tournament", g.tournament},       {"seed", g.seed},
       {"parallel", g.parallel}};
}
inline void from_json(const nlohmann::json& j, GaConfig& g) {
  g.population = j.value("population", 40);
  g.generations = j.value("generations", 80);
  g.crossover_rate = j.value("crossover_rate", 0.9);
  g.mutation_rate = j.value("mutation_rate", 0.1);
  g.mutation_sigma = j.value("mutation_sigma", 0.1);
  g.elitism = j.value("elitism", 2);
  g.tournament = j.value("tournament", 3);
  g.seed = j.value("seed", std::uint64_t{0});
  g.parallel = j.value("parallel", true);
}

inline void to_json(nlohmann::json& j, const OptimizerSpec& o) {
  j = {{"mode", o.mode}, {"ga", o.ga}};
}
inline void from_json(const nlohmann::json& j, OptimizerSpec& o) {
  o.mode = j.value("mode", std::string{"fixed"});
  if (j.contains("ga")) j.at("ga").get_to(o.ga);
}

inline void to_json(nlohmann::json& j, const RunSpec& r) {
  j = {{"repetitions", r.repetitions}, {"base_seed", r.base_seed}, {"parallel", r.parallel}};
}
inline void from_json(const nlohmann::json& j, RunSpec& r) {
  r.repetitions = j.value("repetitions", 1);
  r.base_seed = j.value("base_seed", std::uint64_t{1});
  r.parallel = j.value("parallel", true);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"name", c.name},
       {"dataset", c.dataset},
       {"architecture", c.architecture},
       {"optimizer", c.optimizer},
       {"run", c.run},
       {"output_dir", c.output_dir}};
}
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.name = j.value("name", std::string{"experiment"});
  if (j.contains("dataset")) j.at("dataset").get_to(c.dataset);
  if (j.contains("architecture")) j.at("architecture").get_to(c.architecture);
  if (j.contains("optimizer")) j.at("optimizer").get_to(c.optimizer);
  if (j.contains("run")) j.at("run").get_to(c.run);
  c.output_dir = j.value("output_dir", std::string{});
}

/// Collect every violated field; throws ConfigError listing all of them.
inline void validate_config(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  const auto& d = c.dataset;
  const bool known_kind = d.kind == "mackey_glass" || d.kind == "narma10" ||
                          d.kind == "quasi_periodic" || d.kind == "seasonal" || d.kind == "csv";
  if (!known_kind) bad.push_back("dataset.kind: must be one of mackey_glass|narma10|quasi_periodic|seasonal|csv");
  if (d.kind != "csv" && d.length < 1) bad.push_back("dataset.length: must be >= 1");
  if (d.kind == "csv" && d.path.empty()) bad.push_back("dataset.path: required for csv datasets");
  if (d.smooth_window < 1 || d.smooth_window % 2 == 0)
    bad.push_back("dataset.smooth_window: must be odd and >= 1");
  if (d.horizon < 0) bad.push_back("dataset.horizon: must be nonnegative");
  if (d.split.train < 1) bad.push_back("dataset.split.train: must be >= 1");
  if (d.split.validate < 0) bad.push_back("dataset.split.validate: must be nonnegative");
  if (d.split.test < 0) bad.push_back("dataset.split.test: must be nonnegative");
  if (d.drop_last < 0) bad.push_back("dataset.drop_last: must be nonnegative");

  const auto& a = c.architecture;
  if (a.depth < 1) bad.push_back("architecture.depth: must be >= 1");
  if (a.reservoir_size < 1) bad.push_back("architecture.reservoir_size: must be >= 1");
  if (a.encoder.size < 1) bad.push_back("architecture.encoder.size: must be >= 1");
  bool kind_ok = true;
  try {
    encoder_kind_from_string(a.encoder.kind);
  } catch (const std::exception&) {
    kind_ok = false;
  }
  if (!kind_ok) bad.push_back("architecture.encoder.kind: must be one of pca|elm_ae|rp|identity");
  if (kind_ok && encoder_kind_from_string(a.encoder.kind) == EncoderKind::Pca &&
      a.encoder.size > a.reservoir_size)
    bad.push_back("architecture.encoder.size: PCA size must not exceed reservoir_size");
  if (a.ridge_beta < 0.0) bad.push_back("architecture.ridge_beta: must be nonnegative");
  if (a.washout < 0) bad.push_back("architecture.washout: must be nonnegative");
  if (a.sparsity <= 0.0 || a.sparsity > 1.0)
    bad.push_back("architecture.sparsity: must be in (0, 1]");
  if (a.hyper.empty()) bad.push_back("architecture.hyperparameters: need at least one [IS, SR, gamma] row");
  for (std::size_t i = 0; i < a.hyper.size(); ++i) {
    const auto& h = a.hyper[i];
    const std::string where = "architecture.hyperparameters[" + std::to_string(i) + "]";
    if (h.input_scaling < 0.0 || h.input_scaling > 1.0) bad.push_back(where + ".IS: must be in [0, 1]");
    if (h.spectral_radius <= 0.0 || h.spectral_radius >= 1.0)
      bad.push_back(where + ".SR: must be in (0, 1)");
    if (h.leak_rate <= 0.0 || h.leak_rate > 1.0) bad.push_back(where + ".gamma: must be in (0, 1]");
  }

  if (c.run.repetitions < 1) bad.push_back("run.repetitions: must be >= 1");
  if (c.optimizer.mode != "fixed" && c.optimizer.mode != "ga")
    bad.push_back("optimizer.mode: must be fixed or ga");
  if (c.optimizer.mode == "ga") {
    try {
      c.optimizer.ga.validate();
    } catch (const std::exception& e) {
      bad.push_back(std::string("optimizer.ga: ") + e.what());
    }
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

// ---------------------------------------------------------------------------
// Task and model assembly
// ---------------------------------------------------------------------------

/// Materialize the configured series (generator or CSV), preprocess, and
/// pair inputs with targets.
inline SeriesTask build_task(const DatasetSpec& d) {
  if (d.kind == "narma10") {
    Narma10Series series = gen_narma10(d.length, d.seed);
    return make_paired_task(d.name, series.u, series.y, d.split, d.mape_offset);
  }
  Eigen::VectorXd series;
  if (d.kind == "mackey_glass") {
    MackeyGlassParams p;
    p.length = d.length;
    p.tau = d.tau;
    p.delta = d.delta;
    p.a = d.a;
    p.b = d.b;
    p.n = d.n;
    p.seed = d.seed;
    p.transient = d.transient;
    series = gen_mackey_glass(p);
  } else if (d.kind == "quasi_periodic") {
    series = gen_quasi_periodic(d.length, d.seed);
  } else if (d.kind == "seasonal") {
    series = gen_seasonal_daily(d.length, d.seed);
  } else if (d.kind == "csv") {
    series = load_csv(d.path, d.column);
  } else {
    throw std::invalid_argument("unknown dataset kind: " + d.kind);
  }
  if (d.drop_last > 0) {
    if (d.drop_last >= series.size()) throw std::invalid_argument("drop_last removes whole series");
    series = series.head(series.size() - d.drop_last).eval();
  }
  if (d.smooth_window > 1) series = smooth(series, d.smooth_window);
  return make_task(d.name, series, d.horizon, d.split, d.mape_offset);
}

/// Extend per-layer hyperparameter rows to `depth` layers. Missing layers
/// reuse rows 2 and 3 alternately (the hyperparameter-copy deepening scheme);
/// with fewer than three rows the last row is reused.
inline std::vector<LayerHyper> expand_hyper(const std::vector<LayerHyper>& given, int depth) {
  if (given.empty()) throw std::invalid_argument("need at least one hyperparameter row");
  std::vector<LayerHyper> out;
  out.reserve(static_cast<std::size_t>(depth));
  for (int i = 0; i < depth; ++i) {
    if (i < static_cast<int>(given.size())) {
      out.push_back(given[static_cast<std::size_t>(i)]);
    } else if (given.size() >= 2) {
      const std::size_t cycle = given.size() - 1;
      out.push_back(given[1 + static_cast<std::size_t>((i - 1) % static_cast<int>(cycle))]);
    } else {
      out.push_back(given[0]);
    }
  }
  return out;
}

/// Instantiate the full wiring for one repetition. Layer and encoder seeds
/// are derived from the model seed so that repetitions are independent but
/// reproducible.
inline DeepEsnConfig build_model_config(const ArchitectureSpec& a, Eigen::Index input_dim,
                                        std::uint64_t model_seed) {
  const EncoderKind kind = encoder_kind_from_string(a.encoder.kind);
  const Eigen::Index enc_out = kind == EncoderKind::Identity ? a.reservoir_size : a.encoder.size;
  const std::vector<LayerHyper> hyper = expand_hyper(a.hyper, a.depth);

  DeepEsnConfig config;
  config.feature_links = a.feature_links;
  config.direct_input = a.direct_input;
  config.ridge_beta = a.ridge_beta;
  config.washout = a.washout;
  for (int i = 0; i < a.depth; ++i) {
    ReservoirParams p;
    p.size = a.reservoir_size;
    p.input_dim = i == 0 ? input_dim : enc_out;
    p.input_scaling = hyper[static_cast<std::size_t>(i)].input_scaling;
    p.spectral_radius = hyper[static_cast<std::size_t>(i)].spectral_radius;
    p.leak_rate = hyper[static_cast<std::size_t>(i)].leak_rate;
    p.sparsity = a.sparsity;
    p.seed = mix_seed(model_seed, 101 + static_cast<std::uint64_t>(i));
    config.layers.push_back(p);
  }
  for (int j = 0; j + 1 < a.depth; ++j) {
    EncoderSpec e;
    e.kind = kind;
    e.input_dim = a.reservoir_size;
    e.output_dim = enc_out;
    e.seed = mix_seed(model_seed, 401 + static_cast<std::uint64_t>(j));
    config.encoders.push_back(e);
  }
  return config;
}

// ---------------------------------------------------------------------------
// Training, evaluation, aggregation
// ---------------------------------------------------------------------------

/// Score one split: drive the model over the series prefix ending at the
/// split boundary (fresh states, per-layer washout) and compare predictions
/// against the targets inside the split.
inline MetricReport evaluate_split(const DeepEsnModel& model, const SeriesTask& task,
                                   SplitPart part) {
  const Eigen::Index skip = model.config().depth() * model.config().washout;
  const Eigen::Index begin = std::max(task.part_begin(part), skip);
  const Eigen::Index end = std::min(task.part_end(part), task.steps());
  const Eigen::Index scored_end = std::min(end, task.target_steps());
  if (scored_end <= begin)
    throw std::invalid_argument("split '" + to_string(part) + "' has no scorable steps");

  const Eigen::MatrixXd predictions =
      model.predict(task.inputs.topRows(end), model.config().washout);
  const Eigen::VectorXd y_hat = predictions.col(0).segment(begin - skip, scored_end - begin);
  const Eigen::VectorXd y = task.targets.col(0).segment(begin, scored_end - begin);
  return evaluate(y, y_hat, task.mape_offset);
}

struct RepetitionResult {
  int repetition = 0;
  std::uint64_t model_seed = 0;
  bool ok = false;
  std::string error;
  MetricReport train;
  MetricReport validation;
  MetricReport test;
  std::shared_ptr<DeepEsnModel> model;
};

/// Train one model on the task's training split and score all three splits.
inline RepetitionResult train_and_score(const ArchitectureSpec& arch, const SeriesTask& task,
                                        std::uint64_t model_seed, int repetition = 0) {
  RepetitionResult r;
  r.repetition = repetition;
  r.model_seed = model_seed;
  try {
    const Eigen::Index n_train = std::min(task.split.train, task.target_steps());
    auto model = std::make_shared<DeepEsnModel>(
        build_model_config(arch, task.inputs.cols(), model_seed));
    model->train(task.inputs.topRows(n_train), task.targets.topRows(n_train));
    r.train = evaluate_split(*model, task, SplitPart::Train);
    if (task.split.validate > 0) r.validation = evaluate_split(*model, task, SplitPart::Validate);
    if (task.split.test > 0) r.test = evaluate_split(*model, task, SplitPart::Test);
    r.model = std::move(model);
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

struct MetricAggregate {
  double rmse_mean = 0.0, rmse_std = 0.0;
  double nrmse_mean = 0.0, nrmse_std = 0.0;
  double mape_mean = 0.0, mape_std = 0.0;
  int n = 0;
};

inline void to_json(nlohmann::json& j, const MetricAggregate& a) {
  j = {{"rmse_mean", a.rmse_mean},   {"rmse_std", a.rmse_std},
       {"nrmse_mean", a.nrmse_mean}, {"nrmse_std", a.nrmse_std},
       {"mape_mean", a.mape_mean},   {"mape_std", a.mape_std},
       {"n", a.n}};
}

struct ExperimentResult {
  std::vector<RepetitionResult> repetitions;
  MetricAggregate train, validation, test;
  int failed = 0;

  const RepetitionResult* best_by_validation() const {
    const RepetitionResult* best = nullptr;
    for (const auto& r : repetitions) {
      if (!r.ok) continue;
      const double score = r.validation.n > 0 ? r.validation.rmse : r.train.rmse;
      const double best_score =
          best ? (best->validation.n > 0 ? best->validation.rmse : best->train.rmse)
               : std::numeric_limits<double>::infinity();
      if (score < best_score) best = &r;
    }
    return best;
  }
};

namespace detail {

inline MetricAggregate aggregate(const std::vector<RepetitionResult>& reps,
                                 MetricReport RepetitionResult::*field) {
  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  std::vector<double> rm, nr, mp;
  for (const auto& r : reps) {
    if (!r.ok || (r.*field).n == 0) continue;
    rm.push_back((r.*field).rmse);
    nr.push_back((r.*field).nrmse);
    mp.push_back((r.*field).mape);
  }
  MetricAggregate a;
  if (rm.empty()) return a;
  std::tie(a.rmse_mean, a.rmse_std) = mean_std(rm);
  std::tie(a.nrmse_mean, a.nrmse_std) = mean_std(nr);
  std::tie(a.mape_mean, a.mape_std) = mean_std(mp);
  a.n = static_cast<int>(rm.size());
  return a;
}

}  // namespace detail

/// Run `repetitions` independent trainings (repetition r uses model seed
/// base_seed + r) and aggregate mean/std per metric. Failed repetitions are
/// excluded from aggregates and reported.
inline ExperimentResult run_repetitions(const ArchitectureSpec& arch, const SeriesTask& task,
                                        const RunSpec& run) {
  ExperimentResult result;
  result.repetitions.resize(static_cast<std::size_t>(run.repetitions));
  auto work = [&](int r) {
    return train_and_score(arch, task, run.base_seed + static_cast<std::uint64_t>(r), r);
  };
  if (run.parallel && run.repetitions > 1 && std::thread::hardware_concurrency() > 1) {
    std::vector<std::future<RepetitionResult>> futures;
    futures.reserve(static_cast<std::size_t>(run.repetitions));
    for (int r = 0; r < run.repetitions; ++r)
      futures.push_back(std::async(std::launch::async, work, r));
    for (int r = 0; r < run.repetitions; ++r)
      result.repetitions[static_cast<std::size_t>(r)] = futures[static_cast<std::size_t>(r)].get();
  } else {
    for (int r = 0; r < run.repetitions; ++r)
      result.repetitions[static_cast<std::size_t>(r)] = work(r);
  }
  for (const auto& r : result.repetitions)
    if (!r.ok) ++result.failed;
  result.train = detail::aggregate(result.repetitions, &RepetitionResult::train);
  result.validation = detail::aggregate(result.repetitions, &RepetitionResult::validation);
  result.test = detail::aggregate(result.repetitions, &RepetitionResult::test);
  return result;
}

inline nlohmann::json result_to_json(const ExperimentConfig& config,
                                     const ExperimentResult& result) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : result.repetitions) {
    nlohmann::json row = {{"repetition", r.repetition},
                          {"model_seed", r.model_seed},
                          {"ok", r.ok}};
    if (r.ok) {
      row["train"] = r.train;
      if (r.validation.n > 0) row["validation"] = r.validation;
      if (r.test.n > 0) row["test"] = r.test;
    } else {
      row["error"] = r.error;
    }
    reps.push_back(std::move(row));
  }
  return {{"experiment", config.name},
          {"repetitions", config.run.repetitions},
          {"failed", result.failed},
          {"train", result.train},
          {"validation", result.validation},
          {"test", result.test},
          {"per_repetition", reps}};
}

inline std::string result_table(const ExperimentConfig& config, const ExperimentResult& result) {
  std::ostringstream out;
  out.setf(std::ios::scientific);
  out.precision(3);
  out << "experiment: " << config.name << "  (repetitions " << config.run.repetitions
      << ", failed " << result.failed << ")\n";
  out << "split        rmse (mean +- std)          nrmse                     mape%\n";
  auto row = [&out](const std::string& name, const MetricAggregate& a) {
    if (a.n == 0) return;
    out << name << std::string(name.size() < 12 ? 12 - name.size() : 1, ' ') << a.rmse_mean
        << " +- " << a.rmse_std << "   " << a.nrmse_mean << " +- " << a.nrmse_std << "   "
        << a.mape_mean << " +- " << a.mape_std << "\n";
  };
  row("train", result.train);
  row("validation", result.validation);
  row("test", result.test);
  return out.str();
}

/// Dump `t,target,prediction` rows for one split (plot-ready).
inline void write_predictions_csv(const DeepEsnModel& model, const SeriesTask& task, SplitPart part,
                                  const std::filesystem::path& path) {
  const Eigen::Index skip = model.config().depth() * model.config().washout;
  const Eigen::Index begin = std::max(task.part_begin(part), skip);
  const Eigen::Index end = std::min(task.part_end(part), task.steps());
  const Eigen::Index scored_end = std::min(end, task.target_steps());
  const Eigen::MatrixXd predictions =
      model.predict(task.inputs.topRows(end), model.config().washout);
  std::ostringstream out;
  out.precision(17);
  out << "t,target,prediction\n";
  for (Eigen::Index t = begin; t < scored_end; ++t)
    out << t << "," << task.targets(t, 0) << "," << predictions(t - skip, 0) << "\n";
  write_text_atomic(path, out.str());
}

// ---------------------------------------------------------------------------
// Hyperparameter search and structure sweeps
// ---------------------------------------------------------------------------

/// GA over (IS, SR, gamma) per layer; fitness is the validation RMSE of a
/// model trained on the training split. One fixed model seed across all
/// individuals so fitness differences reflect hyperparameters only.
inline GaResult optimize_hyperparameters(const ExperimentConfig& config, const SeriesTask& task) {
  if (task.split.validate <= 0)
    throw std::invalid_argument("hyperparameter search needs a validation split");
  const Eigen::Index genome = static_cast<Eigen::Index>(3 * config.architecture.depth);
  const std::uint64_t model_seed = config.run.base_seed;

  FitnessFn fitness = [&config, &task, model_seed](const Eigen::VectorXd& genes) {
    ArchitectureSpec arch = config.architecture;
    arch.hyper = genes_to_hyper(genes);
    const RepetitionResult r = train_and_score(arch, task, model_seed);
    if (!r.ok) return std::numeric_limits<double>::infinity();
    return r.validation.rmse;
  };
  return evolve(fitness, genome, config.optimizer.ga);
}

struct SweepRow {
  Eigen::Index value = 0;
  bool ok = false;
  std::string error;
  MetricAggregate validation;
  MetricAggregate test;
};

/// Train/evaluate one configuration per grid point along the chosen axis.
/// Depth points reuse the hyperparameter rows through the copy scheme.
inline std::vector<SweepRow> sweep_experiment(const ExperimentConfig& config,
                                              const SeriesTask& task, SweepAxis axis,
                                              int repetitions = 1) {
  std::vector<SweepRow> rows;
  for (const Eigen::Index value : sweep_grid(axis)) {
    SweepRow row;
    row.value = value;
    try {
      ArchitectureSpec arch = config.architecture;
      switch (axis) {
        case SweepAxis::Depth: arch.depth = static_cast<int>(value); break;
        case SweepAxis::EncoderSize: arch.encoder.size = value; break;
        case SweepAxis::ReservoirSize:
          arch.reservoir_size = value;
          if (arch.encoder.size > value) arch.encoder.size = value;  // keep PCA legal
          break;
      }
      RunSpec run = config.run;
      run.repetitions = repetitions;
      const ExperimentResult result = run_repetitions(arch, task, run);
      if (result.validation.n == 0 && result.test.n == 0)
        throw std::runtime_error(result.repetitions.empty() ? "no repetitions"
                                                            : result.repetitions.front().error);
      row.validation = result.validation;
      row.test = result.test;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out.precision(12);
  out << to_string(axis)
      << ",ok,val_rmse_mean,val_rmse_std,test_rmse_mean,test_rmse_std,test_nrmse_mean,"
         "test_mape_mean,error\n";
  for (const auto& r : rows) {
    out << r.value << "," << (r.ok ? 1 : 0) << ",";
    if (r.ok) {
      out << r.validation.rmse_mean << "," << r.validation.rmse_std << "," << r.test.rmse_mean
          << "," << r.test.rmse_std << "," << r.test.nrmse_mean << "," << r.test.mape_mean << ",";
    } else {
      out << ",,,,,,";
    }
    out << "\"" << r.error << "\"\n";
  }
  return out.str();
}

}  // namespace deepesn
