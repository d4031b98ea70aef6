// Command-line front end: dataset generation, training, evaluation,
// hyperparameter search, structure sweeps, and dynamics diagnostics, all
// driven by declarative JSON experiment configs.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "deepesn/diagnostics.hpp"
#include "deepesn/experiment.hpp"
#include "deepesn/io_util.hpp"
#include "deepesn/model_io.hpp"

namespace fs = std::filesystem;
using namespace deepesn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json doc;
  try {
    doc = read_json(path);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  for (const auto& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError({"--set expects key.path=value, got '" + kv + "'"});
    set_json_path(doc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  ExperimentConfig config;
  try {
    config = doc.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError({std::string("config does not match the schema: ") + e.what()});
  }
  validate_config(config);
  return config;
}

fs::path resolve_output_dir(const ExperimentConfig& config, const std::string& cli_dir) {
  if (!cli_dir.empty()) return cli_dir;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* env = std::getenv("DEEPESN_OUTPUT_DIR")) return fs::path(env) / config.name;
  return fs::path("out") / config.name;
}

void write_resolved_config(const ExperimentConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_json_atomic(dir / "resolved_config.json", nlohmann::json(config));
}

int cmd_dataset(const ExperimentConfig& config, const fs::path& dir) {
  const DatasetSpec& d = config.dataset;
  SeriesTask task = build_task(d);
  fs::create_directories(dir);
  const std::string base = d.name.empty() ? d.kind : d.name;
  write_series_csv(dir / (base + ".csv"), task.inputs.col(0));
  if (d.kind == "narma10")
    write_series_csv(dir / (base + "_target.csv"), task.targets.col(0), "target");
  nlohmann::json meta = nlohmann::json(d);
  meta["rows"] = task.steps();
  write_sidecar(dir / (base + ".csv"), meta);
  write_resolved_config(config, dir);
  std::cout << "wrote " << (dir / (base + ".csv")).string() << " (" << task.steps() << " rows)\n";
  return kExitOk;
}

int cmd_train(ExperimentConfig config, const fs::path& dir) {
  SeriesTask task = build_task(config.dataset);

  if (config.optimizer.mode == "ga") {
    GaConfig ga = config.optimizer.ga;
    if (ga.checkpoint_path.empty()) {
      fs::create_directories(dir);
      ga.checkpoint_path = (dir / "ga_checkpoint.json").string();
    }
    ExperimentConfig search = config;
    search.optimizer.ga = ga;
    std::cerr << "running GA hyperparameter search (population " << ga.population
              << ", generations " << ga.generations << ")...\n";
    const GaResult ga_result = optimize_hyperparameters(search, task);
    config.architecture.hyper = genes_to_hyper(ga_result.best.genes);
    std::cerr << "GA best validation RMSE " << ga_result.best.fitness << " after "
              << ga_result.generations_run << " generations\n";
  }

  const ExperimentResult result = run_repetitions(config.architecture, task, config.run);
  write_resolved_config(config, dir);
  write_json_atomic(dir / "metrics.json", result_to_json(config, result));
  write_text_atomic(dir / "metrics.txt", result_table(config, result));
  std::cout << result_table(config, result);

  for (const auto& r : result.repetitions)
    if (!r.ok)
      std::cerr << "warning: repetition " << r.repetition << " failed (" << r.error
                << "); excluded from aggregates\n";

  const RepetitionResult* best = result.best_by_validation();
  if (!best) {
    std::cerr << "error: every repetition failed\n";
    return kExitRuntime;
  }
  for (std::size_t j = 0; j < best->model->encoders().size(); ++j)
    if (best->model->encoders()[j].rank_deficient())
      std::cerr << "warning: encoder " << j + 1
                << " found fewer informative components than requested; "
                   "missing rows are zero\n";

  save_model(*best->model, dir / "model.desn");
  if (task.split.test > 0)
    write_predictions_csv(*best->model, task, SplitPart::Test, dir / "predictions_test.csv");
  std::cout << "model (best validation, repetition " << best->repetition << ") -> "
            << (dir / "model.desn").string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const ExperimentConfig& config, const fs::path& dir,
             const std::string& split) {
  const DeepEsnModel model = load_model(model_path);
  const SeriesTask task = build_task(config.dataset);
  SplitPart part = SplitPart::Test;
  if (split == "train") part = SplitPart::Train;
  else if (split == "validate") part = SplitPart::Validate;
  else if (split != "test") throw ConfigError({"--split must be train|validate|test"});

  const MetricReport report = evaluate_split(model, task, part);
  const nlohmann::json j = {{"experiment", config.name}, {"split", split}, {"metrics", report}};
  std::cout << j.dump(2) << "\n";
  if (!dir.empty()) {
    write_resolved_config(config, dir);
    write_json_atomic(dir / ("eval_" + split + ".json"), j);
  }
  return kExitOk;
}

int cmd_optimize(ExperimentConfig config, const fs::path& dir) {
  if (config.optimizer.mode != "ga")
    throw ConfigError({"optimizer.mode: must be 'ga' for the optimize command"});
  SeriesTask task = build_task(config.dataset);
  fs::create_directories(dir);
  if (config.optimizer.ga.checkpoint_path.empty())
    config.optimizer.ga.checkpoint_path = (dir / "ga_checkpoint.json").string();
  write_resolved_config(config, dir);

  const GaResult result = optimize_hyperparameters(config, task);
  const std::vector<LayerHyper> best = genes_to_hyper(result.best.genes);

  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : result.history)
    history.push_back({{"generation", h.generation}, {"best", h.best}, {"mean", h.mean}});
  write_json_atomic(dir / "best_hyperparameters.json",
                    {{"experiment", config.name},
                     {"validation_rmse", result.best.fitness},
                     {"generations_run", result.generations_run},
                     {"hyperparameters", best},
                     {"history", history}});

  ExperimentConfig tuned = config;
  tuned.architecture.hyper = best;
  tuned.optimizer.mode = "fixed";
  write_json_atomic(dir / "optimized_config.json", nlohmann::json(tuned));

  std::cout << "best validation RMSE " << result.best.fitness << " after "
            << result.generations_run << " generations\n"
            << "hyperparameters -> " << (dir / "best_hyperparameters.json").string() << "\n";
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& config, const fs::path& dir, const std::string& axis_name,
              int reps) {
  const SweepAxis axis = sweep_axis_from_string(axis_name);
  SeriesTask task = build_task(config.dataset);
  write_resolved_config(config, dir);
  const std::vector<SweepRow> rows = sweep_experiment(config, task, axis, reps);
  const fs::path csv = dir / ("sweep_" + axis_name + ".csv");
  write_text_atomic(csv, sweep_csv(axis, rows));
  int failed = 0;
  for (const auto& r : rows)
    if (!r.ok) ++failed;
  std::cout << "swept " << rows.size() << " points (" << failed << " failed) -> " << csv.string()
            << "\n";
  return kExitOk;
}

int cmd_diagnose(const std::string& model_path, const ExperimentConfig& config,
                 const fs::path& dir, const std::string& kind, Eigen::Index perturb_step,
                 double magnitude, Eigen::Index horizon, bool full_trace) {
  const DeepEsnModel model = load_model(model_path);
  write_resolved_config(config, dir);

  if (kind == "esp") {
    write_esp_csv(dir / "esp.csv", check_esp(model));
    std::cout << "-> " << (dir / "esp.csv").string() << "\n";
    return kExitOk;
  }

  const SeriesTask task = build_task(config.dataset);
  if (kind == "condition") {
    const Eigen::Index n = std::min(task.split.train, task.steps());
    const CondReport report = condition_analysis(model, task.inputs.topRows(n));
    write_cond_csv(dir / "condition_numbers.csv", report);
    std::cout << "-> " << (dir / "condition_numbers.csv").string() << "\n";
    return kExitOk;
  }
  if (kind == "perturbation") {
    if (horizon > task.steps()) throw ConfigError({"--horizon exceeds the dataset length"});
    const PerturbTrace trace =
        perturbation_trace(model, task.inputs.topRows(horizon), perturb_step, magnitude, horizon);
    const Eigen::Index from = full_trace ? 0 : std::max<Eigen::Index>(0, perturb_step - 20);
    write_trace_csv(dir / "perturbation_trace.csv", trace, from);
    std::cout << "-> " << (dir / "perturbation_trace.csv").string() << "\n";
    return kExitOk;
  }
  throw ConfigError({"--kind must be condition|esp|perturbation"});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical echo-state-network toolkit"};
  app.require_subcommand(1);

  std::string config_path, output_dir, model_path;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* opt = cmd->add_option("-c,--config", config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    cmd->add_option("-o,--output-dir", output_dir, "output directory (default: config, then $DEEPESN_OUTPUT_DIR)");
    cmd->add_option("--set", overrides, "override a config leaf, e.g. --set run.base_seed=7")
        ->take_all();
  };

  auto* dataset = app.add_subcommand("dataset", "generate or preprocess a dataset and export CSV");
  add_common(dataset);

  auto* train = app.add_subcommand("train", "train over R repetitions, report metrics, save model");
  add_common(train);

  auto* eval = app.add_subcommand("eval", "evaluate a saved model on a task split");
  add_common(eval);
  std::string split = "test";
  eval->add_option("-m,--model", model_path, "model file")->required();
  eval->add_option("--split", split, "train|validate|test (default test)");

  auto* optimize = app.add_subcommand("optimize", "GA hyperparameter search on the validation split");
  add_common(optimize);

  auto* sweep = app.add_subcommand("sweep", "grid sweep over depth, encoder size, or reservoir size");
  add_common(sweep);
  std::string axis = "depth";
  int sweep_reps = 1;
  sweep->add_option("--axis", axis, "depth|encoder_size|reservoir_size")->required();
  sweep->add_option("--reps", sweep_reps, "repetitions per grid point (default 1)");

  auto* diagnose = app.add_subcommand("diagnose", "condition numbers, stability report, perturbation traces");
  add_common(diagnose);
  std::string diag_kind = "condition";
  Eigen::Index perturb_step = 200, horizon = 300;
  double magnitude = 0.1;
  bool full_trace = false;
  diagnose->add_option("-m,--model", model_path, "model file")->required();
  diagnose->add_option("--kind", diag_kind, "condition|esp|perturbation")->required();
  diagnose->add_option("--perturb-step", perturb_step, "perturbation step (default 200)");
  diagnose->add_option("--magnitude", magnitude, "perturbation magnitude (default 0.1)");
  diagnose->add_option("--horizon", horizon, "trace length (default 300)");
  diagnose->add_flag("--full", full_trace, "emit the full trace instead of the windowed tail");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig config = load_config(config_path, overrides);
    const fs::path dir = resolve_output_dir(config, output_dir);

    if (dataset->parsed()) return cmd_dataset(config, dir);
    if (train->parsed()) return cmd_train(config, dir);
    if (eval->parsed()) return cmd_eval(model_path, config, dir, split);
    if (optimize->parsed()) return cmd_optimize(config, dir);
    if (sweep->parsed()) return cmd_sweep(config, dir, axis, sweep_reps);
    if (diagnose->parsed())
      return cmd_diagnose(model_path, config, dir, diag_kind, perturb_step, magnitude, horizon,
                          full_trace);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
