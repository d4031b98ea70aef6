#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "deepesn/errors.hpp"
#include "deepesn/random.hpp"

namespace deepesn {

struct GaConfig {
  int population = 40;
  int generations = 80;
  double crossover_rate = 0.9;
  double mutation_rate = 0.1;   // per gene
  double mutation_sigma = 0.1;
  int elitism = 2;
  int tournament = 3;
  std::uint64_t seed = 0;
  bool parallel = true;
  double stagnation_eps = 1e-9;
  int stagnation_window = 10;
  std::string checkpoint_path;  // empty disables checkpointing

  void validate() const {
    if (population < 1) throw std::invalid_argument("population must be >= 1");
    if (generations < 1) throw std::invalid_argument("generations must be >= 1");
    if (crossover_rate < 0.0 || crossover_rate > 1.0)
      throw std::invalid_argument("crossover_rate must be in [0, 1]");
    if (mutation_rate < 0.0 || mutation_rate > 1.0)
      throw std::invalid_argument("mutation_rate must be in [0, 1]");
    if (mutation_sigma <= 0.0) throw std::invalid_argument("mutation_sigma must be positive");
    if (elitism < 0) throw std::invalid_argument("elitism must be nonnegative");
    if (tournament < 1) throw std::invalid_argument("tournament must be >= 1");
  }
};

struct Individual {
  Eigen::VectorXd genes;  // in [0, 1]^len
  double fitness = std::numeric_limits<double>::infinity();
};

struct GaGenerationStats {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
};

struct GaResult {
  Individual best;
  std::vector<GaGenerationStats> history;
  int generations_run = 0;
};

/// Per-layer hyperparameters searched by the GA.
struct LayerHyper {
  double input_scaling = 0.5;
  double spectral_radius = 0.9;
  double leak_rate = 1.0;
};

/// Gene layout is (IS, SR, gamma) per layer, all in [0, 1]. SR is mapped into
/// (eps, 1-eps) so that every decoded value is a legal spectral radius.
inline std::vector<LayerHyper> genes_to_hyper(const Eigen::VectorXd& genes) {
  if (genes.size() % 3 != 0) throw DimensionError("genome length must be a multiple of 3");
  constexpr double eps = 1e-3;
  std::vector<LayerHyper> out(static_cast<std::size_t>(genes.size() / 3));
  for (std::size_t k = 0; k < out.size(); ++k) {
    const Eigen::Index base = static_cast<Eigen::Index>(3 * k);
    out[k].input_scaling = genes(base);
    out[k].spectral_radius = eps + genes(base + 1) * (1.0 - 2.0 * eps);
    out[k].leak_rate = genes(base + 2);
  }
  return out;
}

using FitnessFn = std::function<double(const Eigen::VectorXd&)>;

namespace detail {

inline void write_checkpoint(const GaConfig& ga, int generation,
                             const std::vector<Individual>& population, const Individual& best,
                             double mean_fitness) {
  if (ga.checkpoint_path.empty()) return;
  nlohmann::json pop = nlohmann::json::array();
  for (const auto& ind : population) {
    pop.push_back({{"genes", std::vector<double>(ind.genes.data(), ind.genes.data() + ind.genes.size())},
                   {"fitness", ind.fitness}});
  }
  nlohmann::json j = {
      {"generation", generation},
      {"best_genes", std::vector<double>(best.genes.data(), best.genes.data() + best.genes.size())},
      {"best_fitness", best.fitness},
      {"mean_fitness", mean_fitness},
      {"population", pop}};
  const std::filesystem::path path(ga.checkpoint_path);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<double> evaluate_population(const FitnessFn& fitness,
                                               const std::vector<Individual>& population,
                                               bool parallel) {
  const std::size_t n = population.size();
  std::vector<double> values(n, std::numeric_limits<double>::infinity());
  auto eval_one = [&](std::size_t i) {
    try {
      const double f = fitness(population[i].genes);
      return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      // a failed training run disqualifies the individual, not the search
      return std::numeric_limits<double>::infinity();
    }
  };
  if (parallel && n > 1 && std::thread::hardware_concurrency() > 1) {
    std::vector<std::future<double>> futures;
    futures.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      futures.push_back(std::async(std::launch::async, eval_one, i));
    for (std::size_t i = 0; i < n; ++i) values[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < n; ++i) values[i] = eval_one(i);
  }
  return values;
}

}  // namespace detail

/// Minimize `fitness` over [0, 1]^genome_length with tournament selection,
/// uniform crossover, clamped Gaussian mutation, and elitism. Lower fitness
/// is better. Deterministic for a fixed seed; fitness evaluations may run in
/// parallel but are collected in index order before selection.
inline GaResult evolve(const FitnessFn& fitness, Eigen::Index genome_length, const GaConfig& ga) {
  ga.validate();
  if (genome_length < 1) throw std::invalid_argument("genome_length must be >= 1");

  Rng rng = make_rng(ga.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, ga.mutation_sigma);

  std::vector<Individual> population(static_cast<std::size_t>(ga.population));
  for (auto& ind : population) {
    ind.genes.resize(genome_length);
    for (Eigen::Index g = 0; g < genome_length; ++g) ind.genes(g) = unit(rng);
  }

  GaResult result;
  std::vector<double> best_by_generation;

  auto evaluate_and_record = [&](int generation) {
    const std::vector<double> values = detail::evaluate_population(fitness, population, ga.parallel);
    double mean = 0.0;
    int finite = 0;
    for (std::size_t i = 0; i < population.size(); ++i) {
      population[i].fitness = values[i];
      if (std::isfinite(values[i])) {
        mean += values[i];
        ++finite;
      }
    }
    mean = finite > 0 ? mean / finite : std::numeric_limits<double>::infinity();
    std::stable_sort(population.begin(), population.end(),
                     [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
    if (generation == 0 || population.front().fitness < result.best.fitness)
      result.best = population.front();
    // history records each generation's own best; with elitism >= 1 this is
    // nonincreasing and coincides with the running best
    result.history.push_back({generation, population.front().fitness, mean});
    best_by_generation.push_back(result.best.fitness);
    detail::write_checkpoint(ga, generation, population, result.best, mean);
  };

  auto tournament_pick = [&]() -> const Individual& {
    std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
    std::size_t winner = pick(rng);
    for (int k = 1; k < ga.tournament; ++k) {
      const std::size_t challenger = pick(rng);
      if (population[challenger].fitness < population[winner].fitness) winner = challenger;
    }
    return population[winner];
  };

  evaluate_and_record(0);

  for (int gen = 1; gen < ga.generations; ++gen) {
    std::vector<Individual> next;
    next.reserve(population.size());
    const int elites = std::min<int>(ga.elitism, static_cast<int>(population.size()));
    for (int e = 0; e < elites; ++e) next.push_back(population[static_cast<std::size_t>(e)]);

    while (next.size() < population.size()) {
      const Individual& p1 = tournament_pick();
      const Individual& p2 = tournament_pick();
      Individual child;
      child.genes = p1.genes;
      if (unit(rng) < ga.crossover_rate) {
        for (Eigen::Index g = 0; g < genome_length; ++g)
          if (unit(rng) < 0.5) child.genes(g) = p2.genes(g);
      }
      for (Eigen::Index g = 0; g < genome_length; ++g) {
        if (unit(rng) < ga.mutation_rate)
          child.genes(g) = std::clamp(child.genes(g) + gauss(rng), 0.0, 1.0);
      }
      next.push_back(std::move(child));
    }
    population = std::move(next);
    evaluate_and_record(gen);

    const int window = ga.stagnation_window;
    if (static_cast<int>(best_by_generation.size()) > window) {
      const double past = best_by_generation[best_by_generation.size() - 1 - window];
      if (std::isfinite(past) && past - result.best.fitness < ga.stagnation_eps) break;
    }
  }
  result.generations_run = static_cast<int>(result.history.size());
  return result;
}

enum class SweepAxis { Depth, EncoderSize, ReservoirSize };

inline std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Depth: return "depth";
    case SweepAxis::EncoderSize: return "encoder_size";
    case SweepAxis::ReservoirSize: return "reservoir_size";
  }
  return "unknown";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "depth") return SweepAxis::Depth;
  if (s == "encoder_size") return SweepAxis::EncoderSize;
  if (s == "reservoir_size") return SweepAxis::ReservoirSize;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

inline std::vector<Eigen::Index> sweep_grid(SweepAxis axis) {
  std::vector<Eigen::Index> grid;
  switch (axis) {
    case SweepAxis::Depth:
      for (Eigen::Index k = 2; k <= 8; ++k) grid.push_back(k);
      break;
    case SweepAxis::EncoderSize:
      for (Eigen::Index m = 10; m <= 300; m += 10) grid.push_back(m);
      break;
    case SweepAxis::ReservoirSize:
      for (Eigen::Index n = 100; n <= 1000; n += 100) grid.push_back(n);
      break;
  }
  return grid;
}

}  // namespace deepesn
