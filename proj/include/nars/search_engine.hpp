#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nars/cost_model.hpp"
#include "nars/evaluator.hpp"
#include "nars/predictor.hpp"
#include "nars/rng.hpp"
#include "nars/search_space.hpp"

namespace nars {

using Logger = std::function<void(std::string_view)>;

// ---------------------------------------------------------------------------
// Early stopping

struct EarlyStop {
  int epoch = 0;         // 1-based
  bool reached = false;  // false: threshold never met, epoch is the last one
  std::vector<int> skipped_epochs;  // constant accuracies, correlation undefined
};

/// Smallest epoch e whose accuracies rank the curves like their final
/// accuracies, spearman >= threshold. Throws ShapeError for fewer than two
/// curves or unequal lengths, UndefinedResultError when the final accuracies
/// are all equal.
EarlyStop determine_early_stop(std::span<const std::vector<double>> curves, double threshold);

// ---------------------------------------------------------------------------
// Candidate pool

struct PoolEntry {
  Genotype genes;
  Candidate candidate;
  EncodedVector encoded;
  CostTotals cost;
};

struct FlopWindow {
  std::uint64_t low = 0;
  std::uint64_t high = std::numeric_limits<std::uint64_t>::max();

  bool contains(std::uint64_t flops) const noexcept { return flops >= low && flops <= high; }
  bool operator==(const FlopWindow &) const = default;
};

/// Expands genotypes into candidates, encodings and costs.
std::vector<PoolEntry> make_entries(const SearchSpace &space, std::span<const Genotype> genes);

/// n QMC samples without duplicate genotypes, keeping those inside `window`
/// that satisfy `constraints`.
std::vector<PoolEntry> build_pool(const SearchSpace &space, std::size_t n, std::uint64_t seed,
                                  std::optional<FlopWindow> window = std::nullopt,
                                  const ConstraintSet &constraints = {});

/// FNV-1a over the genotypes; stable across runs and platforms.
std::uint64_t pool_hash(std::span<const PoolEntry> pool);
std::uint64_t genotype_hash(const Genotype &genes);

// ---------------------------------------------------------------------------
// Stage 1: pretraining on architecture statistics

struct PretrainConfig {
  bool enabled = true;
  double validation_fraction = 0.2;
  TrainOptions train;
};

/// Normalizes FLOPs / params over the pool, stores the constants in the net
/// and pretrains encoder + proxy head.
FitReport stage1_pretrain(PredictorNet &net, std::span<const PoolEntry> pool, const PretrainConfig &config);

// ---------------------------------------------------------------------------
// Stage 2: constrained iterative optimization

/// Refits in stage 2 see at most a few hundred samples; smaller batches at a
/// higher rate keep the 50 + 50 epoch schedule from underfitting.
inline FinetuneOptions stage2_finetune_defaults() {
  FinetuneOptions f;
  f.learning_rate = 1e-2;
  f.batch_size = 16;
  return f;
}

struct Stage2Config {
  std::size_t pool_size = 20000;
  std::size_t batch = 48;
  int iterations = 5;
  double early_stop_threshold = 0.92;
  int full_budget = 40;  // epochs for the first iteration
  std::optional<FlopWindow> flop_window;
  ConstraintSet constraints;  // applied to the pool besides the window
  FinetuneOptions finetune = stage2_finetune_defaults();
};

struct LabeledSample {
  std::size_t pool_index = 0;
  Genotype genes;
  EncodedVector encoded;
  CostTotals cost;
  /// Training label: accuracy at the early-stop budget (the full budget for
  /// runs that never shorten it).
  double accuracy = 0;
  int budget = 0;
  /// Accuracy after the full budget, when the sample was trained that long.
  std::optional<double> full_accuracy;
  std::vector<double> curve;
  int iteration = 0;  // 1-based
};

struct FailedEvaluation {
  std::size_t pool_index = 0;
  int iteration = 0;
  std::string reason;
};

struct SearchState {
  int iteration = 0;  // completed iterations
  std::vector<PoolEntry> pool;
  std::vector<char> evaluated;  // per pool entry, failures included
  std::vector<LabeledSample> dataset;
  std::vector<FailedEvaluation> failures;
  std::optional<EarlyStop> early_stop;
  PredictorNet base;       // the (pre)trained starting point of every refit
  PredictorNet predictor;  // refit on the current dataset
  FitReport pretrain_report;
  FitReport last_fit;
  std::uint64_t seed = 0;
};

struct Selection {
  std::vector<std::size_t> indices;  // pool indices
  bool exhausted = false;            // fewer than m unevaluated candidates left
};

/// m distinct unevaluated pool members, uniformly at random.
Selection select_random(std::span<const char> evaluated, std::size_t m, Rng &rng);

/// FLOP range [low, high] split into m equal bins; per bin the unevaluated
/// candidate with the highest score, then global next-best to fill up to m.
/// Ties go to the lexicographically smallest encoded vector.
Selection select_by_bins(std::span<const PoolEntry> pool, std::span<const double> scores,
                         std::span<const char> evaluated, std::size_t m, double low, double high);

/// Iteration 1 (t = 0) random, later iterations by predicted score.
Selection select_batch(const SearchState &state, const Stage2Config &config);

SearchState stage2_init(std::vector<PoolEntry> pool, PredictorNet base, std::uint64_t seed);

struct Stage2Options {
  /// Written atomically after every iteration when non-empty.
  std::string checkpoint_path;
  /// Stop after this many completed iterations (< 0: run to the end).
  int stop_after = -1;
  int parallelism = 0;
  Logger log;
};

/// Runs iterations state.iteration + 1 .. config.iterations.
void stage2_run(const SearchSpace &space, Evaluator &evaluator, SearchState &state, const Stage2Config &config,
                const Stage2Options &options = {});

nlohmann::json to_json(const SearchState &state, const SearchSpace &space);
SearchState search_state_from_json(const nlohmann::json &j, const SearchSpace &space);
void save_search_state(const SearchState &state, const SearchSpace &space, const std::string &path);
SearchState load_search_state(const std::string &path, const SearchSpace &space);

// ---------------------------------------------------------------------------
// Stage 3: predictor-based evolutionary search

/// Each gene mutates with probability `rate`: grid genes step +-1 (a step off
/// either end reflects), categorical genes move to a different choice.
template <class Gen>
Genotype mutate(const SearchSpace &space, const Genotype &genes, double rate, Gen &gen) {
  Genotype out = genes;
  const auto &params = space.params();
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (!(uniform01(gen) < rate)) continue;
    const auto n = static_cast<std::uint32_t>(params[i].grid.size());
    if (n < 2) continue;
    if (params[i].grid.categorical) {
      const auto r = static_cast<std::uint32_t>(uniform_index(gen, n - 1));
      out[i] = r >= genes[i] ? r + 1 : r;
    } else {
      const bool up = uniform01(gen) < 0.5;
      if (up) {
        out[i] = genes[i] + 1 < n ? genes[i] + 1 : genes[i] - 1;
      } else {
        out[i] = genes[i] > 0 ? genes[i] - 1 : genes[i] + 1;
      }
    }
  }
  return out;
}

template <class Gen>
Candidate mutate(const SearchSpace &space, const Candidate &candidate, double rate, Gen &gen) {
  return space.materialize(mutate(space, space.genotype(candidate), rate, gen));
}

struct Stage3Config {
  std::size_t p_best = 50;
  std::size_t q_random = 50;
  std::size_t children = 24;
  std::size_t top_k = 40;
  double epsilon = 1e-6;
  double initial_rate = 0.1;
  double min_rate = 0.01;
  double max_rate = 0.5;
  int max_generations = 100;
  int max_retries = 100;  // per child
  ConstraintSet constraints;
};

struct ScoredCandidate {
  Genotype genes;
  Candidate candidate;
  EncodedVector encoded;
  CostTotals cost;
  double score = 0;
};

struct Stage3Result {
  std::vector<ScoredCandidate> top;  // best first
  int generations = 0;
  std::vector<double> best_trace;  // best score after initialization and each generation
  std::vector<double> rate_trace;  // mutation rate used in each generation
  bool converged = false;          // stopped by the epsilon rule
  std::vector<std::string> diagnostics;
};

Stage3Result stage3_evolve(const SearchSpace &space, const PredictorNet &predictor,
                           std::span<const LabeledSample> dataset, const Stage3Config &config,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Full pipeline

struct PipelineConfig {
  PretrainConfig pretrain;
  Stage2Config stage2;
  Stage3Config stage3;  // constraints replaced per constraint set
  std::vector<ConstraintSet> constraint_sets;
  std::uint64_t seed = 0;
};

struct ConstraintResult {
  ConstraintSet constraints;
  Stage3Result result;
};

struct ResultBundle {
  FitReport pretrain;
  std::vector<LabeledSample> dataset;
  std::vector<ConstraintResult> results;
};

struct PipelineOptions {
  std::string checkpoint_path;  // stage-2 state
  int parallelism = 0;
  Logger log;
};

/// Stage 1, stage 2, then one stage 3 per constraint set with the same
/// predictor. Resumes stage 2 from options.checkpoint_path when it exists.
ResultBundle run_nars(const SearchSpace &space, Evaluator &evaluator, const PipelineConfig &config,
                      const PipelineOptions &options = {});

/// One stage 3 per constraint set on a finished stage-2 state.
std::vector<ConstraintResult> evolve_all(const SearchSpace &space, const SearchState &state,
                                         const Stage3Config &stage3, std::span<const ConstraintSet> sets,
                                         std::uint64_t seed);

/// constraint,rank,candidate_id,predicted_score,measured_accuracy,flops,params
std::string results_csv(std::span<const ConstraintResult> results, std::span<const LabeledSample> dataset);
/// candidate_id,iteration,budget,accuracy,full_accuracy,flops,params
std::string dataset_csv(std::span<const LabeledSample> dataset);

nlohmann::json to_json(const ResultBundle &bundle, const SearchSpace &space);

}  // namespace nars
