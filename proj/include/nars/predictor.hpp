#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace nars {

inline constexpr std::size_t kEmbeddingWidth = 24;

/// Affine layer, weights row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  double &w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }

  bool operator==(const DenseLayer &) const = default;
};

/// Min-max constants mapping raw FLOP / parameter counts to [0, 1] over the
/// pretraining pool.
struct CostScale {
  double flops_min = 0;
  double flops_max = 1;
  double params_min = 0;
  double params_max = 1;

  double flops(double raw) const { return flops_max > flops_min ? (raw - flops_min) / (flops_max - flops_min) : 0.0; }
  double params(double raw) const {
    return params_max > params_min ? (raw - params_min) / (params_max - params_min) : 0.0;
  }

  bool operator==(const CostScale &) const = default;
};

/// Two-headed predictor:
///
///   arch  -> encoder (ReLU, width 24) -> proxy head      -> (flops, params)
///                 \-> concat(recipe) -> hidden (ReLU, 24) -> accuracy head
///
/// The encoder is pretrained through the proxy head on architecture
/// statistics, then reused by the accuracy head.
struct PredictorNet {
  std::size_t arch_dim = 0;
  std::size_t recipe_dim = 0;
  std::size_t width = kEmbeddingWidth;
  DenseLayer encoder;
  DenseLayer hidden;
  DenseLayer proxy_head;
  DenseLayer accuracy_head;
  CostScale cost_scale;
  std::uint64_t layout_fingerprint = 0;
  bool pretrained = false;

  /// He-uniform weights U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), zero biases.
  static PredictorNet init(std::size_t arch_dim, std::size_t recipe_dim, std::uint64_t seed,
                           std::size_t width = kEmbeddingWidth);
  /// All weights and biases zero.
  static PredictorNet zeros(std::size_t arch_dim, std::size_t recipe_dim,
                            std::size_t width = kEmbeddingWidth);

  std::size_t input_dim() const noexcept { return arch_dim + recipe_dim; }
  std::size_t parameter_count() const;

  bool operator==(const PredictorNet &) const = default;
};

/// Parameter addresses in a fixed order (encoder, hidden, proxy, accuracy;
/// weights before biases). Two nets of the same shape yield aligned lists.
std::vector<double *> parameter_pointers(PredictorNet &net);

std::array<double, 2> forward_proxy(const PredictorNet &net, std::span<const double> arch);
double forward_accuracy(const PredictorNet &net, std::span<const double> input);

struct HuberResult {
  double loss = 0;
  double grad = 0;  // d loss / d pred
};

/// 0.5 r^2 for |r| < 1, |r| - 0.5 otherwise, r = pred - target.
HuberResult huber(double pred, double target);

/// Accumulates d(huber(forward_accuracy(x), target))/d(theta) into `grad`
/// (same shape as `net`), scaled by `weight`. Returns the unscaled loss.
double accumulate_accuracy_gradient(const PredictorNet &net, std::span<const double> input,
                                    double target, double weight, PredictorNet &grad);

/// Same for the proxy head: huber(flops) + huber(params).
double accumulate_proxy_gradient(const PredictorNet &net, std::span<const double> arch,
                                 std::array<double, 2> target, double weight, PredictorNet &grad);

enum class UpdateRule { Momentum, Adam };

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  UpdateRule rule = UpdateRule::Adam;
  /// Early exit when validation MSE improves by less than this over
  /// `patience` epochs; 0 disables.
  double min_improvement = 1e-6;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
};

struct FitReport {
  double train_mse = 0;
  double val_mse = 0;
  double val_rank_correlation = 0;
  std::size_t epochs_run = 0;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

struct ProxySample {
  std::vector<double> arch;
  double flops = 0;   // normalized
  double params = 0;  // normalized
};

/// Trains encoder + proxy head on the first `1 - validation_fraction` of the
/// pool (after a seeded shuffle) and reports on the rest. Sets
/// net.pretrained. Throws Error on an empty pool.
FitReport pretrain_proxy(PredictorNet &net, std::span<const ProxySample> pool,
                         double validation_fraction, const TrainOptions &options);

struct AccuracySample {
  std::vector<double> input;
  double accuracy = 0;
};

struct FinetuneOptions {
  std::size_t frozen_epochs = 50;
  std::size_t full_epochs = 50;
  double learning_rate = 1e-3;
  double phase2_factor = 0.1;
  std::size_t batch_size = 64;
  double momentum = 0.9;
  UpdateRule rule = UpdateRule::Adam;
  /// Phase 1 keeps the encoder frozen; defaults to net.pretrained when unset.
  int freeze_encoder = -1;
  /// Start the accuracy head at the mean label: bias = mean, weights = 0.
  bool warm_start_bias = true;
  /// Fit standardized labels (z-scores over `train`), so the Huber kink sits
  /// at one label standard deviation; the head is rescaled afterwards and
  /// predictions stay in accuracy units. loss_trace is in z units.
  bool standardize_labels = false;
  std::uint64_t seed = 0;
};

/// Phase 1 trains hidden + accuracy head with the encoder frozen, phase 2
/// trains everything at learning_rate * phase2_factor. `validation` may be
/// empty. Throws Error on an empty dataset.
FitReport finetune_accuracy(PredictorNet &net, std::span<const AccuracySample> train,
                            std::span<const AccuracySample> validation, const FinetuneOptions &options);

struct GradientCheck {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;        // weights whose +-h step crosses a ReLU kink
  bool at_huber_kink = false;     // whole check skipped
  std::vector<double> analytic;   // per parameter, in parameter_pointers order
};

/// Central differences (step h) against the analytic gradient of
/// huber(forward_accuracy(x), target). Relative error is
/// |a - n| / max(|a|, |n|, 1e-6).
GradientCheck gradient_check(const PredictorNet &net, std::span<const double> input, double target,
                             double h = 1e-5);

nlohmann::json to_json(const PredictorNet &net);
/// Throws ParseError on malformed input.
PredictorNet predictor_from_json(const nlohmann::json &j);
void save_predictor(const PredictorNet &net, const std::string &path);
/// Throws Error when the stored layout fingerprint differs from `expected`.
PredictorNet load_predictor(const std::string &path, std::uint64_t expected_fingerprint);

}  // namespace nars
