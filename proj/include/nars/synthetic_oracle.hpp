#pragma once

// Deterministic stand-in for real training. Everything is computed from the
// encoded vector, so any space file works.
//
//   s      capacity: weighted mean of the continuous architecture slots and
//          the normalized index of categorical architecture choices
//          (0.5 when the space has no free architecture parameter). Role
//          weights: resolution 1.5, channels 1, depth 1, expansion 0.6,
//          kernel 0.4, each scaled by a fixed per-parameter factor in
//          [0.75, 1.25]
//   rho    regularization strength: mean of the normalized dropout,
//          stochastic depth, mixup and weight decay slots (0.5 when fixed)
//   raw    0.55 + 0.28 (sig(8 (s - 0.5)) - sig(-4)) / (sig(4) - sig(-4))
//               - 0.4 (lr_n - lr*)^2 + 0.01 [RMSProp] + 0.008 [ema]
//               - 0.6 (rho - (0.1 + 0.8 s))^2
//          where sig(x) = 1 / (1 + e^{-x})
//   A_inf  0.4 + 0.5 / (1 + e^{-6 (raw - 0.65)})          always in (0.4, 0.9)
//          with lr* = 0.6 for RMSProp and 0.3 for SGD (normalized lr)
//   tau    1.5 + 3 (1 - lr_n)
//   acc(e) A_inf (1 - e^{-e / tau}) + noise(candidate, e, seed), |noise| <= 0.002
//
// The last raw term couples architecture and recipe: larger networks want
// more regularization, which is what makes two recipes rank two
// architectures in opposite order.

#include <cstdint>
#include <span>
#include <vector>

#include "nars/evaluator.hpp"
#include "nars/search_space.hpp"

namespace nars {

inline constexpr double kOracleNoise = 0.002;

struct OracleTerms {
  double capacity = 0.5;
  double regularization = 0.5;
  double lr = 0.5;  // normalized
  Optimizer optimizer = Optimizer::RMSProp;
  bool ema = false;
  double arch_term = 0;
  double recipe_term = 0;
  double interaction = 0;
  double raw = 0;
  double asymptote = 0;
  double tau = 0;
};

OracleTerms oracle_terms(const SearchSpace &space, const EncodedVector &encoded);

double oracle_asymptote(const SearchSpace &space, const Candidate &candidate);

/// Noise-free accuracy after `epochs` epochs; the "true" accuracy used when
/// auditing search results.
double oracle_true_accuracy(const SearchSpace &space, const EncodedVector &encoded, int epochs);
double oracle_true_accuracy(const SearchSpace &space, const Candidate &candidate, int epochs);

std::vector<double> oracle_curve(const SearchSpace &space, const EncodedVector &encoded, int epoch_budget,
                                 std::uint64_t seed);

/// Throws ValidationError for off-grid candidates.
EvalResult synthetic_oracle(const Candidate &candidate, const SearchSpace &space, int epoch_budget,
                            std::uint64_t seed, std::uint64_t request_id = 0);

/// Two reference architectures (small / large capacity) and two reference
/// recipes (light / heavy regularization). Under the light recipe the small
/// network wins, under the heavy one the large network wins.
struct OracleReferences {
  Genotype small_arch;
  Genotype large_arch;
  Genotype light_recipe;
  Genotype heavy_recipe;

  /// Arch genes from `arch`, recipe genes from `recipe`.
  static Genotype combine(const SearchSpace &space, const Genotype &arch, const Genotype &recipe);
};

OracleReferences oracle_references(const SearchSpace &space);

}  // namespace nars
