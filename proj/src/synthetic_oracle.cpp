#include "nars/synthetic_oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "nars/error.hpp"
#include "nars/rng.hpp"

namespace nars {
namespace {

double role_weight(ParamRole role) {
  switch (role) {
    case ParamRole::Resolution: return 1.5;
    case ParamRole::Channels: return 1.0;
    case ParamRole::Depth: return 1.0;
    case ParamRole::ExpansionFirst:
    case ParamRole::ExpansionRest: return 0.6;
    case ParamRole::Kernel: return 0.4;
    default: return 0.0;
  }
}

double param_factor(std::size_t index) {
  const double golden = 0.6180339887498949;
  const double frac = static_cast<double>(index) * golden - std::floor(static_cast<double>(index) * golden);
  return 0.75 + 0.5 * frac;
}

bool is_regularizer(ParamRole role) {
  return role == ParamRole::Dropout || role == ParamRole::StochasticDepth || role == ParamRole::Mixup ||
         role == ParamRole::WeightDecay;
}

// Per-parameter normalized value: min-max slot for grids, index / (n - 1)
// for one-hot groups.
std::vector<double> normalized_params(const SearchSpace &space, const EncodedVector &encoded,
                                      std::vector<std::size_t> &choice) {
  const auto &layout = space.layout();
  if (encoded.size() != layout.slots.size()) throw ShapeError("encoded vector does not match the space layout");
  std::vector<double> out(space.params().size(), 0.0);
  choice.assign(space.params().size(), 0);
  for (std::size_t s = 0; s < layout.slots.size(); ++s) {
    const auto &slot = layout.slots[s];
    if (!slot.one_hot) {
      out[slot.param] = encoded.values[s];
    } else if (encoded.values[s] == 1.0) {
      const std::size_t n = space.params()[slot.param].grid.size();
      choice[slot.param] = slot.choice;
      out[slot.param] = n > 1 ? static_cast<double>(slot.choice) / static_cast<double>(n - 1) : 0.0;
    }
  }
  return out;
}

}  // namespace

OracleTerms oracle_terms(const SearchSpace &space, const EncodedVector &encoded) {
  std::vector<std::size_t> choice;
  const auto x = normalized_params(space, encoded, choice);
  const auto &params = space.params();
  const auto &rec = space.def().recipe;

  OracleTerms t;
  t.optimizer = rec.optimizers.front();
  t.ema = rec.ema.front();
  double cap_sum = 0, cap_w = 0, reg_sum = 0;
  int reg_n = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto role = params[i].role;
    if (params[i].arch) {
      const double w = role_weight(role) * param_factor(i);
      cap_sum += w * x[i];
      cap_w += w;
    } else if (role == ParamRole::Lr) {
      t.lr = x[i];
    } else if (role == ParamRole::Optimizer) {
      t.optimizer = rec.optimizers[choice[i]];
    } else if (role == ParamRole::Ema) {
      t.ema = rec.ema[choice[i]];
    } else if (is_regularizer(role)) {
      reg_sum += x[i];
      ++reg_n;
    }
  }
  if (cap_w > 0) t.capacity = cap_sum / cap_w;
  if (reg_n > 0) t.regularization = reg_sum / reg_n;

  const auto logistic = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  t.arch_term = 0.28 * (logistic(8.0 * (t.capacity - 0.5)) - logistic(-4.0)) / (logistic(4.0) - logistic(-4.0));
  const double lr_star = t.optimizer == Optimizer::SGD ? 0.3 : 0.6;
  t.recipe_term = -0.4 * (t.lr - lr_star) * (t.lr - lr_star) + (t.optimizer == Optimizer::RMSProp ? 0.01 : 0.0) +
                  (t.ema ? 0.008 : 0.0);
  const double rho_star = 0.1 + 0.8 * t.capacity;
  t.interaction = -0.6 * (t.regularization - rho_star) * (t.regularization - rho_star);
  t.raw = 0.55 + t.arch_term + t.recipe_term + t.interaction;
  t.asymptote = 0.4 + 0.5 / (1.0 + std::exp(-6.0 * (t.raw - 0.65)));
  t.tau = 1.5 + 3.0 * (1.0 - t.lr);
  return t;
}

double oracle_asymptote(const SearchSpace &space, const Candidate &candidate) {
  return oracle_terms(space, space.encode(candidate)).asymptote;
}

double oracle_true_accuracy(const SearchSpace &space, const EncodedVector &encoded, int epochs) {
  const auto t = oracle_terms(space, encoded);
  return t.asymptote * (1.0 - std::exp(-static_cast<double>(epochs) / t.tau));
}

double oracle_true_accuracy(const SearchSpace &space, const Candidate &candidate, int epochs) {
  return oracle_true_accuracy(space, space.encode(candidate), epochs);
}

std::vector<double> oracle_curve(const SearchSpace &space, const EncodedVector &encoded, int epoch_budget,
                                 std::uint64_t seed) {
  const auto t = oracle_terms(space, encoded);
  std::uint64_t h = mix64(seed);
  for (double v : encoded.values) h = mix64(h ^ std::bit_cast<std::uint64_t>(v));
  std::vector<double> curve(static_cast<std::size_t>(std::max(epoch_budget, 0)));
  for (int e = 1; e <= epoch_budget; ++e) {
    const std::uint64_t r = mix64(h ^ static_cast<std::uint64_t>(e));
    const double u = static_cast<double>(r >> 11) * 0x1.0p-53;
    const double noise = (2.0 * u - 1.0) * kOracleNoise;
    const double acc = t.asymptote * (1.0 - std::exp(-static_cast<double>(e) / t.tau)) + noise;
    curve[static_cast<std::size_t>(e - 1)] = std::clamp(acc, 0.0, 1.0);
  }
  return curve;
}

EvalResult synthetic_oracle(const Candidate &candidate, const SearchSpace &space, int epoch_budget,
                            std::uint64_t seed, std::uint64_t request_id) {
  if (epoch_budget < 1) throw Error("epoch budget must be at least 1");
  EvalResult r;
  r.id = request_id;
  r.curve = oracle_curve(space, space.encode(candidate), epoch_budget, seed);
  return r;
}

Genotype OracleReferences::combine(const SearchSpace &space, const Genotype &arch, const Genotype &recipe) {
  Genotype out = recipe;
  for (std::size_t i = 0; i < space.arch_param_count(); ++i) out[i] = arch[i];
  return out;
}

OracleReferences oracle_references(const SearchSpace &space) {
  const auto &params = space.params();
  const auto &rec = space.def().recipe;
  auto arch_at = [&](double f) {
    Genotype g(params.size(), 0);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i].arch) continue;
      g[i] = static_cast<std::uint32_t>(std::lround(f * static_cast<double>(params[i].grid.size() - 1)));
    }
    return g;
  };
  auto recipe_with = [&](bool heavy) {
    Genotype g(params.size(), 0);
    Optimizer opt = rec.optimizers.front();
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].role == ParamRole::Optimizer) {
        for (std::size_t c = 0; c < rec.optimizers.size(); ++c) {
          if (rec.optimizers[c] == Optimizer::RMSProp) g[i] = static_cast<std::uint32_t>(c);
        }
        opt = rec.optimizers[g[i]];
      } else if (params[i].role == ParamRole::Ema) {
        for (std::size_t c = 0; c < rec.ema.size(); ++c) {
          if (rec.ema[c]) g[i] = static_cast<std::uint32_t>(c);
        }
      } else if (is_regularizer(params[i].role)) {
        g[i] = heavy ? static_cast<std::uint32_t>(params[i].grid.size() - 1) : 0;
      }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].role != ParamRole::Lr) continue;
      const double target = opt == Optimizer::SGD ? 0.3 : 0.6;
      const auto &grid = params[i].grid;
      const double value = grid.snap(grid.low() + target * (grid.high() - grid.low()));
      g[i] = static_cast<std::uint32_t>(*grid.index_of(value));
    }
    return g;
  };
  return {arch_at(0.25), arch_at(0.85), recipe_with(false), recipe_with(true)};
}

}  // namespace nars
