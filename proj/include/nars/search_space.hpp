#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nars/rng.hpp"

namespace nars {

enum class BlockKind { Conv, MBConv, MBPool, FC, Skip };
enum class Activation { None, ReLU, HSwish, Swish };
enum class Optimizer { RMSProp, SGD };

std::string_view to_string(BlockKind kind);
std::string_view to_string(Activation act);
std::string_view to_string(Optimizer opt);
std::optional<BlockKind> parse_block_kind(std::string_view text);
std::optional<Activation> parse_activation(std::string_view text);
std::optional<Optimizer> parse_optimizer(std::string_view text);

/// Discrete set of admissible values for one parameter. Range grids are
/// ascending; choice grids keep the listed order (which is also the one-hot
/// order). An empty grid marks a parameter that does not apply ("-").
struct Grid {
  std::vector<double> values;
  bool categorical = false;

  static Grid range(double low, double high, double step);
  static Grid fixed(double value);
  static Grid choices(std::vector<double> values);

  bool empty() const noexcept { return values.empty(); }
  bool fixed() const noexcept { return values.size() == 1; }
  std::size_t size() const noexcept { return values.size(); }
  double low() const;
  double high() const;
  std::optional<std::size_t> index_of(double value) const;
  /// Nearest grid value; ties go to the larger value.
  double snap(double value) const;

  bool operator==(const Grid &) const = default;
};

/// Numeric recipe grid expressed in table units; `scale` converts to SI
/// (e.g. lr grid (20, 30) with scale 1e-3).
struct ScaledGrid {
  Grid grid;
  double scale = 1.0;

  bool operator==(const ScaledGrid &) const = default;
};

struct StageSpec {
  std::string label;
  BlockKind block = BlockKind::MBConv;
  Grid kernel;
  Grid expansion_first;
  Grid expansion_rest;
  // No slash in the source: one expansion parameter drives every block.
  bool expansion_tied = true;
  Grid channels;
  Grid depth;
  int stride = 1;
  bool se = false;
  Activation act = Activation::HSwish;
  // Shared-parameter identifiers (superscripts); empty when unshared.
  std::string group_first;
  std::string group_rest;
  int line = 0;
};

struct RecipeRanges {
  ScaledGrid lr;
  std::vector<Optimizer> optimizers;
  std::vector<bool> ema;
  ScaledGrid dropout;
  ScaledGrid stochastic_depth;
  ScaledGrid mixup;
  ScaledGrid weight_decay;
  /// Applied to the learning rate when SGD is chosen; never baked into the
  /// stored lr value.
  double sgd_lr_multiplier = 4.0;
};

/// Parsed space-definition file.
struct SpaceDef {
  std::string name;
  int input_channels = 3;
  Grid resolution;
  std::vector<StageSpec> stages;
  RecipeRanges recipe;
};

struct StageConfig {
  BlockKind block = BlockKind::MBConv;
  int kernel = 0;  // 0 when the block has no kernel
  double expansion_first = 1.0;
  double expansion_rest = 1.0;
  int channels = 0;
  int depth = 1;
  int stride = 1;
  bool se = false;
  Activation act = Activation::HSwish;

  bool operator==(const StageConfig &) const = default;
};

struct ArchConfig {
  int resolution = 0;
  int input_channels = 3;
  std::vector<StageConfig> stages;

  bool operator==(const ArchConfig &) const = default;
};

/// Recipe values in table units (see RecipeRanges scales).
struct RecipeConfig {
  double lr = 0;
  Optimizer optimizer = Optimizer::RMSProp;
  bool ema = false;
  double dropout = 0;
  double stochastic_depth = 0;
  double mixup = 0;
  double weight_decay = 0;

  bool operator==(const RecipeConfig &) const = default;
};

struct Candidate {
  ArchConfig arch;
  RecipeConfig recipe;

  bool operator==(const Candidate &) const = default;
};

enum class ParamRole {
  Resolution,
  Kernel,
  ExpansionFirst,
  ExpansionRest,
  Channels,
  Depth,
  Lr,
  Optimizer,
  Ema,
  Dropout,
  StochasticDepth,
  Mixup,
  WeightDecay,
};

std::string_view to_string(ParamRole role);

struct ParamTarget {
  int stage = -1;  // -1 for resolution and recipe fields
  ParamRole role = ParamRole::Resolution;

  bool operator==(const ParamTarget &) const = default;
};

/// One searchable dimension. Shared groups and tied expansions bind several
/// targets to a single parameter.
struct FreeParam {
  std::string name;
  ParamRole role = ParamRole::Resolution;
  bool arch = true;
  Grid grid;
  std::vector<ParamTarget> targets;
};

/// Grid indices, one per FreeParam.
using Genotype = std::vector<std::uint32_t>;

struct LayoutSlot {
  std::size_t param = 0;
  bool one_hot = false;
  std::size_t choice = 0;  // one-hot position, unused for continuous slots
};

struct EncodingLayout {
  std::vector<LayoutSlot> slots;
  std::size_t arch_dim = 0;
  std::size_t recipe_dim = 0;
  std::uint64_t fingerprint = 0;
};

/// Flat predictor input: arch slots first, then recipe slots, all in [0, 1].
struct EncodedVector {
  std::vector<double> values;
  std::size_t arch_dim = 0;

  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> arch() const { return {values.data(), arch_dim}; }
  std::span<const double> recipe() const {
    return {values.data() + arch_dim, values.size() - arch_dim};
  }

  bool operator==(const EncodedVector &) const = default;
};

/// Lexicographic order on encoded values; the library-wide tie-breaker.
bool encoded_less(const EncodedVector &a, const EncodedVector &b);

/// A validated search space with its derived parameter list and encoding
/// layout.
class SearchSpace {
 public:
  explicit SearchSpace(SpaceDef def);

  const SpaceDef &def() const noexcept { return def_; }
  const std::string &name() const noexcept { return def_.name; }
  const std::vector<FreeParam> &params() const noexcept { return params_; }
  std::size_t arch_param_count() const noexcept { return arch_params_; }
  const EncodingLayout &layout() const noexcept { return layout_; }

  /// Grid indices for a candidate; throws ValidationError naming the first
  /// off-grid parameter or broken shared-group tie.
  Genotype genotype(const Candidate &candidate) const;
  Candidate materialize(const Genotype &genes) const;
  void validate(const Candidate &candidate) const { (void)genotype(candidate); }
  bool is_valid(const Candidate &candidate) const;

  EncodedVector encode(const Genotype &genes) const;
  EncodedVector encode(const Candidate &candidate) const { return encode(genotype(candidate)); }

  /// SI learning rate including the SGD multiplier rule.
  double effective_lr(const RecipeConfig &recipe) const;

 private:
  SpaceDef def_;
  std::vector<FreeParam> params_;
  std::size_t arch_params_ = 0;
  EncodingLayout layout_;
  Candidate base_;  // every fixed field filled in
};

/// Parses space-definition text. Throws ParseError (with line and field) or
/// RangeError.
SearchSpace load_space(std::string_view text);
SearchSpace load_space_file(const std::string &path);
SpaceDef parse_space_def(std::string_view text);

struct Cardinality {
  double arch_log10 = 0;
  double recipe_log10 = 0;
};

/// Per-stage convention: one kernel / expansion pair per stage, shared groups
/// counted once.
Cardinality cardinality(const SearchSpace &space);

/// Alternative convention where kernel and expansion vary per block. Shared
/// ties are applied at stage level only, so this is an upper estimate.
Cardinality cardinality_per_block(const SearchSpace &space);

Genotype sample_uniform_genotype(const SearchSpace &space, Rng &rng);
Candidate sample_uniform(const SearchSpace &space, std::uint64_t seed);

/// n genotypes from a digitally shifted Sobol sequence (origin skipped), one
/// dimension per free parameter, index = floor(u * |grid|).
std::vector<Genotype> sample_qmc_genotypes(const SearchSpace &space, std::size_t n,
                                           std::uint64_t seed);
std::vector<Candidate> sample_qmc_pool(const SearchSpace &space, std::size_t n,
                                       std::uint64_t seed);

/// EfficientNet-style scaling snapped back onto the space grids.
ArchConfig compound_scale(const SearchSpace &space, const ArchConfig &arch,
                          double depth_mult, double width_mult, double res_mult);

}  // namespace nars
