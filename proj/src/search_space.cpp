#include "nars/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "nars/error.hpp"
#include "nars/sobol.hpp"

namespace nars {

std::string_view to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::Conv: return "Conv";
    case BlockKind::MBConv: return "MBConv";
    case BlockKind::MBPool: return "MBPool";
    case BlockKind::FC: return "FC";
    case BlockKind::Skip: return "Skip";
  }
  return "?";
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::None: return "none";
    case Activation::ReLU: return "relu";
    case Activation::HSwish: return "hswish";
    case Activation::Swish: return "swish";
  }
  return "?";
}

std::string_view to_string(Optimizer opt) {
  return opt == Optimizer::RMSProp ? "RMSProp" : "SGD";
}

std::string_view to_string(ParamRole role) {
  switch (role) {
    case ParamRole::Resolution: return "resolution";
    case ParamRole::Kernel: return "kernel";
    case ParamRole::ExpansionFirst: return "expansion_first";
    case ParamRole::ExpansionRest: return "expansion_rest";
    case ParamRole::Channels: return "channels";
    case ParamRole::Depth: return "depth";
    case ParamRole::Lr: return "lr";
    case ParamRole::Optimizer: return "optimizer";
    case ParamRole::Ema: return "ema";
    case ParamRole::Dropout: return "dropout";
    case ParamRole::StochasticDepth: return "stochastic_depth";
    case ParamRole::Mixup: return "mixup";
    case ParamRole::WeightDecay: return "weight_decay";
  }
  return "?";
}

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool same_value(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b));
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool is_recipe_role(ParamRole role) { return role >= ParamRole::Lr; }

// Reads the value a target currently holds; optimizer and ema read back as
// their index in the space's choice list (-1 if absent).
double read_target(const SpaceDef &def, const Candidate &c, const ParamTarget &t) {
  if (t.stage >= 0) {
    const auto &st = c.arch.stages[static_cast<std::size_t>(t.stage)];
    switch (t.role) {
      case ParamRole::Kernel: return st.kernel;
      case ParamRole::ExpansionFirst: return st.expansion_first;
      case ParamRole::ExpansionRest: return st.expansion_rest;
      case ParamRole::Channels: return st.channels;
      case ParamRole::Depth: return st.depth;
      default: break;
    }
    throw Error("invalid stage parameter role");
  }
  const auto &r = c.recipe;
  switch (t.role) {
    case ParamRole::Resolution: return c.arch.resolution;
    case ParamRole::Lr: return r.lr;
    case ParamRole::Dropout: return r.dropout;
    case ParamRole::StochasticDepth: return r.stochastic_depth;
    case ParamRole::Mixup: return r.mixup;
    case ParamRole::WeightDecay: return r.weight_decay;
    case ParamRole::Optimizer: {
      auto it = std::find(def.recipe.optimizers.begin(), def.recipe.optimizers.end(), r.optimizer);
      return it == def.recipe.optimizers.end() ? -1.0
                                                : static_cast<double>(it - def.recipe.optimizers.begin());
    }
    case ParamRole::Ema: {
      auto it = std::find(def.recipe.ema.begin(), def.recipe.ema.end(), r.ema);
      return it == def.recipe.ema.end() ? -1.0 : static_cast<double>(it - def.recipe.ema.begin());
    }
    default: break;
  }
  throw Error("invalid global parameter role");
}

void write_target(const SpaceDef &def, Candidate &c, const ParamTarget &t, double value) {
  if (t.stage >= 0) {
    auto &st = c.arch.stages[static_cast<std::size_t>(t.stage)];
    switch (t.role) {
      case ParamRole::Kernel: st.kernel = static_cast<int>(std::lround(value)); return;
      case ParamRole::ExpansionFirst: st.expansion_first = value; return;
      case ParamRole::ExpansionRest: st.expansion_rest = value; return;
      case ParamRole::Channels: st.channels = static_cast<int>(std::lround(value)); return;
      case ParamRole::Depth: st.depth = static_cast<int>(std::lround(value)); return;
      default: break;
    }
    throw Error("invalid stage parameter role");
  }
  auto &r = c.recipe;
  switch (t.role) {
    case ParamRole::Resolution: c.arch.resolution = static_cast<int>(std::lround(value)); return;
    case ParamRole::Lr: r.lr = value; return;
    case ParamRole::Dropout: r.dropout = value; return;
    case ParamRole::StochasticDepth: r.stochastic_depth = value; return;
    case ParamRole::Mixup: r.mixup = value; return;
    case ParamRole::WeightDecay: r.weight_decay = value; return;
    case ParamRole::Optimizer:
      r.optimizer = def.recipe.optimizers[static_cast<std::size_t>(value)];
      return;
    case ParamRole::Ema: r.ema = def.recipe.ema[static_cast<std::size_t>(value)]; return;
    default: break;
  }
  throw Error("invalid global parameter role");
}

Grid index_grid(std::size_t n) {
  std::vector<double> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<double>(i);
  return Grid::choices(std::move(idx));
}

// Every (target, grid) pair of the space, free or fixed, in layout order.
struct Binding {
  std::string name;
  ParamTarget target;
  Grid grid;
  std::string group;
};

std::vector<Binding> bindings(const SpaceDef &def) {
  std::vector<Binding> out;
  out.push_back({"resolution", {-1, ParamRole::Resolution}, def.resolution, {}});
  for (std::size_t s = 0; s < def.stages.size(); ++s) {
    const auto &st = def.stages[s];
    const int si = static_cast<int>(s);
    const std::string prefix = st.label + ".";
    if (!st.kernel.empty()) out.push_back({prefix + "kernel", {si, ParamRole::Kernel}, st.kernel, {}});
    if (!st.expansion_first.empty()) {
      if (st.expansion_tied) {
        // One parameter for every block: bind both roles through a group.
        const std::string group = st.group_first.empty() ? "#tie:" + st.label : st.group_first;
        out.push_back({prefix + "expansion", {si, ParamRole::ExpansionFirst}, st.expansion_first, group});
        out.push_back({prefix + "expansion", {si, ParamRole::ExpansionRest}, st.expansion_first, group});
      } else {
        out.push_back({prefix + "expansion_first", {si, ParamRole::ExpansionFirst},
                       st.expansion_first, st.group_first});
        out.push_back({prefix + "expansion_rest", {si, ParamRole::ExpansionRest},
                       st.expansion_rest, st.group_rest});
      }
    }
    out.push_back({prefix + "channels", {si, ParamRole::Channels}, st.channels, {}});
    if (!st.depth.empty()) out.push_back({prefix + "depth", {si, ParamRole::Depth}, st.depth, {}});
  }
  const auto &r = def.recipe;
  out.push_back({"recipe.lr", {-1, ParamRole::Lr}, r.lr.grid, {}});
  out.push_back({"recipe.optimizer", {-1, ParamRole::Optimizer}, index_grid(r.optimizers.size()), {}});
  out.push_back({"recipe.ema", {-1, ParamRole::Ema}, index_grid(r.ema.size()), {}});
  out.push_back({"recipe.dropout", {-1, ParamRole::Dropout}, r.dropout.grid, {}});
  out.push_back({"recipe.stochastic_depth", {-1, ParamRole::StochasticDepth},
                 r.stochastic_depth.grid, {}});
  out.push_back({"recipe.mixup", {-1, ParamRole::Mixup}, r.mixup.grid, {}});
  out.push_back({"recipe.weight_decay", {-1, ParamRole::WeightDecay}, r.weight_decay.grid, {}});
  return out;
}

void check_grid(const Grid &g, const std::string &name, bool required) {
  if (g.empty()) {
    if (required) throw ValidationError(name, "required parameter is missing");
    return;
  }
  std::vector<double> sorted = g.values;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError(name, "duplicate values in choice list");
  }
}

}  // namespace

std::optional<BlockKind> parse_block_kind(std::string_view text) {
  const std::string t = lower(text);
  if (t == "conv") return BlockKind::Conv;
  if (t == "mbconv") return BlockKind::MBConv;
  if (t == "mbpool") return BlockKind::MBPool;
  if (t == "fc") return BlockKind::FC;
  if (t == "skip") return BlockKind::Skip;
  return std::nullopt;
}

std::optional<Activation> parse_activation(std::string_view text) {
  const std::string t = lower(text);
  if (t == "-" || t == "none") return Activation::None;
  if (t == "relu") return Activation::ReLU;
  if (t == "hswish") return Activation::HSwish;
  if (t == "swish") return Activation::Swish;
  return std::nullopt;
}

std::optional<Optimizer> parse_optimizer(std::string_view text) {
  const std::string t = lower(text);
  if (t == "rmsprop") return Optimizer::RMSProp;
  if (t == "sgd") return Optimizer::SGD;
  return std::nullopt;
}

Grid Grid::range(double low, double high, double step) {
  if (step <= 0) throw RangeError("range step must be positive");
  if (low > high) throw RangeError("range low bound exceeds high bound");
  Grid g;
  const auto count = static_cast<std::size_t>(std::floor((high - low) / step + 1e-9)) + 1;
  g.values.reserve(count);
  for (std::size_t i = 0; i < count; ++i) g.values.push_back(low + static_cast<double>(i) * step);
  return g;
}

Grid Grid::fixed(double value) { return Grid{{value}, false}; }

Grid Grid::choices(std::vector<double> values) { return Grid{std::move(values), true}; }

double Grid::low() const {
  if (values.empty()) throw Error("empty grid has no low bound");
  return *std::min_element(values.begin(), values.end());
}

double Grid::high() const {
  if (values.empty()) throw Error("empty grid has no high bound");
  return *std::max_element(values.begin(), values.end());
}

std::optional<std::size_t> Grid::index_of(double value) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (same_value(value, values[i])) return i;
  }
  return std::nullopt;
}

double Grid::snap(double value) const {
  if (values.empty()) throw Error("cannot snap onto an empty grid");
  double best = values.front();
  double best_dist = std::abs(value - best);
  for (double v : values) {
    const double dist = std::abs(value - v);
    if (dist < best_dist - 1e-12 || (std::abs(dist - best_dist) <= 1e-12 && v > best)) {
      best = v;
      best_dist = dist;
    }
  }
  return best;
}

bool encoded_less(const EncodedVector &a, const EncodedVector &b) {
  return std::lexicographical_compare(a.values.begin(), a.values.end(), b.values.begin(),
                                      b.values.end());
}

SearchSpace::SearchSpace(SpaceDef def) : def_(std::move(def)) {
  if (def_.stages.empty()) throw ValidationError("stages", "space has no stages");
  if (def_.input_channels < 1) throw ValidationError("input_channels", "must be positive");
  check_grid(def_.resolution, "resolution", true);
  for (const auto &st : def_.stages) {
    const std::string p = st.label + ".";
    const bool conv_like = st.block == BlockKind::Conv || st.block == BlockKind::MBConv;
    check_grid(st.kernel, p + "kernel", conv_like);
    check_grid(st.expansion_first, p + "expansion", st.block == BlockKind::MBConv ||
                                                      st.block == BlockKind::MBPool);
    if (!st.expansion_tied) check_grid(st.expansion_rest, p + "expansion_rest", true);
    check_grid(st.channels, p + "channels", true);
    check_grid(st.depth, p + "depth", false);
    if (st.stride != 1 && st.stride != 2) throw ValidationError(p + "stride", "must be 1 or 2");
    for (double k : st.kernel.values) {
      if (k < 1 || std::fmod(k, 2.0) != 1.0) throw ValidationError(p + "kernel", "kernel sizes must be odd");
    }
    for (double d : st.depth.values) {
      if (d < 1 || d != std::floor(d)) throw ValidationError(p + "depth", "depth must be an integer >= 1");
    }
    for (double c : st.channels.values) {
      if (c < 1 || c != std::floor(c)) throw ValidationError(p + "channels", "channels must be positive integers");
    }
    for (const Grid *e : {&st.expansion_first, &st.expansion_rest}) {
      for (double v : e->values) {
        if (v <= 0) throw ValidationError(p + "expansion", "expansion must be positive");
      }
    }
  }
  const auto &r = def_.recipe;
  if (r.optimizers.empty()) throw ValidationError("recipe.optimizer", "no optimizer choices");
  if (r.ema.empty()) throw ValidationError("recipe.ema", "no ema choices");
  for (const auto *g : {&r.lr, &r.dropout, &r.stochastic_depth, &r.mixup, &r.weight_decay}) {
    check_grid(g->grid, "recipe", true);
  }
  {
    auto opts = r.optimizers;
    std::sort(opts.begin(), opts.end());
    if (std::adjacent_find(opts.begin(), opts.end()) != opts.end()) {
      throw ValidationError("recipe.optimizer", "duplicate choices");
    }
    if (r.ema.size() > 2 || (r.ema.size() == 2 && r.ema[0] == r.ema[1])) {
      throw ValidationError("recipe.ema", "duplicate choices");
    }
  }

  // Base candidate: fixed structure plus the first value of every grid.
  base_.arch.input_channels = def_.input_channels;
  for (const auto &st : def_.stages) {
    StageConfig sc;
    sc.block = st.block;
    sc.stride = st.stride;
    sc.se = st.se;
    sc.act = st.act;
    sc.kernel = 0;
    sc.depth = 1;
    base_.arch.stages.push_back(sc);
  }

  std::map<std::string, std::size_t> group_param;
  const auto all = bindings(def_);
  for (const auto &b : all) {
    write_target(def_, base_, b.target, b.grid.values.front());
    if (b.grid.fixed()) continue;
    if (!b.group.empty()) {
      auto it = group_param.find(b.group);
      if (it != group_param.end()) {
        auto &param = params_[it->second];
        if (!(param.grid.values == b.grid.values)) {
          throw ValidationError(b.name, "shared group '" + b.group + "' members have different grids");
        }
        param.targets.push_back(b.target);
        continue;
      }
      group_param[b.group] = params_.size();
    }
    FreeParam param;
    param.name = b.name;
    param.role = b.target.role;
    param.arch = !is_recipe_role(b.target.role);
    param.grid = b.grid;
    param.targets.push_back(b.target);
    params_.push_back(std::move(param));
  }
  // Arch parameters come first in the binding order; keep that invariant.
  arch_params_ = static_cast<std::size_t>(
      std::count_if(params_.begin(), params_.end(), [](const FreeParam &p) { return p.arch; }));

  std::string description;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto &param = params_[i];
    const bool one_hot = param.grid.categorical;
    const std::size_t slots = one_hot ? param.grid.size() : 1;
    for (std::size_t c = 0; c < slots; ++c) {
      layout_.slots.push_back({i, one_hot, c});
      if (param.arch) {
        ++layout_.arch_dim;
      } else {
        ++layout_.recipe_dim;
      }
    }
    description += param.name + (one_hot ? ":onehot[" : ":minmax[");
    for (double v : param.grid.values) description += format_value(v) + ",";
    description += "];";
  }
  layout_.fingerprint = fnv1a(description);
}

Genotype SearchSpace::genotype(const Candidate &c) const {
  if (c.arch.stages.size() != def_.stages.size()) {
    throw ValidationError("stages", "expected " + std::to_string(def_.stages.size()) +
                                        " stages, got " + std::to_string(c.arch.stages.size()));
  }
  if (c.arch.input_channels != def_.input_channels) {
    throw ValidationError("input_channels", "does not match the space");
  }
  for (std::size_t s = 0; s < def_.stages.size(); ++s) {
    const auto &spec = def_.stages[s];
    const auto &st = c.arch.stages[s];
    if (st.block != spec.block || st.stride != spec.stride || st.se != spec.se || st.act != spec.act) {
      throw ValidationError(spec.label, "fixed block structure does not match the space");
    }
    if (spec.kernel.empty() && st.kernel != 0) throw ValidationError(spec.label + ".kernel", "block has no kernel");
    if (spec.depth.empty() && st.depth != 1) throw ValidationError(spec.label + ".depth", "block has no depth");
  }
  // Fixed bindings must hold their single value.
  for (const auto &b : bindings(def_)) {
    if (!b.grid.fixed()) continue;
    const double v = read_target(def_, c, b.target);
    if (!same_value(v, b.grid.values.front())) {
      throw ValidationError(b.name, "value " + format_value(v) + " differs from fixed value " +
                                        format_value(b.grid.values.front()));
    }
  }
  Genotype genes(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto &param = params_[i];
    const double v = read_target(def_, c, param.targets.front());
    const auto idx = param.grid.index_of(v);
    if (!idx) throw ValidationError(param.name, "value " + format_value(v) + " is not on the grid");
    for (std::size_t t = 1; t < param.targets.size(); ++t) {
      if (!same_value(read_target(def_, c, param.targets[t]), v)) {
        throw ValidationError(param.name, "shared-group members hold different values");
      }
    }
    genes[i] = static_cast<std::uint32_t>(*idx);
  }
  return genes;
}

bool SearchSpace::is_valid(const Candidate &candidate) const {
  try {
    validate(candidate);
    return true;
  } catch (const ValidationError &) {
    return false;
  }
}

Candidate SearchSpace::materialize(const Genotype &genes) const {
  if (genes.size() != params_.size()) throw ShapeError("genotype length does not match the space");
  Candidate c = base_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto &param = params_[i];
    if (genes[i] >= param.grid.size()) throw ValidationError(param.name, "grid index out of range");
    const double v = param.grid.values[genes[i]];
    for (const auto &t : param.targets) write_target(def_, c, t, v);
  }
  return c;
}

EncodedVector SearchSpace::encode(const Genotype &genes) const {
  if (genes.size() != params_.size()) throw ShapeError("genotype length does not match the space");
  EncodedVector out;
  out.arch_dim = layout_.arch_dim;
  out.values.resize(layout_.slots.size());
  for (std::size_t s = 0; s < layout_.slots.size(); ++s) {
    const auto &slot = layout_.slots[s];
    const auto &param = params_[slot.param];
    if (slot.one_hot) {
      out.values[s] = genes[slot.param] == slot.choice ? 1.0 : 0.0;
    } else {
      const double lo = param.grid.low();
      const double hi = param.grid.high();
      out.values[s] = (param.grid.values[genes[slot.param]] - lo) / (hi - lo);
    }
  }
  return out;
}

double SearchSpace::effective_lr(const RecipeConfig &recipe) const {
  const double lr = recipe.lr * def_.recipe.lr.scale;
  return recipe.optimizer == Optimizer::SGD ? lr * def_.recipe.sgd_lr_multiplier : lr;
}

SearchSpace load_space(std::string_view text) { return SearchSpace(parse_space_def(text)); }

SearchSpace load_space_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open space file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_space(buf.str());
}

Cardinality cardinality(const SearchSpace &space) {
  Cardinality out;
  for (const auto &param : space.params()) {
    const double l = std::log10(static_cast<double>(param.grid.size()));
    (param.arch ? out.arch_log10 : out.recipe_log10) += l;
  }
  return out;
}

Cardinality cardinality_per_block(const SearchSpace &space) {
  Cardinality out = cardinality(space);
  out.arch_log10 = 0;
  const auto &def = space.def();
  out.arch_log10 += std::log10(static_cast<double>(def.resolution.size()));
  for (const auto &st : def.stages) {
    const double k = st.kernel.empty() ? 1.0 : static_cast<double>(st.kernel.size());
    const double ef = st.expansion_first.empty() ? 1.0 : static_cast<double>(st.expansion_first.size());
    const double er = st.expansion_tied ? ef
                                        : (st.expansion_rest.empty() ? 1.0 : static_cast<double>(st.expansion_rest.size()));
    const std::vector<double> depths = st.depth.empty() ? std::vector<double>{1.0} : st.depth.values;
    double per_depth = 0;
    for (double n : depths) per_depth += std::pow(k, n) * ef * std::pow(er, n - 1);
    out.arch_log10 += std::log10(per_depth) + std::log10(static_cast<double>(st.channels.size()));
  }
  return out;
}

Genotype sample_uniform_genotype(const SearchSpace &space, Rng &rng) {
  Genotype genes(space.params().size());
  for (std::size_t i = 0; i < genes.size(); ++i) {
    genes[i] = static_cast<std::uint32_t>(uniform_index(rng, space.params()[i].grid.size()));
  }
  return genes;
}

Candidate sample_uniform(const SearchSpace &space, std::uint64_t seed) {
  Rng rng(seed);
  return space.materialize(sample_uniform_genotype(space, rng));
}

std::vector<Genotype> sample_qmc_genotypes(const SearchSpace &space, std::size_t n,
                                           std::uint64_t seed) {
  const std::size_t dims = space.params().size();
  std::vector<Genotype> out(n, Genotype(dims));
  if (dims == 0) return out;
  SobolSequence sobol(dims);
  Rng rng(seed);
  std::vector<std::uint32_t> shift(dims);
  for (auto &s : shift) s = static_cast<std::uint32_t>(rng() >> 32);
  std::vector<std::uint32_t> bits;
  for (std::size_t i = 0; i < n; ++i) {
    sobol.next_bits(bits);
    for (std::size_t d = 0; d < dims; ++d) {
      const std::uint64_t x = bits[d] ^ shift[d];
      const std::uint64_t size = space.params()[d].grid.size();
      out[i][d] = static_cast<std::uint32_t>((x * size) >> 32);
    }
  }
  return out;
}

std::vector<Candidate> sample_qmc_pool(const SearchSpace &space, std::size_t n, std::uint64_t seed) {
  std::vector<Candidate> out;
  out.reserve(n);
  for (const auto &g : sample_qmc_genotypes(space, n, seed)) out.push_back(space.materialize(g));
  return out;
}

ArchConfig compound_scale(const SearchSpace &space, const ArchConfig &arch, double depth_mult,
                          double width_mult, double res_mult) {
  if (!(depth_mult > 0 && width_mult > 0 && res_mult > 0)) {
    throw Error("compound scaling multipliers must be positive");
  }
  const auto &def = space.def();
  if (arch.stages.size() != def.stages.size()) throw ValidationError("stages", "stage count mismatch");
  ArchConfig out = arch;
  out.resolution = static_cast<int>(std::lround(def.resolution.snap(arch.resolution * res_mult)));
  for (std::size_t s = 0; s < def.stages.size(); ++s) {
    const auto &spec = def.stages[s];
    auto &st = out.stages[s];
    if (!spec.depth.empty()) {
      const long depth = std::lround(st.depth * depth_mult);
      if (depth < 1) throw ValidationError(spec.label + ".depth", "scaled depth falls below 1");
      st.depth = static_cast<int>(std::lround(spec.depth.snap(static_cast<double>(depth))));
    }
    st.channels = static_cast<int>(std::lround(spec.channels.snap(st.channels * width_mult)));
  }
  return out;
}

}  // namespace nars
