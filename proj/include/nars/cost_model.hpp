#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nars/search_space.hpp"

namespace nars {

/// Counting conventions:
///  - "FLOPs" are multiply-accumulates (one MAC = one FLOP).
///  - Same padding, output size ceil(input / stride).
///  - MBConv: 1x1 expansion (skipped when e == 1), k x k depthwise, optional
///    squeeze-excite, 1x1 projection. Expanded width is round(c_in * e).
///  - SE width is round(mid / 4) to the nearest multiple of 8 (min 8); its two
///    1x1 convs carry biases and the channel rescale costs one MAC per element.
///  - MBPool: 1x1 expansion, optional k x k depthwise, global pool, 1x1 to the
///    output width.
///  - Conv/depthwise/pointwise weights have no bias (folded into batch norm);
///    FC includes its bias. Batch norm, activations and pooling are free.
///  - Skip is free for equal widths, otherwise a 1x1 conv.
struct LayerCost {
  std::string label;
  int out_resolution = 0;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
};

struct CostReport {
  std::vector<LayerCost> per_layer;
  std::uint64_t total_flops = 0;
  std::uint64_t total_params = 0;
};

struct CostTotals {
  std::uint64_t flops = 0;
  std::uint64_t params = 0;

  bool operator==(const CostTotals &) const = default;
};

CostReport cost(const ArchConfig &arch);
/// Same totals as cost() without building the per-layer list.
CostTotals cost_totals(const ArchConfig &arch);

enum class Metric { Flops, Params };

std::string_view to_string(Metric metric);

struct Constraint {
  Metric metric = Metric::Flops;
  std::uint64_t bound = 0;
};

/// g_i(A) <= C_i for every entry; an empty set is always satisfied.
struct ConstraintSet {
  std::string name;
  std::vector<Constraint> items;
};

struct Violation {
  Metric metric = Metric::Flops;
  std::uint64_t value = 0;
  std::uint64_t bound = 0;
};

struct ConstraintCheck {
  bool satisfied = true;
  std::vector<Violation> violations;
};

ConstraintCheck check_constraints(const CostTotals &totals, const ConstraintSet &constraints);
ConstraintCheck check_constraints(const ArchConfig &arch, const ConstraintSet &constraints);
bool satisfies(const CostTotals &totals, const ConstraintSet &constraints);

std::string format_cost_table(const CostReport &report);
std::string format_cost_csv(const CostReport &report);

}  // namespace nars
