#include "nars/kernels.hpp"

#include "nars/error.hpp"

namespace nars {
namespace {

// Shape errors must surface before entering a parallel region.
void check_inputs(const PredictorNet &net, std::span<const EncodedVector> inputs) {
  for (const auto &v : inputs) {
    if (v.size() != net.input_dim()) throw ShapeError("encoded vector does not match the predictor input");
  }
}

void check_genes(const SearchSpace &space, std::span<const Genotype> genes) {
  for (const auto &g : genes) {
    if (g.size() != space.params().size()) throw ShapeError("genotype length does not match the space");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] >= space.params()[i].grid.size()) throw ValidationError(space.params()[i].name, "grid index out of range");
    }
  }
}

template <class Out, class In, class Fn>
std::vector<Out> parallel_map(std::span<const In> in, Fn &&fn) {
  std::vector<Out> out(in.size());
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(in[static_cast<std::size_t>(i)]);
  return out;
}

template <class Out, class In, class Fn>
std::vector<Out> serial_map(std::span<const In> in, Fn &&fn) {
  std::vector<Out> out;
  out.reserve(in.size());
  for (const auto &x : in) out.push_back(fn(x));
  return out;
}

}  // namespace

std::vector<double> score_batch(const PredictorNet &net, std::span<const EncodedVector> inputs) {
  check_inputs(net, inputs);
  return parallel_map<double>(inputs, [&](const EncodedVector &v) { return forward_accuracy(net, v.values); });
}

std::vector<double> score_batch_serial(const PredictorNet &net, std::span<const EncodedVector> inputs) {
  return serial_map<double>(inputs, [&](const EncodedVector &v) { return forward_accuracy(net, v.values); });
}

std::vector<CostTotals> cost_batch(std::span<const ArchConfig> archs) {
  return parallel_map<CostTotals>(archs, [](const ArchConfig &a) { return cost_totals(a); });
}

std::vector<CostTotals> cost_batch_serial(std::span<const ArchConfig> archs) {
  return serial_map<CostTotals>(archs, [](const ArchConfig &a) { return cost_totals(a); });
}

std::vector<EncodedVector> encode_batch(const SearchSpace &space, std::span<const Genotype> genes) {
  check_genes(space, genes);
  return parallel_map<EncodedVector>(genes, [&](const Genotype &g) { return space.encode(g); });
}

std::vector<EncodedVector> encode_batch_serial(const SearchSpace &space, std::span<const Genotype> genes) {
  return serial_map<EncodedVector>(genes, [&](const Genotype &g) { return space.encode(g); });
}

}  // namespace nars
