#include <benchmark/benchmark.h>

#include "nars/kernels.hpp"
#include "nars/search_space.hpp"

#ifndef NARS_SPACES_DIR
#define NARS_SPACES_DIR "spaces"
#endif

namespace {

using namespace nars;

const SearchSpace &space() {
  static const SearchSpace s = load_space_file(std::string(NARS_SPACES_DIR) + "/joint.space");
  return s;
}

const std::vector<Genotype> &genes(std::size_t n) {
  static std::vector<Genotype> g;
  if (g.size() < n) g = sample_qmc_genotypes(space(), n, 1);
  return g;
}

template <bool Parallel>
void BM_Encode(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::span<const Genotype> g(genes(n).data(), n);
  for (auto _ : state) {
    auto out = Parallel ? encode_batch(space(), g) : encode_batch_serial(space(), g);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Cost(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<ArchConfig> archs;
  for (std::size_t i = 0; i < n; ++i) archs.push_back(space().materialize(genes(n)[i]).arch);
  for (auto _ : state) {
    auto out = Parallel ? cost_batch(archs) : cost_batch_serial(archs);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Score(benchmark::State &state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto enc = encode_batch(space(), std::span<const Genotype>(genes(n).data(), n));
  const auto net = PredictorNet::init(space().layout().arch_dim, space().layout().recipe_dim, 1);
  for (auto _ : state) {
    auto out = Parallel ? score_batch(net, enc) : score_batch_serial(net, enc);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_Encode<false>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Encode<true>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Cost<false>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Cost<true>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Score<false>)->Arg(1000)->Arg(20000);
BENCHMARK(BM_Score<true>)->Arg(1000)->Arg(20000);

BENCHMARK_MAIN();
