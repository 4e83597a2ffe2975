#include "cost_oracle.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "nars/cost_model.hpp"

using namespace nars;

namespace {

ArchConfig single(StageConfig st, int resolution, int in_ch) {
  ArchConfig a;
  a.resolution = resolution;
  a.input_channels = in_ch;
  a.stages.push_back(st);
  return a;
}

}  // namespace

TEST_CASE("unit cases") {
  StageConfig conv;
  conv.block = BlockKind::Conv;
  conv.kernel = 1;
  conv.channels = 1;
  const auto r = cost(single(conv, 1, 1));
  CHECK(r.total_flops == 1);
  CHECK(r.total_params == 1);

  StageConfig fc;
  fc.block = BlockKind::FC;
  fc.channels = 1000;
  CHECK(cost(single(fc, 1, 1984)).total_params == 1985000);
  CHECK(cost(single(fc, 1, 1984)).total_flops == 1984000);

  StageConfig stem;
  stem.block = BlockKind::Conv;
  stem.kernel = 3;
  stem.channels = 16;
  stem.stride = 2;
  const auto s = cost(single(stem, 224, 3));
  CHECK(s.total_flops == 112 * 112 * 16 * 27);
  CHECK(s.per_layer.at(0).out_resolution == 112);

  // Odd side with stride 2 rounds up.
  CHECK(cost(single(stem, 7, 3)).per_layer.at(0).out_resolution == 4);
}

TEST_CASE("matches the enumeration oracle") {
  for (const auto *space : {&testutil::joint(), &testutil::toy(), &testutil::baseline()}) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto arch = sample_uniform(*space, seed).arch;
      const auto want = oracle::count(arch);
      const auto got = cost(arch);
      CHECK(got.total_flops == want.flops);
      CHECK(got.total_params == want.params);
      CHECK(cost_totals(arch) == CostTotals{want.flops, want.params});
      std::uint64_t f = 0, p = 0;
      for (const auto &l : got.per_layer) {
        f += l.flops;
        p += l.params;
      }
      CHECK(f == got.total_flops);
      CHECK(p == got.total_params);
    }
  }
}

TEST_CASE("constraints") {
  const auto arch = sample_uniform(testutil::joint(), 4).arch;
  const auto t = cost_totals(arch);
  CHECK(check_constraints(t, {}).satisfied);
  CHECK(check_constraints(t, {"eq", {{Metric::Flops, t.flops}}}).satisfied);

  const auto tight = check_constraints(t, {"tight", {{Metric::Flops, t.flops - 1}, {Metric::Params, t.params}}});
  CHECK_FALSE(tight.satisfied);
  REQUIRE(tight.violations.size() == 1);
  CHECK(tight.violations[0].metric == Metric::Flops);
  CHECK(tight.violations[0].value == t.flops);
  CHECK(tight.violations[0].bound == t.flops - 1);

  CHECK(check_constraints(arch, {"p", {{Metric::Params, t.params - 1}}}).violations.at(0).metric == Metric::Params);
  CHECK(satisfies(t, {"both", {{Metric::Flops, t.flops}, {Metric::Params, t.params}}}));
}

TEST_CASE("report formats") {
  const auto r = cost(sample_uniform(testutil::toy(), 0).arch);
  const auto csv = format_cost_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.per_layer.size()) + 2);
  CHECK(format_cost_table(r).find(std::to_string(r.total_flops)) != std::string::npos);
}
