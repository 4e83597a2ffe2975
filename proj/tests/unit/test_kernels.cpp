#include "doctest.h"
#include "helpers.hpp"
#include "nars/kernels.hpp"

using namespace nars;

TEST_CASE("parallel kernels match their serial references") {
  const auto &s = testutil::joint();
  const auto genes = sample_qmc_genotypes(s, 3000, 6);
  const auto enc = encode_batch(s, genes);
  CHECK(enc == encode_batch_serial(s, genes));
  for (std::size_t i = 0; i < genes.size(); i += 97) CHECK(enc[i] == s.encode(genes[i]));

  std::vector<ArchConfig> archs;
  for (const auto &g : genes) archs.push_back(s.materialize(g).arch);
  const auto costs = cost_batch(archs);
  CHECK(costs == cost_batch_serial(archs));
  CHECK(costs[17] == cost_totals(archs[17]));

  const auto net = PredictorNet::init(s.layout().arch_dim, s.layout().recipe_dim, 3);
  const auto scores = score_batch(net, enc);
  CHECK(scores == score_batch_serial(net, enc));
  CHECK(scores[5] == forward_accuracy(net, enc[5].values));

  CHECK(score_batch(net, {}).empty());
}
