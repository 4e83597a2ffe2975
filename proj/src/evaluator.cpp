#include "nars/evaluator.hpp"

#include <omp.h>

#include "nars/synthetic_oracle.hpp"

namespace nars {

std::vector<EvalResult> SyntheticEvaluator::run(std::span<const EvalRequest> requests) {
  std::vector<EvalResult> out(requests.size());
  const int threads = parallelism_ > 0 ? parallelism_ : omp_get_max_threads();
  const auto n = static_cast<std::ptrdiff_t>(requests.size());
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto &req = requests[static_cast<std::size_t>(i)];
    auto &res = out[static_cast<std::size_t>(i)];
    try {
      res = synthetic_oracle(req.candidate, space_, req.epoch_budget, req.seed, req.id);
    } catch (const std::exception &e) {
      res.id = req.id;
      res.status = EvalStatus::Failed;
      res.reason = e.what();
    }
  }
  return out;
}

}  // namespace nars
