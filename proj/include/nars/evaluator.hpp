#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nars/search_space.hpp"

namespace nars {

struct EvalRequest {
  std::uint64_t id = 0;
  Candidate candidate;
  int epoch_budget = 1;
  std::uint64_t seed = 0;

  bool operator==(const EvalRequest &) const = default;
};

enum class EvalStatus { Ok, Failed };

struct EvalResult {
  std::uint64_t id = 0;
  std::vector<double> curve;  // top-1 accuracy per epoch
  EvalStatus status = EvalStatus::Ok;
  std::string reason;  // set when failed

  bool ok() const noexcept { return status == EvalStatus::Ok; }
  /// Last curve entry; 0 for an empty curve.
  double final_accuracy() const noexcept { return curve.empty() ? 0.0 : curve.back(); }

  bool operator==(const EvalResult &) const = default;
};

/// Evaluation backend. Results come back in request order whatever the
/// completion order was.
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  std::vector<EvalResult> evaluate(std::span<const EvalRequest> requests) {
    calls_ += requests.size();
    return run(requests);
  }

  /// Number of candidates submitted so far.
  std::uint64_t calls() const noexcept { return calls_.load(); }

 protected:
  virtual std::vector<EvalResult> run(std::span<const EvalRequest> requests) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
};

/// Evaluates every request with the synthetic oracle, in parallel.
class SyntheticEvaluator : public Evaluator {
 public:
  explicit SyntheticEvaluator(const SearchSpace &space, int parallelism = 0)
      : space_(space), parallelism_(parallelism) {}

 protected:
  std::vector<EvalResult> run(std::span<const EvalRequest> requests) override;

 private:
  const SearchSpace &space_;
  int parallelism_;
};

}  // namespace nars
