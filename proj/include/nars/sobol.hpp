#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nars {

/// Gray-code Sobol generator with Joe-Kuo direction numbers, 32-bit
/// resolution. Point 0 is the origin; next() returns points 1, 2, ...
class SobolSequence {
 public:
  explicit SobolSequence(std::size_t dims);

  static std::size_t max_dims();

  std::size_t dims() const noexcept { return dims_; }
  /// Advances and writes the next point into `out` (size dims()).
  void next(std::vector<double> &out);
  /// Same as next() but returns the raw 32-bit integer coordinates.
  void next_bits(std::vector<std::uint32_t> &out);

 private:
  std::size_t dims_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> directions_;  // dims_ x 32
  std::vector<std::uint32_t> state_;
};

}  // namespace nars
