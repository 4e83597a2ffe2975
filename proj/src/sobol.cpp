#include "nars/sobol.hpp"

#include <bit>
#include <cstdint>

#include "nars/error.hpp"

namespace nars {
namespace {

#include "sobol_directions.inc"

constexpr int kBits = 32;

}  // namespace

std::size_t SobolSequence::max_dims() { return kSobolMaxDims; }

SobolSequence::SobolSequence(std::size_t dims)
    : dims_(dims), directions_(dims * kBits, 0), state_(dims, 0) {
  if (dims > static_cast<std::size_t>(kSobolMaxDims)) {
    throw Error("Sobol sequence supports at most " + std::to_string(kSobolMaxDims) +
                " dimensions, requested " + std::to_string(dims));
  }
  for (std::size_t d = 0; d < dims; ++d) {
    std::uint32_t *v = &directions_[d * kBits];
    if (d == 0) {
      for (int j = 0; j < kBits; ++j) v[j] = 1u << (kBits - 1 - j);
      continue;
    }
    const std::uint32_t poly = kSobolPoly[d];
    const int degree = std::bit_width(poly) - 1;
    const std::uint32_t inner = (poly >> 1) & ((1u << (degree - 1)) - 1);
    for (int j = 0; j < degree && j < kBits; ++j) {
      v[j] = kSobolInit[d][j] << (kBits - 1 - j);
    }
    for (int j = degree; j < kBits; ++j) {
      std::uint32_t value = v[j - degree] ^ (v[j - degree] >> degree);
      for (int k = 1; k < degree; ++k) {
        if ((inner >> (degree - 1 - k)) & 1u) value ^= v[j - k];
      }
      v[j] = value;
    }
  }
}

void SobolSequence::next_bits(std::vector<std::uint32_t> &out) {
  // Gray-code update: flip the direction of the lowest zero bit of the
  // previous index.
  const int c = std::countr_one(index_);
  if (c >= kBits) throw Error("Sobol sequence exhausted");
  ++index_;
  out.resize(dims_);
  for (std::size_t d = 0; d < dims_; ++d) {
    state_[d] ^= directions_[d * kBits + c];
    out[d] = state_[d];
  }
}

void SobolSequence::next(std::vector<double> &out) {
  std::vector<std::uint32_t> bits;
  next_bits(bits);
  out.resize(dims_);
  for (std::size_t d = 0; d < dims_; ++d) out[d] = static_cast<double>(bits[d]) * 0x1.0p-32;
}

}  // namespace nars
