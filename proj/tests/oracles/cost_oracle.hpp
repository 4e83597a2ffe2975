#pragma once

// Brute-force cost counter used as a test oracle. It lowers an architecture
// into a flat list of primitive layers (grouped conv, dense, channel scale)
// and counts each primitive on its own; it shares no code with the library
// cost model.
//
// Conventions: one MAC counts as one FLOP, same padding, output side is
// ceil(in / stride), no bias on convolutions, dense layers carry a bias, SE
// width is round(mid / 4 / 8) * 8 with a floor of 8, SE scale costs one
// multiply per element.

#include <cmath>
#include <cstdint>
#include <vector>

#include "nars/search_space.hpp"

namespace oracle {

struct Primitive {
  enum Kind { Conv, Dense, Scale } kind = Conv;
  std::int64_t in_ch = 0, out_ch = 0, kernel = 1, groups = 1;
  std::int64_t in_side = 1, stride = 1;
  bool bias = false;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline std::vector<Primitive> lower(const nars::ArchConfig &arch) {
  using nars::BlockKind;
  std::vector<Primitive> out;
  std::int64_t side = arch.resolution;
  std::int64_t ch = arch.input_channels;
  auto conv = [&](std::int64_t cin, std::int64_t cout, std::int64_t k, std::int64_t g, std::int64_t stride) {
    out.push_back({Primitive::Conv, cin, cout, k, g, side, stride, false});
    side = ceil_div(side, stride);
  };
  for (const auto &st : arch.stages) {
    switch (st.block) {
      case BlockKind::Conv:
        for (int b = 0; b < st.depth; ++b) {
          conv(ch, st.channels, st.kernel, 1, b == 0 ? st.stride : 1);
          ch = st.channels;
        }
        break;
      case BlockKind::MBConv:
        for (int b = 0; b < st.depth; ++b) {
          const double e = b == 0 ? st.expansion_first : st.expansion_rest;
          std::int64_t mid = ch;
          if (e != 1.0) {
            mid = std::max<std::int64_t>(1, std::llround(static_cast<double>(ch) * e));
            conv(ch, mid, 1, 1, 1);
          }
          conv(mid, mid, st.kernel, mid, b == 0 ? st.stride : 1);
          if (st.se) {
            std::int64_t se = std::llround(static_cast<double>(mid) / 32.0) * 8;
            if (se < 8) se = 8;
            out.push_back({Primitive::Dense, mid, se, 1, 1, 1, 1, true});
            out.push_back({Primitive::Dense, se, mid, 1, 1, 1, 1, true});
            out.push_back({Primitive::Scale, mid, mid, 1, mid, side, 1, false});
          }
          conv(mid, st.channels, 1, 1, 1);
          ch = st.channels;
        }
        break;
      case BlockKind::MBPool: {
        const std::int64_t mid = std::max<std::int64_t>(1, std::llround(static_cast<double>(ch) * st.expansion_first));
        conv(ch, mid, 1, 1, 1);
        if (st.kernel > 0) conv(mid, mid, st.kernel, mid, 1);
        side = 1;
        out.push_back({Primitive::Dense, mid, st.channels, 1, 1, 1, 1, false});
        ch = st.channels;
        break;
      }
      case BlockKind::FC:
        side = 1;
        out.push_back({Primitive::Dense, ch, st.channels, 1, 1, 1, 1, true});
        ch = st.channels;
        break;
      case BlockKind::Skip:
        if (ch != st.channels) conv(ch, st.channels, 1, 1, 1);
        ch = st.channels;
        break;
    }
  }
  return out;
}

struct Totals {
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
};

// Counts every output element and every tap of every layer.
inline Totals count(const nars::ArchConfig &arch) {
  Totals t;
  for (const auto &p : lower(arch)) {
    switch (p.kind) {
      case Primitive::Conv: {
        const std::int64_t out_side = ceil_div(p.in_side, p.stride);
        const std::int64_t per_group_in = p.in_ch / p.groups;
        std::uint64_t taps_per_output = 0;
        for (std::int64_t ky = 0; ky < p.kernel; ++ky)
          for (std::int64_t kx = 0; kx < p.kernel; ++kx) taps_per_output += static_cast<std::uint64_t>(per_group_in);
        std::uint64_t outputs = 0;
        for (std::int64_t y = 0; y < out_side; ++y) outputs += static_cast<std::uint64_t>(out_side * p.out_ch);
        t.flops += outputs * taps_per_output;
        t.params += static_cast<std::uint64_t>(p.out_ch) * taps_per_output;
        break;
      }
      case Primitive::Dense:
        t.flops += static_cast<std::uint64_t>(p.in_ch * p.out_ch);
        t.params += static_cast<std::uint64_t>(p.in_ch * p.out_ch + (p.bias ? p.out_ch : 0));
        break;
      case Primitive::Scale:
        t.flops += static_cast<std::uint64_t>(p.in_side * p.in_side * p.in_ch);
        break;
    }
  }
  return t;
}

}  // namespace oracle
