#pragma once

#include <stdexcept>
#include <string>

#include "nars/search_space.hpp"

namespace testutil {

inline const std::string kSpaces = NARS_SPACES_DIR;

inline const nars::SearchSpace &joint() {
  static const nars::SearchSpace s = nars::load_space_file(kSpaces + "/joint.space");
  return s;
}
inline const nars::SearchSpace &toy() {
  static const nars::SearchSpace s = nars::load_space_file(kSpaces + "/toy.space");
  return s;
}
inline const nars::SearchSpace &baseline() {
  static const nars::SearchSpace s = nars::load_space_file(kSpaces + "/baseline.space");
  return s;
}

inline std::size_t param_index(const nars::SearchSpace &space, nars::ParamRole role, int stage = -1) {
  const auto &ps = space.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].role != role) continue;
    for (const auto &t : ps[i].targets) {
      if (stage < 0 || t.stage == stage) return i;
    }
  }
  throw std::runtime_error("no such parameter");
}

// Encoded values belonging to one parameter, in layout order.
inline std::vector<double> slots_of(const nars::SearchSpace &space, const nars::EncodedVector &enc,
                                    std::size_t param) {
  std::vector<double> out;
  const auto &slots = space.layout().slots;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k].param == param) out.push_back(enc.values[k]);
  }
  return out;
}

inline int stage_index(const nars::SearchSpace &space, const std::string &label) {
  const auto &st = space.def().stages;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (st[i].label == label) return static_cast<int>(i);
  }
  throw std::runtime_error("no such stage " + label);
}

}  // namespace testutil
