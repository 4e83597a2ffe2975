#pragma once

// Curve families whose early-stop epoch is known by construction. Before the
// crossing epoch the curves are ordered by a scrambled permutation whose
// Spearman correlation with the final order is below the threshold; from the
// crossing on they are ordered exactly like the final epoch.

#include <algorithm>
#include <numeric>
#include <vector>

#include "nars/rng.hpp"

namespace oracle {

// Spearman of a permutation against the identity (no ties).
inline double permutation_spearman(const std::vector<int> &perm) {
  const double n = static_cast<double>(perm.size());
  double d2 = 0;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const double d = static_cast<double>(perm[i]) - static_cast<double>(i);
    d2 += d * d;
  }
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

struct CurveFamily {
  std::vector<std::vector<double>> curves;
  int crossing = 0;
};

inline CurveFamily make_crossing_family(int crossing, int epochs, int n_curves, double threshold,
                                        std::uint64_t seed) {
  nars::Rng rng(seed);
  CurveFamily fam;
  fam.crossing = crossing;
  fam.curves.assign(static_cast<std::size_t>(n_curves), std::vector<double>(static_cast<std::size_t>(epochs)));
  std::vector<int> ident(static_cast<std::size_t>(n_curves));
  std::iota(ident.begin(), ident.end(), 0);
  for (int e = 1; e <= epochs; ++e) {
    std::vector<int> rank = ident;
    if (e < crossing) {
      do {
        for (std::size_t i = rank.size() - 1; i > 0; --i) {
          std::swap(rank[i], rank[nars::uniform_index(rng, i + 1)]);
        }
      } while (permutation_spearman(rank) >= threshold);
    }
    const double base = 0.1 + 0.6 * (1.0 - 1.0 / static_cast<double>(e));
    for (int c = 0; c < n_curves; ++c) {
      fam.curves[static_cast<std::size_t>(c)][static_cast<std::size_t>(e - 1)] =
          base + 0.01 * static_cast<double>(rank[static_cast<std::size_t>(c)]);
    }
  }
  return fam;
}

}  // namespace oracle
