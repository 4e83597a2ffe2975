#include "nars/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nars/error.hpp"

namespace nars {

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ShapeError("spearman: series lengths differ");
  if (xs.size() < 2) throw ShapeError("spearman: need at least two points");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw UndefinedResultError("spearman: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mean_squared_error(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw ShapeError("mse: lengths differ");
  if (predicted.empty()) return 0;
  double sum = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(predicted.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw ShapeError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace nars
