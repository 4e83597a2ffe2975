#pragma once

#include <span>
#include <vector>

namespace nars {

/// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> xs);

/// Spearman rank correlation (Pearson correlation of average ranks).
/// Throws ShapeError on length mismatch or fewer than two points and
/// UndefinedResultError when either series is constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

double mean_squared_error(std::span<const double> predicted, std::span<const double> target);

double median(std::vector<double> values);

}  // namespace nars
