#pragma once

// Batch kernels used by the search loops. Each has an OpenMP version and a
// serial reference; both produce bit-identical results.

#include <span>
#include <vector>

#include "nars/cost_model.hpp"
#include "nars/predictor.hpp"
#include "nars/search_space.hpp"

namespace nars {

std::vector<double> score_batch(const PredictorNet &net, std::span<const EncodedVector> inputs);
std::vector<double> score_batch_serial(const PredictorNet &net, std::span<const EncodedVector> inputs);

std::vector<CostTotals> cost_batch(std::span<const ArchConfig> archs);
std::vector<CostTotals> cost_batch_serial(std::span<const ArchConfig> archs);

std::vector<EncodedVector> encode_batch(const SearchSpace &space, std::span<const Genotype> genes);
std::vector<EncodedVector> encode_batch_serial(const SearchSpace &space, std::span<const Genotype> genes);

}  // namespace nars
