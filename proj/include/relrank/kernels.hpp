#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version and a serial
// reference with the same floating-point evaluation order per element, so
// the two agree bit for bit at any thread count.

#include <cstdint>
#include <span>
#include <vector>

#include "relrank/bayes.hpp"
#include "relrank/data.hpp"
#include "relrank/nn.hpp"

namespace relrank::kernels {

std::vector<bayes::ScorePosterior> posteriors_parallel(const nn::NetworkParams& params,
                                                       const data::Dataset& dataset,
                                                       std::span<const SampleId> ids, int draws,
                                                       std::uint64_t base_seed);
std::vector<bayes::ScorePosterior> posteriors_serial(const nn::NetworkParams& params,
                                                     const data::Dataset& dataset,
                                                     std::span<const SampleId> ids, int draws,
                                                     std::uint64_t base_seed);

/// Deterministic (no-dropout) score of every sample in the dataset, indexed by SampleId.
std::vector<double> scores_parallel(const nn::NetworkParams& params, const data::Dataset& dataset);
std::vector<double> scores_serial(const nn::NetworkParams& params, const data::Dataset& dataset);

/// min_dist[k] = min(min_dist[k], ||pool[k] - center||) for every pool point.
void nearest_center_update_parallel(const data::Dataset& dataset, std::span<const SampleId> pool,
                                    std::span<const double> center, std::span<double> min_dist);
void nearest_center_update_serial(const data::Dataset& dataset, std::span<const SampleId> pool,
                                  std::span<const double> center, std::span<double> min_dist);

double euclidean(std::span<const double> a, std::span<const double> b);

}  // namespace relrank::kernels
