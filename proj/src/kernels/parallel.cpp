#include <omp.h>

#include <exception>

#include "relrank/kernels.hpp"

namespace relrank::kernels {

std::vector<bayes::ScorePosterior> posteriors_parallel(const nn::NetworkParams& params,
                                                       const data::Dataset& dataset,
                                                       std::span<const SampleId> ids, int draws,
                                                       std::uint64_t base_seed) {
  std::vector<bayes::ScorePosterior> out(ids.size());
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      const SampleId id = ids[static_cast<std::size_t>(k)];
      out[static_cast<std::size_t>(k)] = bayes::predict_posterior(params, dataset.features(id), id, draws, base_seed);
    } catch (...) {
#pragma omp critical(relrank_posterior_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<double> scores_parallel(const nn::NetworkParams& params, const data::Dataset& dataset) {
  std::vector<double> out(dataset.size());
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = nn::forward(params, dataset.features(SampleId{static_cast<std::size_t>(i)}));
    } catch (...) {
#pragma omp critical(relrank_score_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

void nearest_center_update_parallel(const data::Dataset& dataset, std::span<const SampleId> pool,
                                    std::span<const double> center, std::span<double> min_dist) {
  const auto n = static_cast<std::ptrdiff_t>(pool.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double d = euclidean(dataset.features(pool[i]), center);
    if (d < min_dist[i]) min_dist[i] = d;
  }
}

}  // namespace relrank::kernels
