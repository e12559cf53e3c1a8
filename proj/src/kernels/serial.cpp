#include <cmath>

#include "relrank/kernels.hpp"

namespace relrank::kernels {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

std::vector<bayes::ScorePosterior> posteriors_serial(const nn::NetworkParams& params,
                                                     const data::Dataset& dataset,
                                                     std::span<const SampleId> ids, int draws,
                                                     std::uint64_t base_seed) {
  std::vector<bayes::ScorePosterior> out;
  out.reserve(ids.size());
  for (SampleId id : ids) out.push_back(bayes::predict_posterior(params, dataset.features(id), id, draws, base_seed));
  return out;
}

std::vector<double> scores_serial(const nn::NetworkParams& params, const data::Dataset& dataset) {
  std::vector<double> out(dataset.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = nn::forward(params, dataset.features(SampleId{i}));
  return out;
}

void nearest_center_update_serial(const data::Dataset& dataset, std::span<const SampleId> pool,
                                  std::span<const double> center, std::span<double> min_dist) {
  for (std::size_t k = 0; k < pool.size(); ++k) {
    const double d = euclidean(dataset.features(pool[k]), center);
    if (d < min_dist[k]) min_dist[k] = d;
  }
}

}  // namespace relrank::kernels
