#include "relrank/bayes.hpp"

#include <algorithm>
#include <string>

#include "relrank/error.hpp"
#include "relrank/kernels.hpp"

namespace relrank::bayes {

ScorePosterior posterior_from_draws(SampleId id, std::vector<double> draws) {
  RunningMoments moments;
  for (double d : draws) moments.push(d);
  ScorePosterior p;
  p.id = id;
  p.draws = std::move(draws);
  p.mean = moments.mean();
  p.variance = moments.variance();
  return p;
}

std::uint64_t draw_seed(std::uint64_t base_seed, SampleId id, int draw) {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(Stream::posterior), id.value,
                                 static_cast<std::uint64_t>(draw)});
}

ScorePosterior predict_posterior(const nn::NetworkParams& params, std::span<const double> features, SampleId id,
                                 int draws, std::uint64_t base_seed) {
  if (draws < 1) throw ValidationError("number of Monte Carlo draws must be at least 1");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(draws));
  for (int t = 0; t < draws; ++t) {
    Engine rng{draw_seed(base_seed, id, t)};
    const nn::DropoutMasks masks = nn::sample_masks(params, rng);
    values.push_back(nn::forward(params, features, &masks));
  }
  return posterior_from_draws(id, std::move(values));
}

std::vector<ScorePosterior> predict_posteriors(const nn::NetworkParams& params, const data::Dataset& dataset,
                                               std::span<const SampleId> ids, int draws, std::uint64_t base_seed) {
  if (draws < 1) throw ValidationError("number of Monte Carlo draws must be at least 1");
  return kernels::posteriors_parallel(params, dataset, ids, draws, base_seed);
}

std::vector<SampleId> acquisition_rank(std::span<const ScorePosterior> posteriors) {
  std::vector<const ScorePosterior*> order;
  order.reserve(posteriors.size());
  for (const ScorePosterior& p : posteriors) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const ScorePosterior* a, const ScorePosterior* b) {
    if (a->variance != b->variance) return a->variance > b->variance;
    return a->id < b->id;
  });
  std::vector<SampleId> ids;
  ids.reserve(order.size());
  for (const ScorePosterior* p : order) ids.push_back(p->id);
  return ids;
}

}  // namespace relrank::bayes
