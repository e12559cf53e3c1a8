#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "relrank/data.hpp"
#include "relrank/nn.hpp"
#include "relrank/types.hpp"

namespace relrank::bayes {

inline constexpr int kDefaultDraws = 30;

/// Monte Carlo dropout posterior of one sample's rank score. `mean` is the
/// rank score, `variance` the population variance of the draws.
struct ScorePosterior {
  SampleId id;
  std::vector<double> draws;
  double mean = 0.0;
  double variance = 0.0;
  friend bool operator==(const ScorePosterior&, const ScorePosterior&) = default;
};

/// Welford accumulator for mean and population variance.
class RunningMoments {
 public:
  void push(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return count_ == 0 ? 0.0 : std::max(0.0, m2_ / static_cast<double>(count_)); }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

ScorePosterior posterior_from_draws(SampleId id, std::vector<double> draws);

/// Seed of the stream that produces draw `draw` of sample `id`. Keyed so a
/// posterior does not depend on evaluation order or thread count.
std::uint64_t draw_seed(std::uint64_t base_seed, SampleId id, int draw);

/// T stochastic forward passes with fresh masks each. T must be >= 1.
ScorePosterior predict_posterior(const nn::NetworkParams& params, std::span<const double> features, SampleId id,
                                 int draws, std::uint64_t base_seed);

/// Posteriors for many samples, evaluated in parallel; bit-identical to
/// evaluating them one by one.
std::vector<ScorePosterior> predict_posteriors(const nn::NetworkParams& params, const data::Dataset& dataset,
                                               std::span<const SampleId> ids, int draws, std::uint64_t base_seed);

/// Ids by variance, largest first; equal variances in ascending id order.
std::vector<SampleId> acquisition_rank(std::span<const ScorePosterior> posteriors);

}  // namespace relrank::bayes
