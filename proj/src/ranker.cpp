#include "relrank/ranker.hpp"

#include <cmath>
#include <numeric>

#include "relrank/error.hpp"
#include "relrank/kernels.hpp"
#include "relrank/metrics.hpp"

namespace relrank::rank {

using nlohmann::json;

void validate_label(double c) {
  if (!is_legal_label(c)) throw ValidationError("relative label must be 0, 0.5 or 1, got " + std::to_string(c));
}

bool LabeledPairSet::add(const RelativePair& pair, int round) {
  if (pair.first == pair.second) throw ValidationError("self-pair");
  validate_label(pair.label);
  if (!keys_.insert(unordered_key(pair.first, pair.second)).second) return false;
  pairs_.push_back(pair);
  rounds_.push_back(round);
  return true;
}

namespace {

void check_finite(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw NumericalError("non-finite score");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

double pair_probability(double score_first, double score_second) {
  check_finite(score_first, score_second);
  return sigmoid(score_first - score_second);
}

nn::PairTerm ranknet_term(double score_first, double score_second, double label) {
  check_finite(score_first, score_second);
  const double d = score_first - score_second;
  const double log_floor = std::log(kLogClamp);
  const double log_p = -softplus(-d);
  const double log_q = -softplus(d);
  const double p = sigmoid(d);
  const double q = sigmoid(-d);

  nn::PairTerm term;
  term.value = -(label * std::max(log_p, log_floor) + (1.0 - label) * std::max(log_q, log_floor));
  // d/dd log P = 1 - P and d/dd log(1 - P) = -P, zero where the clamp is active.
  const double slope_p = log_p > log_floor ? q : 0.0;
  const double slope_q = log_q > log_floor ? -p : 0.0;
  const double slope = -(label * slope_p + (1.0 - label) * slope_q);
  term.d_first = slope;
  term.d_second = -slope;
  return term;
}

double rank_loss(std::span<const double> scores_first, std::span<const double> scores_second,
                 std::span<const double> labels, const nn::NetworkParams& params) {
  if (scores_first.size() != labels.size() || scores_second.size() != labels.size())
    throw ValidationError("one score pair is required per label");
  double total = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    validate_label(labels[k]);
    total += ranknet_term(scores_first[k], scores_second[k], labels[k]).value;
  }
  return total + params.penalty();
}

double regression_loss(std::span<const double> scores_first, std::span<const double> scores_second,
                       std::span<const std::optional<double>> absolute_first,
                       std::span<const std::optional<double>> absolute_second) {
  const std::size_t n = scores_first.size();
  if (scores_second.size() != n || absolute_first.size() != n || absolute_second.size() != n)
    throw ValidationError("regression batch arrays differ in length");
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!absolute_first[k] || !absolute_second[k])
      throw ValidationError("pair " + std::to_string(k) + " lacks an absolute label");
    const double a = scores_first[k] - *absolute_first[k];
    const double b = scores_second[k] - *absolute_second[k];
    total += a * a + b * b;
  }
  return total;
}

double multitask_loss(const ScoredBatch& batch, const nn::NetworkParams& params, bool multitask_enabled) {
  if (!multitask_enabled) throw ValidationError("multitask loss requested with multitask mode off");
  return rank_loss(batch.scores_first, batch.scores_second, batch.labels, params) +
         regression_loss(batch.scores_first, batch.scores_second, batch.absolute_first, batch.absolute_second);
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (epochs_per_round == 0) throw ValidationError("epochs_per_round must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
}

json to_json(const RoundReport& report) {
  json epochs = json::array();
  for (const EpochRecord& e : report.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_accuracy", e.val_accuracy ? json(*e.val_accuracy) : json(nullptr)}});
  return {{"round", report.round},
          {"num_pairs", report.num_pairs},
          {"best_epoch", report.best_epoch},
          {"best_val_accuracy", report.best_val_accuracy ? json(*report.best_val_accuracy) : json(nullptr)},
          {"epochs", epochs}};
}

std::optional<double> validation_accuracy(const nn::NetworkParams& params, const data::Dataset& dataset,
                                          std::span<const RelativePair> pairs) {
  const bool any_strict =
      std::any_of(pairs.begin(), pairs.end(), [](const RelativePair& p) { return p.label != kEqualSeverity; });
  if (!any_strict) return std::nullopt;
  // Only the pair members need scoring.
  std::vector<double> scores(dataset.size(), 0.0);
  for (const RelativePair& p : pairs) {
    scores[p.first.index()] = nn::forward(params, dataset.features(p.first));
    scores[p.second.index()] = nn::forward(params, dataset.features(p.second));
  }
  return eval::pair_accuracy(pairs, scores);
}

RoundReport train_round(nn::NetworkParams& params, const data::Dataset& dataset,
                        std::span<const RelativePair> labeled, std::span<const RelativePair> validation,
                        const TrainConfig& config, int round, std::span<const std::optional<double>> absolute) {
  config.validate();
  params.validate();
  if (labeled.empty()) throw ValidationError("no labeled pairs to train on");
  for (const RelativePair& p : labeled) {
    validate_label(p.label);
    if (p.first.index() >= dataset.size() || p.second.index() >= dataset.size())
      throw ValidationError("pair refers to a sample outside the dataset");
    if (config.multitask) {
      const bool have = p.first.index() < absolute.size() && p.second.index() < absolute.size() &&
                        absolute[p.first.index()] && absolute[p.second.index()];
      if (!have) throw ValidationError("multitask training needs absolute labels for every pair member");
    }
  }

  Engine rng = make_engine(config.seed, Stream::training, {static_cast<std::uint64_t>(round)});
  nn::OptimizerState optimizer = nn::make_optimizer(params, {.learning_rate = config.learning_rate});

  RoundReport report;
  report.round = round;
  report.num_pairs = labeled.size();
  nn::NetworkParams best = params;
  bool have_best = false;

  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<nn::PairInput> inputs;
  std::vector<nn::PairMasks> masks;
  std::vector<const RelativePair*> batch_pairs;

  for (std::size_t epoch = 0; epoch < config.epochs_per_round; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      inputs.clear();
      masks.clear();
      batch_pairs.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const RelativePair& p = labeled[order[k]];
        batch_pairs.push_back(&p);
        inputs.push_back({dataset.features(p.first), dataset.features(p.second)});
        nn::PairMasks m;
        m.first = nn::sample_masks(params, rng);
        m.second = nn::sample_masks(params, rng);
        masks.push_back(std::move(m));
      }

      auto loss = [&](std::size_t k, double s1, double s2) {
        const RelativePair& p = *batch_pairs[k];
        nn::PairTerm term = ranknet_term(s1, s2, p.label);
        if (config.multitask) {
          const double r1 = s1 - *absolute[p.first.index()];
          const double r2 = s2 - *absolute[p.second.index()];
          term.value += r1 * r1 + r2 * r2;
          term.d_first += 2.0 * r1;
          term.d_second += 2.0 * r2;
        }
        return term;
      };

      nn::GradientSet grads;
      try {
        grads = nn::gradients(params, inputs, masks, loss);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged in round " + std::to_string(round) + ", epoch " +
                             std::to_string(epoch) + " (" + e.what() + ")");
      }
      if (!std::isfinite(grads.objective))
        throw NumericalError("training loss is not finite in round " + std::to_string(round) + ", epoch " +
                             std::to_string(epoch));
      epoch_loss += grads.data_term;
      nn::optimizer_step(params, grads, optimizer);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(labeled.size());
    record.val_accuracy = validation_accuracy(params, dataset, validation);
    const bool improves = record.val_accuracy &&
                          (!report.best_val_accuracy || *record.val_accuracy > *report.best_val_accuracy);
    if (improves || (!record.val_accuracy && !report.best_val_accuracy)) {
      report.best_epoch = epoch;
      report.best_val_accuracy = record.val_accuracy;
      best = params;
      have_best = true;
    }
    report.epochs.push_back(record);
  }
  if (have_best) params = std::move(best);
  return report;
}

}  // namespace relrank::rank
