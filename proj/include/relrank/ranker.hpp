#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relrank/data.hpp"
#include "relrank/nn.hpp"
#include "relrank/pairs.hpp"
#include "relrank/types.hpp"

namespace relrank::rank {

/// sigmoid(score_first - score_second). Throws NumericalError on non-finite input.
double pair_probability(double score_first, double score_second);

inline constexpr double kLogClamp = 1e-15;

/// RankNet cross-entropy of one pair with log arguments clamped at 1e-15,
/// and its slopes w.r.t. the two scores.
nn::PairTerm ranknet_term(double score_first, double score_second, double label);

/// -sum[C log P + (1-C) log(1-P)] + weight_decay * sum ||W||_F^2.
double rank_loss(std::span<const double> scores_first, std::span<const double> scores_second,
                 std::span<const double> labels, const nn::NetworkParams& params);

/// sum over pairs of (f_i - A_i)^2 + (f_j - A_j)^2. A missing absolute label
/// is a ValidationError.
double regression_loss(std::span<const double> scores_first, std::span<const double> scores_second,
                       std::span<const std::optional<double>> absolute_first,
                       std::span<const std::optional<double>> absolute_second);

/// Pairs plus per-member absolute labels, scored under fixed masks.
struct ScoredBatch {
  std::vector<double> scores_first;
  std::vector<double> scores_second;
  std::vector<double> labels;
  std::vector<std::optional<double>> absolute_first;
  std::vector<std::optional<double>> absolute_second;
};

/// rank_loss + regression_loss. Refuses with ValidationError when multitask is off.
double multitask_loss(const ScoredBatch& batch, const nn::NetworkParams& params, bool multitask_enabled);

enum class RetrainMode { warm, scratch };

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs_per_round = 30;
  double learning_rate = 1e-3;
  bool multitask = false;
  std::uint64_t seed = 0;
  RetrainMode retrain_mode = RetrainMode::warm;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-pair data loss under dropout
  std::optional<double> val_accuracy;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RoundReport {
  int round = 0;
  std::size_t num_pairs = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_val_accuracy;
  friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

nlohmann::json to_json(const RoundReport& report);

/// Validation pair accuracy of the deterministic (no-dropout) scorer, or
/// nullopt when no pair has a strict label.
std::optional<double> validation_accuracy(const nn::NetworkParams& params, const data::Dataset& dataset,
                                          std::span<const RelativePair> pairs);

/// One training round: seeded shuffle each epoch, fresh masks per forward
/// pass, Adam updates on the summed objective, and the parameters of the
/// best-validation epoch (earliest on ties) written back into `params`.
/// With an empty validation set the last epoch is kept. `absolute` holds
/// per-sample absolute labels, indexed by SampleId, for multitask rounds.
RoundReport train_round(nn::NetworkParams& params, const data::Dataset& dataset,
                        std::span<const RelativePair> labeled, std::span<const RelativePair> validation,
                        const TrainConfig& config, int round,
                        std::span<const std::optional<double>> absolute = {});

}  // namespace relrank::rank
