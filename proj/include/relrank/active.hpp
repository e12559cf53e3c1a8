#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "relrank/bayes.hpp"
#include "relrank/data.hpp"
#include "relrank/nn.hpp"
#include "relrank/pairs.hpp"
#include "relrank/ranker.hpp"

namespace relrank::active {

enum class Sampler { ubs, random, coreset };

std::string to_string(Sampler s);
Sampler sampler_from_string(const std::string& name);

struct LoopConfig {
  double r_percent = 20.0;  // initial selection ratio
  double s_percent = 5.0;   // per-round selection ratio
  int rounds = 6;           // K
  int draws = bayes::kDefaultDraws;  // T
  Sampler sampler = Sampler::ubs;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{32, 16};
  double dropout_rate = 0.2;
  double weight_decay = 1e-4;

  std::vector<std::size_t> layer_sizes(std::size_t input_dim) const;
};

/// round(percent * n / 100), halves rounded up.
std::size_t quota(double percent, std::size_t n);

/// R = quota(r_percent, N) ids drawn uniformly without replacement, sorted.
std::vector<SampleId> initial_selection(std::span<const SampleId> pool, double r_percent, Engine& rng);

struct PairingResult {
  std::vector<std::pair<SampleId, SampleId>> pairs;  // unlabeled, (anchor, partner)
  std::vector<SampleId> skipped;                    // anchors that got no pair
};

/// One pair per selected id with a partner drawn uniformly from the other
/// selected ids. An unordered duplicate (against `existing` or this batch)
/// is redrawn up to |selected| - 1 times, then up to |fallback| times from
/// `fallback`, then the anchor is skipped with a warning. Throws
/// PairingError when no pair at all can be formed.
PairingResult make_pairs(std::span<const SampleId> selected, const std::unordered_set<std::uint64_t>& existing,
                         Engine& rng, std::span<const SampleId> fallback = {});

/// First S = quota(s_percent, N) ids of the acquisition ranking.
std::vector<SampleId> select_uncertain(std::span<const bayes::ScorePosterior> posteriors, double s_percent,
                                       std::size_t n);

/// S ids drawn uniformly without replacement from the pool, in draw order.
std::vector<SampleId> random_select(std::span<const SampleId> pool, double s_percent, std::size_t n, Engine& rng);

/// Greedy k-center: S times, add the pool point farthest (Euclidean) from
/// its nearest center, lower id on ties. `already_selected` seeds the centers.
std::vector<SampleId> coreset_select(const data::Dataset& dataset, std::span<const SampleId> pool,
                                     double s_percent, std::size_t n, std::span<const SampleId> already_selected);

enum class Source { sim, human };
std::string to_string(Source s);

/// Observer of the loop's durable outputs. RunDirectory writes them to disk.
class RunSink {
 public:
  virtual ~RunSink() = default;
  virtual void on_label(const rank::RelativePair& pair, int round, Source source) = 0;
  virtual void on_selection(int round, std::span<const SampleId> ids, std::span<const std::optional<double>> variances) = 0;
  virtual void on_round(const nlohmann::json& record) = 0;
  virtual void on_params(int round, const nn::NetworkParams& params) = 0;
};

struct RoundMetrics {
  rank::RoundReport training;
  std::size_t labeled = 0;
  std::size_t selected = 0;
  std::size_t skipped = 0;
  nlohmann::json evaluation;  // filled by the caller's evaluator, may be null
};

struct LoopState {
  rank::LabeledPairSet labeled;
  std::vector<std::vector<SampleId>> selected_ids_by_round;
  std::vector<std::size_t> skipped_by_round;
  nn::NetworkParams params;
  std::vector<RoundMetrics> metrics_by_round;
};

/// LoopState equality ignoring the free-form evaluation payload.
bool same_trajectory(const LoopState& a, const LoopState& b);

enum class Phase { collecting, training, done };
std::string to_string(Phase p);

struct PendingPair {
  std::string pair_id;
  SampleId first;
  SampleId second;
  std::optional<double> label;
};

/// The active learning loop as a state machine so that the same code drives
/// the simulated loop and the human-facing service:
///
///   collecting(round k) --all pending labeled--> advance(): train, select,
///   pair --> collecting(round k+1) ... after round K's pairs: train --> done.
class ActiveSession {
 public:
  using Evaluator = std::function<nlohmann::json(const nn::NetworkParams&, int round)>;
  using AbsoluteSource = std::function<int(SampleId)>;

  ActiveSession(const data::Dataset& dataset, std::vector<SampleId> train_ids,
                std::vector<rank::RelativePair> validation, LoopConfig loop, rank::TrainConfig train,
                ModelConfig model, RunSink* sink = nullptr);

  void set_evaluator(Evaluator evaluator) { evaluator_ = std::move(evaluator); }
  /// Needed when train.multitask is set: absolute labels for the final round.
  void set_absolute_source(AbsoluteSource source) { absolute_ = std::move(source); }

  Phase phase() const noexcept { return phase_; }
  int round() const noexcept { return round_; }
  std::size_t pool_size() const noexcept { return train_ids_.size(); }
  const std::vector<PendingPair>& pending() const noexcept { return pending_; }
  /// Index of the first pending pair without a label.
  std::optional<std::size_t> next_unlabeled() const;
  std::optional<std::size_t> find_pending(const std::string& pair_id) const;
  bool round_complete() const;

  /// Labels one pending pair; illegal labels raise ValidationError and a
  /// second label for the same pair raises ValidationError too.
  void submit(std::size_t slot, double label, Source source);

  /// Commits the round's labels, trains, and either prepares the next
  /// round's pending pairs or finishes.
  void advance();

  const LoopState& state() const noexcept { return state_; }
  const std::vector<bayes::ScorePosterior>& last_posteriors() const noexcept { return last_posteriors_; }
  std::size_t absolute_labels_used() const noexcept { return absolute_used_; }

 private:
  void open_round(std::vector<SampleId> selected, std::vector<std::optional<double>> variances);
  std::vector<SampleId> previously_selected() const;

  const data::Dataset* dataset_;
  std::vector<SampleId> train_ids_;
  std::vector<rank::RelativePair> validation_;
  LoopConfig loop_;
  rank::TrainConfig train_;
  ModelConfig model_;
  RunSink* sink_;
  Evaluator evaluator_;
  AbsoluteSource absolute_;
  nn::NetworkParams initial_params_;

  Phase phase_ = Phase::collecting;
  int round_ = 0;
  std::vector<PendingPair> pending_;
  LoopState state_;
  std::vector<bayes::ScorePosterior> last_posteriors_;
  std::size_t absolute_used_ = 0;
};

/// Simulated-oracle loop: every pending pair is labeled by `oracle` in
/// queue order, then the session advances until done.
LoopState run_loop(ActiveSession& session, const std::function<double(SampleId, SampleId)>& oracle);

}  // namespace relrank::active
