#include "relrank/active.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "relrank/error.hpp"
#include "relrank/kernels.hpp"

namespace relrank::active {

using nlohmann::json;

std::string to_string(Sampler s) {
  switch (s) {
    case Sampler::ubs: return "ubs";
    case Sampler::random: return "random";
    case Sampler::coreset: return "coreset";
  }
  return "?";
}

Sampler sampler_from_string(const std::string& name) {
  if (name == "ubs") return Sampler::ubs;
  if (name == "random") return Sampler::random;
  if (name == "coreset") return Sampler::coreset;
  throw ConfigError("unknown sampler '" + name + "' (expected ubs, random or coreset)");
}

std::string to_string(Source s) { return s == Source::sim ? "sim" : "human"; }

std::string to_string(Phase p) {
  switch (p) {
    case Phase::collecting: return "collecting";
    case Phase::training: return "training";
    case Phase::done: return "done";
  }
  return "?";
}

void LoopConfig::validate() const {
  if (!(r_percent > 0.0 && r_percent <= 100.0)) throw ConfigError("r_percent must be in (0, 100]");
  if (!(s_percent >= 0.0 && s_percent <= 100.0)) throw ConfigError("s_percent must be in [0, 100]");
  if (rounds < 0) throw ConfigError("K must be nonnegative");
  if (draws < 1) throw ConfigError("T must be at least 1");
  if (r_percent + s_percent * rounds > 100.0 + 1e-9) throw ConfigError("r + s*K must not exceed 100");
}

std::vector<std::size_t> ModelConfig::layer_sizes(std::size_t input_dim) const {
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

std::size_t quota(double percent, std::size_t n) {
  return static_cast<std::size_t>(std::floor(percent * static_cast<double>(n) / 100.0 + 0.5));
}

namespace {

/// First k entries of a uniformly shuffled copy of `pool`.
std::vector<SampleId> partial_shuffle(std::span<const SampleId> pool, std::size_t k, Engine& rng) {
  std::vector<SampleId> v(pool.begin(), pool.end());
  k = std::min(k, v.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(v[i], v[i + uniform_index(rng, v.size() - i)]);
  v.resize(k);
  return v;
}

}  // namespace

std::vector<SampleId> initial_selection(std::span<const SampleId> pool, double r_percent, Engine& rng) {
  const std::size_t r = quota(r_percent, pool.size());
  if (r < 2)
    throw ConfigError("initial selection of " + std::to_string(r) + " samples is too small to form a pair");
  std::vector<SampleId> ids = partial_shuffle(pool, r, rng);
  std::sort(ids.begin(), ids.end());
  return ids;
}

PairingResult make_pairs(std::span<const SampleId> selected, const std::unordered_set<std::uint64_t>& existing,
                         Engine& rng, std::span<const SampleId> fallback) {
  PairingResult result;
  std::unordered_set<std::uint64_t> formed;
  auto usable = [&](SampleId a, SampleId b) {
    if (a == b) return false;
    const std::uint64_t key = rank::unordered_key(a, b);
    return !existing.contains(key) && !formed.contains(key);
  };

  const std::size_t n = selected.size();
  for (std::size_t pos = 0; pos < n; ++pos) {
    const SampleId a = selected[pos];
    std::optional<SampleId> partner;
    for (std::size_t t = 0; n > 1 && t + 1 < n && !partner; ++t) {
      std::size_t j = uniform_index(rng, n - 1);
      if (j >= pos) ++j;
      if (usable(a, selected[j])) partner = selected[j];
    }
    for (std::size_t t = 0; !fallback.empty() && t < fallback.size() && !partner; ++t) {
      const SampleId b = fallback[uniform_index(rng, fallback.size())];
      if (usable(a, b)) partner = b;
    }
    if (!partner) {
      spdlog::warn("no fresh partner for sample {}; skipping its pair", a.value);
      result.skipped.push_back(a);
      continue;
    }
    formed.insert(rank::unordered_key(a, *partner));
    result.pairs.emplace_back(a, *partner);
  }
  if (result.pairs.empty()) throw PairingError("every candidate pair among the selected samples is already labeled");
  return result;
}

std::vector<SampleId> select_uncertain(std::span<const bayes::ScorePosterior> posteriors, double s_percent,
                                       std::size_t n) {
  const std::size_t s = quota(s_percent, n);
  if (s < 1) throw ConfigError("per-round selection quota rounds to zero");
  std::vector<SampleId> ranked = bayes::acquisition_rank(posteriors);
  if (ranked.size() > s) ranked.resize(s);
  return ranked;
}

std::vector<SampleId> random_select(std::span<const SampleId> pool, double s_percent, std::size_t n, Engine& rng) {
  const std::size_t s = quota(s_percent, n);
  if (s < 1) throw ConfigError("per-round selection quota rounds to zero");
  return partial_shuffle(pool, s, rng);
}

std::vector<SampleId> coreset_select(const data::Dataset& dataset, std::span<const SampleId> pool,
                                     double s_percent, std::size_t n, std::span<const SampleId> already_selected) {
  if (pool.empty()) throw ConfigError("core-set selection pool is empty");
  const std::size_t s = quota(s_percent, n);
  if (s < 1) throw ConfigError("per-round selection quota rounds to zero");

  std::vector<double> min_dist(pool.size(), std::numeric_limits<double>::infinity());
  for (SampleId c : already_selected) kernels::nearest_center_update_parallel(dataset, pool, dataset.features(c), min_dist);

  std::vector<bool> taken(pool.size(), false);
  std::vector<SampleId> chosen;
  while (chosen.size() < std::min(s, pool.size())) {
    std::size_t best = pool.size();
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (taken[k]) continue;
      if (best == pool.size() || min_dist[k] > min_dist[best] ||
          (min_dist[k] == min_dist[best] && pool[k] < pool[best]))
        best = k;
    }
    taken[best] = true;
    chosen.push_back(pool[best]);
    kernels::nearest_center_update_parallel(dataset, pool, dataset.features(pool[best]), min_dist);
  }
  return chosen;
}

bool same_trajectory(const LoopState& a, const LoopState& b) {
  if (!(a.labeled == b.labeled) || a.selected_ids_by_round != b.selected_ids_by_round ||
      a.skipped_by_round != b.skipped_by_round || !(a.params == b.params) ||
      a.metrics_by_round.size() != b.metrics_by_round.size())
    return false;
  for (std::size_t k = 0; k < a.metrics_by_round.size(); ++k) {
    const RoundMetrics& x = a.metrics_by_round[k];
    const RoundMetrics& y = b.metrics_by_round[k];
    if (!(x.training == y.training) || x.labeled != y.labeled || x.selected != y.selected || x.skipped != y.skipped)
      return false;
  }
  return true;
}

// --- session ----------------------------------------------------------------

ActiveSession::ActiveSession(const data::Dataset& dataset, std::vector<SampleId> train_ids,
                             std::vector<rank::RelativePair> validation, LoopConfig loop, rank::TrainConfig train,
                             ModelConfig model, RunSink* sink)
    : dataset_(&dataset),
      train_ids_(std::move(train_ids)),
      validation_(std::move(validation)),
      loop_(loop),
      train_(train),
      model_(std::move(model)),
      sink_(sink) {
  loop_.validate();
  train_.validate();
  if (train_ids_.empty()) throw ConfigError("training pool is empty");
  std::sort(train_ids_.begin(), train_ids_.end());
  if (loop_.rounds > 0 && quota(loop_.s_percent, train_ids_.size()) < 1)
    throw ConfigError("per-round selection quota rounds to zero");

  initial_params_ = nn::init_network(model_.layer_sizes(dataset.feature_dim()), loop_.seed, model_.dropout_rate,
                                     model_.weight_decay);
  state_.params = initial_params_;

  Engine rng = make_engine(loop_.seed, Stream::initial_selection);
  std::vector<SampleId> selected = initial_selection(train_ids_, loop_.r_percent, rng);
  open_round(std::move(selected), {});
}

std::vector<SampleId> ActiveSession::previously_selected() const {
  std::vector<SampleId> ids;
  for (const auto& round : state_.selected_ids_by_round) ids.insert(ids.end(), round.begin(), round.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void ActiveSession::open_round(std::vector<SampleId> selected, std::vector<std::optional<double>> variances) {
  variances.resize(selected.size());
  const std::vector<SampleId> fallback = previously_selected();
  if (sink_) sink_->on_selection(round_, selected, variances);

  Engine rng = make_engine(loop_.seed, Stream::pairing, {static_cast<std::uint64_t>(round_)});
  PairingResult paired = make_pairs(selected, state_.labeled.keys(), rng, fallback);

  pending_.clear();
  for (std::size_t k = 0; k < paired.pairs.size(); ++k)
    pending_.push_back({"r" + std::to_string(round_) + "-p" + std::to_string(k), paired.pairs[k].first,
                        paired.pairs[k].second, std::nullopt});
  state_.selected_ids_by_round.push_back(std::move(selected));
  state_.skipped_by_round.push_back(paired.skipped.size());
  phase_ = Phase::collecting;
}

std::optional<std::size_t> ActiveSession::next_unlabeled() const {
  for (std::size_t k = 0; k < pending_.size(); ++k)
    if (!pending_[k].label) return k;
  return std::nullopt;
}

std::optional<std::size_t> ActiveSession::find_pending(const std::string& pair_id) const {
  for (std::size_t k = 0; k < pending_.size(); ++k)
    if (pending_[k].pair_id == pair_id) return k;
  return std::nullopt;
}

bool ActiveSession::round_complete() const {
  return phase_ == Phase::collecting && !next_unlabeled().has_value();
}

void ActiveSession::submit(std::size_t slot, double label, Source source) {
  if (phase_ != Phase::collecting) throw ValidationError("session is not collecting labels");
  if (slot >= pending_.size()) throw ValidationError("no pending pair in slot " + std::to_string(slot));
  rank::validate_label(label);
  PendingPair& p = pending_[slot];
  if (p.label) throw ValidationError("pair " + p.pair_id + " is already labeled");
  p.label = label;
  if (sink_) sink_->on_label({p.first, p.second, label}, round_, source);
}

void ActiveSession::advance() {
  if (!round_complete()) throw ValidationError("cannot advance before every pending pair is labeled");
  for (const PendingPair& p : pending_)
    if (!state_.labeled.add({p.first, p.second, *p.label}, round_))
      throw PairingError("pair " + p.pair_id + " duplicates a labeled pair");
  const std::size_t selected_now = state_.selected_ids_by_round.back().size();
  pending_.clear();
  phase_ = Phase::training;

  if (train_.retrain_mode == rank::RetrainMode::scratch) state_.params = initial_params_;

  const bool final_round = round_ == loop_.rounds;
  std::vector<std::optional<double>> absolute;
  rank::TrainConfig config = train_;
  config.multitask = train_.multitask && final_round;
  if (config.multitask) {
    if (!absolute_) throw ConfigError("multitask training needs an absolute label source");
    absolute.assign(dataset_->size(), std::nullopt);
    std::size_t unique = 0;
    for (const rank::RelativePair& p : state_.labeled.pairs())
      for (SampleId id : {p.first, p.second})
        if (!absolute[id.index()]) {
          absolute[id.index()] = static_cast<double>(absolute_(id));
          ++unique;
        }
    absolute_used_ = unique;
  }

  RoundMetrics metrics;
  metrics.training =
      rank::train_round(state_.params, *dataset_, state_.labeled.pairs(), validation_, config, round_, absolute);
  metrics.labeled = state_.labeled.size();
  metrics.selected = selected_now;
  metrics.skipped = state_.skipped_by_round.back();
  if (evaluator_) metrics.evaluation = evaluator_(state_.params, round_);

  if (sink_) {
    json record{{"round", round_},
                {"labeled", metrics.labeled},
                {"selected", metrics.selected},
                {"skipped", metrics.skipped},
                {"labeling_ratio", static_cast<double>(metrics.labeled) / static_cast<double>(train_ids_.size())},
                {"training", rank::to_json(metrics.training)},
                {"evaluation", metrics.evaluation}};
    if (config.multitask) record["absolute_labels"] = absolute_used_;
    sink_->on_params(round_, state_.params);
    sink_->on_round(record);
  }
  state_.metrics_by_round.push_back(std::move(metrics));

  if (final_round) {
    phase_ = Phase::done;
    return;
  }

  const std::size_t n = train_ids_.size();
  std::vector<SampleId> selected;
  std::vector<std::optional<double>> variances;
  switch (loop_.sampler) {
    case Sampler::ubs: {
      const std::uint64_t base = derive_seed(loop_.seed, {static_cast<std::uint64_t>(Stream::posterior),
                                                          static_cast<std::uint64_t>(round_)});
      last_posteriors_ = bayes::predict_posteriors(state_.params, *dataset_, train_ids_, loop_.draws, base);
      selected = select_uncertain(last_posteriors_, loop_.s_percent, n);
      std::unordered_map<SampleId, double> variance_of;
      for (const auto& p : last_posteriors_) variance_of.emplace(p.id, p.variance);
      for (SampleId id : selected) variances.emplace_back(variance_of.at(id));
      break;
    }
    case Sampler::random: {
      Engine rng = make_engine(loop_.seed, Stream::random_selection, {static_cast<std::uint64_t>(round_)});
      selected = random_select(train_ids_, loop_.s_percent, n, rng);
      break;
    }
    case Sampler::coreset:
      selected = coreset_select(*dataset_, train_ids_, loop_.s_percent, n, previously_selected());
      break;
  }
  ++round_;
  open_round(std::move(selected), std::move(variances));
}

LoopState run_loop(ActiveSession& session, const std::function<double(SampleId, SampleId)>& oracle) {
  while (session.phase() != Phase::done) {
    while (auto slot = session.next_unlabeled()) {
      const PendingPair& p = session.pending()[*slot];
      session.submit(*slot, oracle(p.first, p.second), Source::sim);
    }
    session.advance();
  }
  return session.state();
}

}  // namespace relrank::active
