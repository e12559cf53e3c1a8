#include "relrank/experiment.hpp"

#include "relrank/error.hpp"
#include "relrank/kernels.hpp"

namespace relrank::experiment {

using nlohmann::json;

namespace {

// Stream key for the posterior draws used to score evaluation samples.
constexpr std::uint64_t kEvalPosteriorKey = 0xe7a1;

std::vector<double> posterior_mean_scores(const nn::NetworkParams& params, const data::Dataset& dataset,
                                          std::span<const SampleId> ids, int draws, std::uint64_t seed) {
  const std::uint64_t base = derive_seed(seed, {static_cast<std::uint64_t>(Stream::posterior), kEvalPosteriorKey});
  std::vector<double> scores(dataset.size(), 0.0);
  for (const auto& p : bayes::predict_posteriors(params, dataset, ids, draws, base)) scores[p.id.index()] = p.mean;
  return scores;
}

std::vector<SampleId> pair_members(const Prepared& prepared) {
  std::vector<SampleId> ids;
  auto add = [&](const std::vector<rank::RelativePair>& pairs) {
    for (const auto& p : pairs) {
      ids.push_back(p.first);
      ids.push_back(p.second);
    }
  };
  add(prepared.overall.pairs);
  for (const auto& set : prepared.neighboring) add(set.pairs);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

std::vector<rank::RelativePair> validation_pairs(const data::Dataset& dataset, std::span<const SampleId> ids,
                                                 std::uint64_t seed) {
  if (ids.size() < 2) return {};
  Engine rng = make_engine(seed, Stream::validation_pairs);
  const active::PairingResult paired = active::make_pairs(ids, {}, rng);
  std::vector<rank::RelativePair> out;
  out.reserve(paired.pairs.size());
  for (const auto& [a, b] : paired.pairs) out.push_back({a, b, data::oracle_relative(dataset, a, b)});
  return out;
}

Prepared prepare(const io::RunConfig& config) {
  Prepared p;
  p.dataset = config.dataset ? data::load_dataset(*config.dataset) : data::synth_generate(config.synth);
  p.split = data::split_groupwise(p.dataset, config.split, config.seed);
  p.overall.name = "overall";
  if (p.dataset.fully_labeled()) {
    p.validation = validation_pairs(p.dataset, p.split.validation, config.seed);
    p.overall = eval::build_test_pairs(p.dataset, p.split.test, eval::TestPairMode::overall, config.seed).front();
    p.neighboring = eval::build_test_pairs(p.dataset, p.split.test, eval::TestPairMode::neighboring, config.seed);
  }
  return p;
}

TestAccuracy test_accuracy(const nn::NetworkParams& params, const Prepared& prepared) {
  TestAccuracy acc;
  const std::vector<SampleId> members = pair_members(prepared);
  if (members.empty()) return acc;
  const std::vector<double> scores =
      posterior_mean_scores(params, prepared.dataset, members, bayes::kDefaultDraws, 0);
  try {
    acc.overall = eval::pair_accuracy(prepared.overall.pairs, scores);
  } catch (const UndefinedMetricError&) {
  }
  double total = 0.0;
  for (const auto& set : prepared.neighboring) {
    try {
      const double a = eval::pair_accuracy(set.pairs, scores);
      acc.neighboring[set.name] = a;
      total += a;
    } catch (const UndefinedMetricError&) {
    }
  }
  if (!acc.neighboring.empty()) acc.mean_neighboring = total / static_cast<double>(acc.neighboring.size());
  return acc;
}

json to_json(const TestAccuracy& acc) {
  return {{"overall", acc.overall ? json(*acc.overall) : json(nullptr)},
          {"neighboring", acc.neighboring},
          {"mean_neighboring", acc.mean_neighboring ? json(*acc.mean_neighboring) : json(nullptr)}};
}

std::unique_ptr<active::ActiveSession> make_session(const Prepared& prepared, const io::RunConfig& config,
                                                    active::RunSink* sink) {
  auto session = std::make_unique<active::ActiveSession>(prepared.dataset, prepared.split.train, prepared.validation,
                                                         config.loop, config.train, config.model, sink);
  session->set_evaluator(
      [&prepared](const nn::NetworkParams& params, int) { return to_json(test_accuracy(params, prepared)); });
  if (prepared.dataset.fully_labeled()) {
    auto oracle = std::make_shared<data::AbsoluteOracle>(prepared.dataset);
    session->set_absolute_source([oracle](SampleId id) { return (*oracle)(id); });
  }
  return session;
}

RunResult run_simulated(const Prepared& prepared, const io::RunConfig& config,
                        const std::optional<std::filesystem::path>& run_dir) {
  std::optional<io::RunDirectory> directory;
  if (run_dir) directory.emplace(*run_dir, prepared.dataset, config);
  auto session = make_session(prepared, config, directory ? &*directory : nullptr);
  const data::RelativeOracle oracle(prepared.dataset, config.oracle_flip_probability, config.seed);
  RunResult result;
  result.state = active::run_loop(*session, [&](SampleId a, SampleId b) { return oracle(a, b); });
  result.final_accuracy = test_accuracy(result.state.params, prepared);
  result.absolute_labels = session->absolute_labels_used();
  return result;
}

eval::MetricReport evaluate(const nn::NetworkParams& params, const Prepared& prepared, const io::RunConfig& config,
                            std::span<const SampleId> selected_ids, std::size_t relative_labels,
                            std::size_t absolute_labels) {
  eval::MetricReport report;
  const TestAccuracy acc = test_accuracy(params, prepared);
  report.overall_accuracy = acc.overall;
  report.neighboring_accuracies = acc.neighboring;
  report.mean_neighboring = acc.mean_neighboring;

  const data::Dataset& ds = prepared.dataset;
  if (ds.fully_labeled() && !prepared.split.test.empty()) {
    const std::vector<double> scores =
        posterior_mean_scores(params, ds, prepared.split.test, config.loop.draws, config.seed);
    std::vector<int> truth, predicted;
    for (SampleId id : prepared.split.test) {
      truth.push_back(*ds.label(id));
      predicted.push_back(eval::quantize_score(scores[id.index()], ds.num_classes()));
    }
    report.classification = eval::classification_metrics(truth, predicted, ds.num_classes());
    report.class_proportions = eval::class_proportions(selected_ids, ds);
    const std::uint64_t base = derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::posterior), 0xa11});
    const auto posteriors = bayes::predict_posteriors(params, ds, prepared.split.train, config.loop.draws, base);
    report.uncertainty_stats = eval::uncertainty_by_class(posteriors, ds);
  }
  report.relative_labels = static_cast<std::int64_t>(relative_labels);
  report.absolute_labels = static_cast<std::int64_t>(absolute_labels);
  report.cost_seconds = eval::annotation_cost(report.relative_labels, report.absolute_labels);
  return report;
}

}  // namespace relrank::experiment
