#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "relrank/active.hpp"
#include "relrank/data.hpp"
#include "relrank/metrics.hpp"
#include "relrank/run_io.hpp"

namespace relrank::experiment {

/// Dataset, group-wise split and the fixed evaluation pairs of one run.
struct Prepared {
  data::Dataset dataset;
  data::Split split;
  std::vector<rank::RelativePair> validation;
  eval::TestPairSet overall;
  std::vector<eval::TestPairSet> neighboring;
};

/// Loads (or synthesizes) the dataset, splits it, and builds validation and
/// test pairs. Deterministic in the config.
Prepared prepare(const io::RunConfig& config);

/// Validation pairs: one ground-truth-labeled partner per validation sample.
std::vector<rank::RelativePair> validation_pairs(const data::Dataset& dataset, std::span<const SampleId> ids,
                                                 std::uint64_t seed);

struct TestAccuracy {
  std::optional<double> overall;
  std::map<std::string, double> neighboring;
  std::optional<double> mean_neighboring;
};

TestAccuracy test_accuracy(const nn::NetworkParams& params, const Prepared& prepared);
nlohmann::json to_json(const TestAccuracy& acc);

/// Builds a session over the training split with the run's configs.
std::unique_ptr<active::ActiveSession> make_session(const Prepared& prepared, const io::RunConfig& config,
                                                    active::RunSink* sink);

struct RunResult {
  active::LoopState state;
  TestAccuracy final_accuracy;
  std::size_t absolute_labels = 0;
};

/// Simulated-oracle run, optionally recorded into `run_dir`.
RunResult run_simulated(const Prepared& prepared, const io::RunConfig& config,
                        const std::optional<std::filesystem::path>& run_dir);

/// Full metric report for a parameter set: test accuracies, quantized
/// classification on the test split, selection class counts, training-pool
/// uncertainty by class and annotation cost.
eval::MetricReport evaluate(const nn::NetworkParams& params, const Prepared& prepared, const io::RunConfig& config,
                            std::span<const SampleId> selected_ids, std::size_t relative_labels,
                            std::size_t absolute_labels);

}  // namespace relrank::experiment
