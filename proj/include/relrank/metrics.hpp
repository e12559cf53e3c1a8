#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relrank/bayes.hpp"
#include "relrank/data.hpp"
#include "relrank/pairs.hpp"

namespace relrank::eval {

/// Fraction of strict pairs (C != 0.5) whose score order matches the label.
/// `scores` is indexed by SampleId. Equal scores count as wrong. Throws
/// UndefinedMetricError when no strict pair remains.
double pair_accuracy(std::span<const rank::RelativePair> pairs, std::span<const double> scores);

/// Per-pair correctness (strict pairs only, in input order); the input for McNemar.
std::vector<bool> pair_correctness(std::span<const rank::RelativePair> pairs, std::span<const double> scores);

enum class TestPairMode { overall, neighboring };

struct TestPairSet {
  std::string name;  // "overall" or "c-(c+1)"
  int lower_class = -1;
  int upper_class = -1;
  std::vector<rank::RelativePair> pairs;
};

/// Overall: classes downsampled to the smallest non-empty class, then one
/// random partner per sample. Neighboring: for each adjacent class pair,
/// one partner from the other class per sample of the two classes; an empty
/// class skips that set with a warning. Labels come from ground truth.
std::vector<TestPairSet> build_test_pairs(const data::Dataset& dataset, std::span<const SampleId> ids,
                                          TestPairMode mode, std::uint64_t seed);

/// Round half up, clamped into [0, num_classes - 1].
int quantize_score(double score, int num_classes);

struct ClassScores {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct ClassificationReport {
  std::vector<ClassScores> per_class;  // classes present in truth or prediction
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::string> warnings;
};

/// One-vs-rest precision/recall/F1 for classes 0..num_classes-1 with macro
/// averages over the classes that occur. A zero denominator scores 0 and
/// records a warning; an absent class is skipped with a warning.
ClassificationReport classification_metrics(std::span<const int> truth, std::span<const int> predicted,
                                            int num_classes);

/// Histogram of ordinal labels over the unique ids in `selected`.
std::vector<std::size_t> class_proportions(std::span<const SampleId> selected, const data::Dataset& dataset);

struct BoxStats {
  std::size_t count = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Linear-interpolation quantile (the "type 7" rule) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);
BoxStats box_stats(std::vector<double> values);

/// Per-class box statistics of posterior variance.
std::vector<BoxStats> uncertainty_by_class(std::span<const bayes::ScorePosterior> posteriors,
                                           const data::Dataset& dataset);

inline constexpr std::int64_t kSecondsPerRelativeLabel = 1;
inline constexpr std::int64_t kSecondsPerAbsoluteLabel = 20;

std::int64_t annotation_cost(std::int64_t relative_pairs, std::int64_t unique_absolute);

/// Continuity-corrected McNemar statistic (|b - c| - 1)^2 / (b + c); 0 when b + c = 0.
double mcnemar_statistic(std::int64_t only_first_correct, std::int64_t only_second_correct);
double mcnemar_statistic(const std::vector<bool>& first_correct, const std::vector<bool>& second_correct);

struct MetricReport {
  std::optional<double> overall_accuracy;
  std::map<std::string, double> neighboring_accuracies;
  std::optional<double> mean_neighboring;
  std::optional<ClassificationReport> classification;
  std::vector<std::size_t> class_proportions;
  std::vector<BoxStats> uncertainty_stats;
  std::int64_t relative_labels = 0;
  std::int64_t absolute_labels = 0;
  std::int64_t cost_seconds = 0;
};

nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const BoxStats& stats);
/// Flat `metric,key,value` rows.
std::string to_csv(const MetricReport& report);

}  // namespace relrank::eval
