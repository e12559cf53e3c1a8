#include "relrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "relrank/error.hpp"

namespace relrank::eval {

using nlohmann::json;

namespace {

bool correct(const rank::RelativePair& p, std::span<const double> scores) {
  const double a = scores[p.first.index()];
  const double b = scores[p.second.index()];
  return p.label == kFirstMoreSevere ? a > b : b > a;
}

void check_scores(std::span<const rank::RelativePair> pairs, std::span<const double> scores) {
  for (const auto& p : pairs)
    if (p.first.index() >= scores.size() || p.second.index() >= scores.size())
      throw ValidationError("pair refers to a sample without a score");
}

}  // namespace

double pair_accuracy(std::span<const rank::RelativePair> pairs, std::span<const double> scores) {
  check_scores(pairs, scores);
  std::size_t total = 0, hits = 0;
  for (const auto& p : pairs) {
    if (p.label == kEqualSeverity) continue;
    ++total;
    if (correct(p, scores)) ++hits;
  }
  if (total == 0) throw UndefinedMetricError("pair accuracy has no pairs with a strict label");
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<bool> pair_correctness(std::span<const rank::RelativePair> pairs, std::span<const double> scores) {
  check_scores(pairs, scores);
  std::vector<bool> out;
  for (const auto& p : pairs)
    if (p.label != kEqualSeverity) out.push_back(correct(p, scores));
  return out;
}

namespace {

void shuffle(std::vector<SampleId>& v, Engine& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

/// One partner per member of `anchors`, drawn from `partners` minus the
/// anchor itself; unordered duplicates are redrawn a bounded number of times.
std::vector<rank::RelativePair> partner_pairs(const data::Dataset& dataset, std::span<const SampleId> anchors,
                                              std::span<const SampleId> partners, Engine& rng) {
  std::vector<rank::RelativePair> out;
  std::unordered_set<std::uint64_t> seen;
  for (SampleId a : anchors) {
    const std::size_t attempts = std::max<std::size_t>(partners.size(), 1);
    for (std::size_t t = 0; t < attempts; ++t) {
      const SampleId b = partners[uniform_index(rng, partners.size())];
      if (b == a) continue;
      if (!seen.insert(rank::unordered_key(a, b)).second) continue;
      out.push_back({a, b, data::oracle_relative(dataset, a, b)});
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<TestPairSet> build_test_pairs(const data::Dataset& dataset, std::span<const SampleId> ids,
                                          TestPairMode mode, std::uint64_t seed) {
  const int k = dataset.num_classes();
  std::vector<std::vector<SampleId>> by_class(static_cast<std::size_t>(std::max(k, 0)));
  for (SampleId id : ids) {
    const auto label = dataset.label(id);
    if (!label) throw ValidationError("test sample '" + dataset[id].name + "' has no label");
    by_class[static_cast<std::size_t>(*label)].push_back(id);
  }
  for (auto& members : by_class) std::sort(members.begin(), members.end());

  std::vector<TestPairSet> sets;
  if (mode == TestPairMode::overall) {
    Engine rng = make_engine(seed, Stream::test_pairs, {0});
    std::size_t smallest = 0;
    bool any = false;
    for (const auto& members : by_class) {
      if (members.empty()) continue;
      smallest = any ? std::min(smallest, members.size()) : members.size();
      any = true;
    }
    std::vector<SampleId> balanced;
    for (auto members : by_class) {
      if (members.empty()) continue;
      shuffle(members, rng);
      balanced.insert(balanced.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(smallest));
    }
    std::sort(balanced.begin(), balanced.end());
    TestPairSet set{"overall", -1, -1, {}};
    if (balanced.size() >= 2) set.pairs = partner_pairs(dataset, balanced, balanced, rng);
    sets.push_back(std::move(set));
    return sets;
  }

  for (int c = 0; c + 1 < k; ++c) {
    const auto& lower = by_class[static_cast<std::size_t>(c)];
    const auto& upper = by_class[static_cast<std::size_t>(c + 1)];
    const std::string name = std::to_string(c) + "-" + std::to_string(c + 1);
    if (lower.empty() || upper.empty()) {
      spdlog::warn("neighboring test pairs {}: a class is empty, skipping", name);
      continue;
    }
    Engine rng = make_engine(seed, Stream::test_pairs, {1, static_cast<std::uint64_t>(c)});
    TestPairSet set{name, c, c + 1, {}};
    std::vector<rank::RelativePair> a = partner_pairs(dataset, lower, upper, rng);
    std::vector<rank::RelativePair> b = partner_pairs(dataset, upper, lower, rng);
    std::unordered_set<std::uint64_t> seen;
    for (const auto* part : {&a, &b})
      for (const auto& p : *part)
        if (seen.insert(rank::unordered_key(p.first, p.second)).second) set.pairs.push_back(p);
    sets.push_back(std::move(set));
  }
  return sets;
}

int quantize_score(double score, int num_classes) {
  if (!std::isfinite(score)) throw NumericalError("cannot quantize a non-finite score");
  if (num_classes < 1) throw ValidationError("num_classes must be positive");
  const double rounded = std::floor(score + 0.5);
  return static_cast<int>(std::clamp(rounded, 0.0, static_cast<double>(num_classes - 1)));
}

ClassificationReport classification_metrics(std::span<const int> truth, std::span<const int> predicted,
                                            int num_classes) {
  if (truth.size() != predicted.size())
    throw ValidationError("truth and prediction lengths differ (" + std::to_string(truth.size()) + " vs " +
                          std::to_string(predicted.size()) + ")");
  const auto k = static_cast<std::size_t>(std::max(num_classes, 0));
  std::vector<std::size_t> tp(k), fp(k), fn(k), support(k), predicted_count(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw ValidationError("class label outside [0, num_classes)");
    ++support[t];
    ++predicted_count[p];
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }

  ClassificationReport report;
  for (std::size_t c = 0; c < k; ++c) {
    if (support[c] == 0 && predicted_count[c] == 0) {
      report.warnings.push_back("class " + std::to_string(c) + " absent from truth and prediction; skipped");
      continue;
    }
    ClassScores s;
    s.label = static_cast<int>(c);
    s.support = support[c];
    if (tp[c] + fp[c] > 0)
      s.precision = static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]);
    else
      report.warnings.push_back("class " + std::to_string(c) + ": precision undefined, scored 0");
    if (tp[c] + fn[c] > 0)
      s.recall = static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]);
    else
      report.warnings.push_back("class " + std::to_string(c) + ": recall undefined, scored 0");
    if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    report.per_class.push_back(s);
  }
  if (!report.per_class.empty()) {
    for (const auto& s : report.per_class) {
      report.macro_precision += s.precision;
      report.macro_recall += s.recall;
      report.macro_f1 += s.f1;
    }
    const auto n = static_cast<double>(report.per_class.size());
    report.macro_precision /= n;
    report.macro_recall /= n;
    report.macro_f1 /= n;
  }
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  return report;
}

std::vector<std::size_t> class_proportions(std::span<const SampleId> selected, const data::Dataset& dataset) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(dataset.num_classes()), 0);
  std::unordered_set<SampleId> unique;
  for (SampleId id : selected) {
    if (!unique.insert(id).second) continue;
    const auto label = dataset.label(id);
    if (!label) throw ValidationError("selected sample '" + dataset[id].name + "' has no label");
    ++counts[static_cast<std::size_t>(*label)];
  }
  return counts;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.5);
  s.q3 = quantile_sorted(values, 0.75);
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  return s;
}

std::vector<BoxStats> uncertainty_by_class(std::span<const bayes::ScorePosterior> posteriors,
                                           const data::Dataset& dataset) {
  std::vector<std::vector<double>> by_class(static_cast<std::size_t>(dataset.num_classes()));
  for (const auto& p : posteriors) {
    const auto label = dataset.label(p.id);
    if (!label) continue;
    by_class[static_cast<std::size_t>(*label)].push_back(p.variance);
  }
  std::vector<BoxStats> out;
  out.reserve(by_class.size());
  for (auto& values : by_class) out.push_back(box_stats(std::move(values)));
  return out;
}

std::int64_t annotation_cost(std::int64_t relative_pairs, std::int64_t unique_absolute) {
  if (relative_pairs < 0 || unique_absolute < 0) throw ValidationError("label counts must be nonnegative");
  return kSecondsPerRelativeLabel * relative_pairs + kSecondsPerAbsoluteLabel * unique_absolute;
}

double mcnemar_statistic(std::int64_t only_first_correct, std::int64_t only_second_correct) {
  if (only_first_correct < 0 || only_second_correct < 0) throw ValidationError("counts must be nonnegative");
  const std::int64_t total = only_first_correct + only_second_correct;
  if (total == 0) return 0.0;
  const double diff = std::abs(static_cast<double>(only_first_correct - only_second_correct)) - 1.0;
  return diff * diff / static_cast<double>(total);
}

double mcnemar_statistic(const std::vector<bool>& first_correct, const std::vector<bool>& second_correct) {
  if (first_correct.size() != second_correct.size()) throw ValidationError("correctness vectors differ in length");
  std::int64_t b = 0, c = 0;
  for (std::size_t i = 0; i < first_correct.size(); ++i) {
    if (first_correct[i] && !second_correct[i]) ++b;
    if (!first_correct[i] && second_correct[i]) ++c;
  }
  return mcnemar_statistic(b, c);
}

json to_json(const BoxStats& s) {
  return {{"count", s.count}, {"min", s.min},       {"q1", s.q1}, {"median", s.median},
          {"q3", s.q3},       {"max", s.max},       {"mean", s.mean}};
}

json to_json(const MetricReport& r) {
  json j;
  j["overall_accuracy"] = r.overall_accuracy ? json(*r.overall_accuracy) : json(nullptr);
  j["neighboring_accuracies"] = r.neighboring_accuracies;
  j["mean_neighboring"] = r.mean_neighboring ? json(*r.mean_neighboring) : json(nullptr);
  if (r.classification) {
    json per_class = json::array();
    for (const auto& s : r.classification->per_class)
      per_class.push_back({{"class", s.label},
                           {"precision", s.precision},
                           {"recall", s.recall},
                           {"f1", s.f1},
                           {"support", s.support}});
    j["classification"] = {{"per_class", per_class},
                           {"macro_precision", r.classification->macro_precision},
                           {"macro_recall", r.classification->macro_recall},
                           {"macro_f1", r.classification->macro_f1},
                           {"warnings", r.classification->warnings}};
  } else {
    j["classification"] = nullptr;
  }
  j["class_proportions"] = r.class_proportions;
  json stats = json::array();
  for (const auto& s : r.uncertainty_stats) stats.push_back(to_json(s));
  j["uncertainty_stats"] = stats;
  j["relative_labels"] = r.relative_labels;
  j["absolute_labels"] = r.absolute_labels;
  j["cost_seconds"] = r.cost_seconds;
  return j;
}

std::string to_csv(const MetricReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,key,value\n";
  if (r.overall_accuracy) out << "overall_accuracy,," << *r.overall_accuracy << '\n';
  for (const auto& [name, acc] : r.neighboring_accuracies) out << "neighboring_accuracy," << name << ',' << acc << '\n';
  if (r.mean_neighboring) out << "mean_neighboring,," << *r.mean_neighboring << '\n';
  if (r.classification) {
    for (const auto& s : r.classification->per_class) {
      out << "precision," << s.label << ',' << s.precision << '\n';
      out << "recall," << s.label << ',' << s.recall << '\n';
      out << "f1," << s.label << ',' << s.f1 << '\n';
    }
    out << "precision,macro," << r.classification->macro_precision << '\n';
    out << "recall,macro," << r.classification->macro_recall << '\n';
    out << "f1,macro," << r.classification->macro_f1 << '\n';
  }
  for (std::size_t c = 0; c < r.class_proportions.size(); ++c)
    out << "class_count," << c << ',' << r.class_proportions[c] << '\n';
  for (std::size_t c = 0; c < r.uncertainty_stats.size(); ++c) {
    const auto& s = r.uncertainty_stats[c];
    out << "uncertainty_min," << c << ',' << s.min << '\n';
    out << "uncertainty_q1," << c << ',' << s.q1 << '\n';
    out << "uncertainty_median," << c << ',' << s.median << '\n';
    out << "uncertainty_q3," << c << ',' << s.q3 << '\n';
    out << "uncertainty_max," << c << ',' << s.max << '\n';
  }
  out << "relative_labels,," << r.relative_labels << '\n';
  out << "absolute_labels,," << r.absolute_labels << '\n';
  out << "cost_seconds,," << r.cost_seconds << '\n';
  return out.str();
}

}  // namespace relrank::eval
