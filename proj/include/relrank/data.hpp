#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "relrank/rng.hpp"
#include "relrank/types.hpp"

namespace relrank::data {

struct Sample {
  std::string name;  // external token, unique within a dataset
  std::vector<double> features;
  std::optional<int> label;  // ordinal class, 0 = least severe
  std::string group;         // samples sharing a group never cross splits
};

class Dataset {
 public:
  Dataset() = default;
  /// Validates uniform feature dimension, unique names and nonnegative labels.
  explicit Dataset(std::vector<Sample> samples);

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  /// One past the largest label present (0 when nothing is labeled).
  int num_classes() const noexcept { return num_classes_; }
  bool fully_labeled() const noexcept;

  const Sample& operator[](SampleId id) const { return samples_.at(id.index()); }
  std::span<const double> features(SampleId id) const { return samples_.at(id.index()).features; }
  std::optional<int> label(SampleId id) const { return samples_.at(id.index()).label; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }

  std::optional<SampleId> find(const std::string& name) const;
  std::vector<SampleId> all_ids() const;

 private:
  std::vector<Sample> samples_;
  std::size_t feature_dim_ = 0;
  int num_classes_ = 0;
  std::unordered_map<std::string, SampleId> by_name_;
};

/// Reads JSON-lines records `{"id", "features", "label"?, "group"?}`.
/// A missing group defaults to the sample's own id.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(std::istream& in);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct SynthConfig {
  int num_classes = 4;
  std::vector<double> class_proportions{0.65, 0.19, 0.14, 0.02};
  std::size_t n = 5000;
  std::size_t feature_dim = 16;
  std::size_t informative_dims = 4;
  double noise_scale = 0.5;
  std::size_t group_size = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Imbalanced ordinal data: class c ~ proportions, latent severity
/// z ~ U[c, c+1), informative coordinates w*z + N(0, noise_scale^2),
/// remaining coordinates are class-independent N(0, 1) distractors.
Dataset synth_generate(const SynthConfig& config);

/// Latent severity of each synthetic sample, in dataset order. Regenerated
/// from the config; used only by tests and diagnostics.
std::vector<double> synth_latent(const SynthConfig& config);

struct Split {
  std::vector<SampleId> train;
  std::vector<SampleId> validation;
  std::vector<SampleId> test;
};

Split split_groupwise(const Dataset& dataset, std::array<double, 3> fractions, std::uint64_t seed);

/// C from ordinal labels: 1 if first > second, 0.5 if equal, 0 otherwise.
double oracle_relative(const Dataset& dataset, SampleId first, SampleId second);

/// Simulated relative annotator. With flip_probability > 0 the strict
/// judgments are inverted at random; equal judgments stay equal.
class RelativeOracle {
 public:
  explicit RelativeOracle(const Dataset& dataset, double flip_probability = 0.0, std::uint64_t seed = 0);
  double operator()(SampleId first, SampleId second) const;

 private:
  const Dataset* dataset_;
  double flip_probability_;
  std::uint64_t seed_;
};

/// Absolute annotator with per-image cost accounting: every unique image
/// is paid for once, repeated queries are cache hits.
class AbsoluteOracle {
 public:
  explicit AbsoluteOracle(const Dataset& dataset) : dataset_(&dataset) {}

  struct Answer {
    int label;
    bool cache_hit;
  };
  Answer query(SampleId id);
  int operator()(SampleId id) { return query(id).label; }

  std::size_t unique_queries() const noexcept { return seen_.size(); }
  std::size_t total_queries() const noexcept { return total_; }

 private:
  const Dataset* dataset_;
  std::unordered_set<SampleId> seen_;
  std::size_t total_ = 0;
};

}  // namespace relrank::data
