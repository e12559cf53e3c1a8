#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "relrank/types.hpp"

namespace relrank::rank {

struct RelativePair {
  SampleId first;
  SampleId second;
  double label = kEqualSeverity;
  friend bool operator==(const RelativePair&, const RelativePair&) = default;
};

/// Key of the unordered pair {a, b}.
constexpr std::uint64_t unordered_key(SampleId a, SampleId b) noexcept {
  const auto lo = std::min(a.value, b.value);
  const auto hi = std::max(a.value, b.value);
  return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

/// Labeled pairs in commit order, each tagged with the round that produced it.
/// Rejects self-pairs, illegal labels and unordered duplicates.
class LabeledPairSet {
 public:
  /// Returns false (and stores nothing) if the unordered pair is already present.
  bool add(const RelativePair& pair, int round);
  bool contains(SampleId a, SampleId b) const { return keys_.contains(unordered_key(a, b)); }

  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const std::vector<RelativePair>& pairs() const noexcept { return pairs_; }
  const std::vector<int>& rounds() const noexcept { return rounds_; }
  const std::unordered_set<std::uint64_t>& keys() const noexcept { return keys_; }

  friend bool operator==(const LabeledPairSet& a, const LabeledPairSet& b) {
    return a.pairs_ == b.pairs_ && a.rounds_ == b.rounds_;
  }

 private:
  std::vector<RelativePair> pairs_;
  std::vector<int> rounds_;
  std::unordered_set<std::uint64_t> keys_;
};

void validate_label(double c);

}  // namespace relrank::rank
