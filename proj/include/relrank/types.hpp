#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace relrank {

/// Position of a sample inside its Dataset. Ordering on SampleId is the
/// dataset order, which is what every tie-break rule in the library uses.
struct SampleId {
  std::uint32_t value = 0;

  constexpr SampleId() = default;
  constexpr explicit SampleId(std::uint32_t v) : value(v) {}
  constexpr explicit SampleId(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}

  constexpr std::size_t index() const noexcept { return value; }
  friend constexpr auto operator<=>(SampleId, SampleId) = default;
};

/// Relative label: 1 means the first sample is more severe, 0.5 equal,
/// 0 the second sample is more severe.
inline constexpr double kFirstMoreSevere = 1.0;
inline constexpr double kEqualSeverity = 0.5;
inline constexpr double kSecondMoreSevere = 0.0;

constexpr bool is_legal_label(double c) noexcept {
  return c == kFirstMoreSevere || c == kEqualSeverity || c == kSecondMoreSevere;
}

}  // namespace relrank

template <>
struct std::hash<relrank::SampleId> {
  std::size_t operator()(relrank::SampleId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
