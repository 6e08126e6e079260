#pragma once

#include <cstdint>
#include <span>

#include "survrisk/types.hpp"

namespace survrisk::concordance {

// Harrell's C for right-censored data. Higher score means earlier expected
// failure.
struct ConcordanceResult {
  double c_index = 0.5;
  std::int64_t n_concordant = 0;
  std::int64_t n_discordant = 0;
  std::int64_t n_tied_score = 0;
  std::int64_t n_comparable = 0;

  bool operator==(const ConcordanceResult&) const = default;
};

// A pair is comparable when the shorter time is an event, or when times tie
// and exactly one member has the event (that member fails first). Score ties
// earn half credit. O(n log n). Throws UndefinedMetricError when no pair is
// comparable and DataError on length mismatch.
ConcordanceResult c_index(std::span<const double> scores, std::span<const double> times,
                          std::span<const EventFlag> events);

// Same pairs, restricted to the subjects listed in `indices` (repeats allowed,
// each repeat counting as a separate subject). Used by bootstrap resampling.
ConcordanceResult c_index(std::span<const double> scores, std::span<const double> times,
                          std::span<const EventFlag> events, std::span<const std::size_t> indices);

}  // namespace survrisk::concordance
