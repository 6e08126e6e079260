#pragma once

#include <span>
#include <string>
#include <vector>

#include "survrisk/types.hpp"

namespace survrisk::survstats {

enum class ConfidenceBand {
  // Exponential Greenwood: symmetric on log(-log S).
  LogLog,
  // Plain Greenwood on S, clipped to [0, 1].
  Linear,
};

// Product-limit estimate with one row per distinct observed time (event or
// censoring). Rows after the curve reaches zero are kept.
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> n_events;
  std::vector<std::size_t> n_censored;
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  double alpha = 0.05;

  std::size_t size() const noexcept { return times.size(); }
};

// Throws DataError on empty or mismatched input or non-positive times.
SurvivalCurve kaplan_meier(std::span<const double> times, std::span<const EventFlag> events,
                           double alpha = 0.05, ConfidenceBand band = ConfidenceBand::LogLog);

struct SurvivalEstimate {
  double estimate;
  double ci_lower;
  double ci_upper;
};

// Right-continuous step evaluation. Before the first event the estimate is
// exactly (1, 1, 1).
SurvivalEstimate survival_at(const SurvivalCurve& curve, double horizon);

// Writes time,at_risk,n_events,survival,ci_lower,ci_upper.
void write_curve_csv(const std::string& path, const SurvivalCurve& curve);

const std::vector<std::string>& curve_csv_columns();

struct LogRankResult {
  double chi2 = 0.0;
  std::size_t df = 0;
  double p_value = 1.0;
  std::vector<double> observed;
  std::vector<double> expected;
};

// k-sample log-rank test. Throws DataError for fewer than two groups or an
// empty group, UndefinedMetricError when no group has an event.
LogRankResult logrank(const std::vector<std::vector<double>>& group_times,
                      const std::vector<EventFlags>& group_events);

}  // namespace survrisk::survstats
