#pragma once

namespace survrisk::riskmodel {

// Thresholds of the pattern-percentage to Grade Group mapping used on
// resection specimens.
struct GradeRuleConfig {
  // Minimum share (percent of tumor) for the second most common pattern to
  // count as the secondary pattern.
  double secondary_min_pct = 5.0;
  // When no pattern qualifies as secondary, a higher-grade pattern present
  // at any share (> 0) replaces it.
  bool higher_grade_override = true;
};

// Gleason score (primary + secondary pattern) to Grade Group 1..5.
int grade_group_from_patterns(int primary, int secondary);

// Grade Group from case-level pattern percentages. Inputs are normalized to
// sum to 100 first, so any common positive scale is accepted. Percentage ties
// resolve toward the higher pattern. Throws DataError when no tumor is present.
int rule_based_gg(double pct_gp3, double pct_gp4, double pct_gp5, const GradeRuleConfig& config = {});

}  // namespace survrisk::riskmodel
