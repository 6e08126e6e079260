#include "survrisk/grade_rules.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "survrisk/errors.hpp"

namespace survrisk::riskmodel {

int grade_group_from_patterns(int primary, int secondary) {
  if (primary < 3 || primary > 5 || secondary < 3 || secondary > 5) {
    throw DataError("Gleason patterns must be 3..5, got " + std::to_string(primary) + "+" +
                    std::to_string(secondary));
  }
  const int score = primary + secondary;
  if (score <= 6) return 1;
  if (score == 7) return primary == 3 ? 2 : 3;
  if (score == 8) return 4;
  return 5;
}

int rule_based_gg(double pct_gp3, double pct_gp4, double pct_gp5, const GradeRuleConfig& config) {
  std::array<double, 3> pct{pct_gp3, pct_gp4, pct_gp5};
  double total = 0.0;
  for (double p : pct) {
    if (!std::isfinite(p) || p < 0.0) throw DataError("invalid pattern percentage");
    total += p;
  }
  if (total <= 0.0) throw DataError("undefined grade: no tumor present");
  for (double& p : pct) p = 100.0 * p / total;

  // Pattern order by share, descending; ties favour the higher pattern.
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return pct[a] != pct[b] ? pct[a] > pct[b] : a > b;
  });
  const int primary = order[0];
  int secondary = primary;
  if (pct[order[1]] > 0.0 && pct[order[1]] >= config.secondary_min_pct) {
    secondary = order[1];
  } else if (config.higher_grade_override) {
    for (int k = 2; k > primary; --k) {
      if (pct[k] > 0.0) {
        secondary = k;
        break;
      }
    }
  }
  return grade_group_from_patterns(primary + 3, secondary + 3);
}

}  // namespace survrisk::riskmodel
