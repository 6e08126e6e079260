#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "survrisk/cohort.hpp"
#include "survrisk/coxph.hpp"
#include "survrisk/grade_rules.hpp"

namespace survrisk::riskmodel {

enum class Method { Loocv, TemporalSplit, RuleBased, InSample };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view s);

enum class Outcome { DSS, OS };

std::string_view to_string(Outcome o);
std::optional<Outcome> parse_outcome(std::string_view s);

struct RiskAssignment {
  std::string case_id;
  double risk_score = 0.0;
  std::optional<int> risk_group;
  Method method = Method::Loocv;

  bool operator==(const RiskAssignment&) const = default;
};

// Cases per Grade Group 1..5.
struct ReferenceHistogram {
  std::array<std::size_t, 5> counts{};

  std::size_t total() const noexcept;
  // Largest-remainder rescaling of the histogram proportions to `n` cases.
  ReferenceHistogram scaled_to(std::size_t n) const;
  // Pathologist Grade Group counts of a cohort. Every case must be graded.
  static ReferenceHistogram from_grades(const cohort::Cohort& cohort);
};

// Grade Group counts of the 1,517-case graded validation set.
inline constexpr ReferenceHistogram kDefaultReference{{608, 473, 224, 127, 85}};

inline constexpr std::size_t kMinLoocvCases = 20;
inline constexpr double kFoldRidgeFallback = 0.02;

struct LoocvOptions {
  Outcome outcome = Outcome::DSS;
  std::size_t min_cases = kMinLoocvCases;
  double fallback_ridge = kFoldRidgeFallback;
  // Folds are independent; the result does not depend on this.
  unsigned n_threads = 1;
  coxph::Ties ties = coxph::Ties::Efron;
};

// Features (pct_gp4, pct_gp5) of every case, one row per case.
Eigen::MatrixXd pattern_features(const cohort::Cohort& cohort);
std::vector<double> outcome_times(const cohort::Cohort& cohort);
EventFlags outcome_events(const cohort::Cohort& cohort, Outcome outcome);

// Cox model on (pct_gp4, pct_gp5), retried with the fallback ridge on
// separation.
coxph::CoxFit fit_pattern_model(const cohort::Cohort& cohort, Outcome outcome,
                                coxph::Ties ties = coxph::Ties::Efron,
                                double fallback_ridge = kFoldRidgeFallback);

// Out-of-fold linear predictor for every case: the model for case i is fit
// on all other cases.
std::vector<RiskAssignment> loocv_risk_scores(const cohort::Cohort& cohort,
                                              const LoocvOptions& options = {});

// Scores from a single fit on the whole cohort (optimistic).
std::vector<RiskAssignment> in_sample_risk_scores(const cohort::Cohort& cohort,
                                                  Outcome outcome = Outcome::DSS);

// Fits on `train` and scores `eval` with the frozen coefficients.
std::vector<RiskAssignment> temporal_split_scores(const cohort::Cohort& train,
                                                  const cohort::Cohort& eval,
                                                  Outcome outcome = Outcome::DSS);

// Rule-based Grade Group of each case's pattern percentages; the group is also
// the score.
std::vector<RiskAssignment> rule_based_assignments(const cohort::Cohort& cohort,
                                                   const GradeRuleConfig& config = {});

// Sorts by (score, case_id) and fills groups 1..5 with exactly the reference
// counts. Throws DataError when the histogram total differs from the input.
std::vector<RiskAssignment> discretize_to_reference(std::vector<RiskAssignment> assignments,
                                                    const ReferenceHistogram& reference);

// (ai_group + pathologist_gg) / 2.
double ensemble_mean(int ai_group, std::optional<int> pathologist_gg);

// Assignment CSV: case_id,method,risk_score,risk_group.
void write_assignments(const std::string& path, std::span<const RiskAssignment> assignments);
std::vector<RiskAssignment> read_assignments(const std::string& path);
const std::vector<std::string>& assignment_csv_columns();

}  // namespace survrisk::riskmodel
