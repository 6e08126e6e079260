#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace survrisk::cohort {

enum class TCategory { T2, T3, T4 };

std::string_view to_string(TCategory t);
std::optional<TCategory> parse_t_category(std::string_view s);

// One prostatectomy case. Pattern percentages are shares of tumor patches
// and sum to 100 whenever tumor_present is set.
struct Case {
  std::string case_id;
  int surgery_year = 0;
  double pct_gp3 = 0.0;
  double pct_gp4 = 0.0;
  double pct_gp5 = 0.0;
  bool tumor_present = true;
  std::optional<int> pathologist_gg;
  std::optional<TCategory> t_category;
  double followup_years = 0.0;
  bool dss_event = false;
  std::optional<bool> os_event;

  bool operator==(const Case&) const = default;

  // T3 or T4. Empty when the stage is unknown.
  std::optional<bool> t_stage_high() const;
};

inline constexpr double kPatternSumTolerance = 1e-6;

// First violated invariant, or nullopt for a valid case.
std::optional<std::string> validate_case(const Case& c);

struct Exclusion {
  std::string case_id;
  std::string reason;
  bool operator==(const Exclusion&) const = default;
};

// Ordered, immutable collection of cases. Construction sorts by case_id and
// rejects duplicate ids.
class Cohort {
 public:
  Cohort() = default;
  Cohort(std::vector<Case> cases, std::string label, std::vector<Exclusion> exclusion_log = {});

  const std::vector<Case>& cases() const noexcept { return cases_; }
  const std::string& label() const noexcept { return label_; }
  const std::vector<Exclusion>& exclusion_log() const noexcept { return exclusion_log_; }
  std::size_t size() const noexcept { return cases_.size(); }
  bool empty() const noexcept { return cases_.empty(); }
  const Case& operator[](std::size_t i) const { return cases_[i]; }

  // Index of the case with this id, or nullopt.
  std::optional<std::size_t> find(std::string_view case_id) const;

  bool operator==(const Cohort&) const = default;

 private:
  std::vector<Case> cases_;
  std::string label_;
  std::vector<Exclusion> exclusion_log_;
};

inline constexpr std::string_view kSchemaVersion = "1";

// Cohort CSV columns, in file order.
const std::vector<std::string>& csv_columns();

struct RowError {
  std::size_t line = 0;
  std::string case_id;
  std::string reason;
};

struct LoadResult {
  Cohort cohort;
  std::vector<RowError> row_errors;
};

// Reads a cohort CSV plus its optional "<path>.json" sidecar (label and
// exclusion log). Malformed rows are collected in row_errors; the load fails
// only on schema errors, duplicate ids, or when every row is malformed.
LoadResult load_cohort(const std::string& path, std::string_view schema_version = kSchemaVersion);

// Writes the CSV and its JSON sidecar.
void write_cohort(const std::string& path, const Cohort& cohort);

inline constexpr double kEarlyDeathYears = 30.0 / 365.25;

inline constexpr std::string_view kReasonEarlyDeath = "death within 30 days";
inline constexpr std::string_view kReasonNoTumor = "no tumor";

// Drops deaths within 30 days of surgery and cases without tumor.
Cohort apply_exclusions(const Cohort& cohort);

enum class ValidationSet { V1, V2 };

inline constexpr int kGradingAdoptionYear = 2000;

// V1 is the whole cohort. V2 keeps graded cases operated on or after min_year.
Cohort select_validation_set(const Cohort& cohort, ValidationSet which,
                             int min_year = kGradingAdoptionYear);

// Parameters for the synthetic cohort generator. Defaults reproduce the
// scale and event rate of a 2,807-case prostatectomy series.
struct SimulationParams {
  std::size_t n_cases = 2807;
  // Latent grade mixture over groups 1..5.
  std::array<double, 5> gg_mixture{611.0 / 1524, 476.0 / 1524, 224.0 / 1524, 128.0 / 1524,
                                   85.0 / 1524};
  // Dirichlet concentration over (GP3, GP4, GP5) for each latent group.
  // Group means run from 85/10/5 to 30/42/28 at total concentration 20.
  std::array<std::array<double, 3>, 5> dirichlet_alphas{{
      {17.0, 2.0, 1.0},
      {14.0, 4.4, 1.6},
      {11.0, 6.6, 2.4},
      {8.4, 8.4, 3.2},
      {6.0, 8.4, 5.6},
  }};
  double beta_gp4 = 0.039204208777602;  // ln(1.48) / 10
  double beta_gp5 = 0.041210965082683;  // ln(1.51) / 10
  double baseline_hazard = 0.00085;  // ~4.8% disease-specific deaths
  double censor_min_years = 5.0;
  double censor_max_years = 25.0;
  // Other-cause mortality; censors DSS and feeds os_event. 0 disables.
  double other_cause_hazard = 0.02;
  // Log-hazard shift for T3/T4 cases.
  double beta_t_high = 0.0;
  // Probability of T3/T4 per latent group, and of unknown stage.
  std::array<double, 5> p_t_high{0.15, 0.25, 0.4, 0.55, 0.7};
  double p_t4_given_high = 0.03;
  double p_t_unknown = 0.125;
  int year_min = 1995;
  int year_max = 2014;
  // Probability that a pathologist grade was recorded.
  double p_graded_from_adoption = 0.72;
  double p_graded_before_adoption = 0.01;
  int grading_adoption_year = kGradingAdoptionYear;
  // Gaussian noise (percentage points) added to each pattern before the
  // rule-based grade is taken; emulates inter-observer variability.
  double grade_noise_sd = 10.0;
  std::uint64_t seed = 1;
  std::string label = "synthetic";
};

// Throws ConfigError naming the first invalid field.
void validate(const SimulationParams& params);

// Deterministic given params.seed.
Cohort simulate_cohort(const SimulationParams& params);

}  // namespace survrisk::cohort
