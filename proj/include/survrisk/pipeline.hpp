#pragma once

#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "survrisk/cohort.hpp"
#include "survrisk/riskmodel.hpp"
#include "survrisk/run_config.hpp"
#include "survrisk/survstats.hpp"

namespace survrisk::pipeline {

inline constexpr std::string_view kVersion = "1.0.0";

// A C-index with its bootstrap interval, or an explicit not-available record.
struct CIndexCell {
  std::string analysis;  // e.g. "table2", "years_1995"
  std::string row;       // what is scored
  std::string validation_set;
  std::size_t n = 0;
  std::optional<double> c_index, ci_lower, ci_upper;
  std::string note;  // reason when c_index is empty
};

struct DifferenceCell {
  std::string comparison;  // "<a> - <b>"
  std::string validation_set;
  std::size_t n = 0;
  double difference = 0.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  std::size_t n_effective = 0;
};

struct HazardRow {
  std::string validation_set;
  std::string variable;
  std::string level;
  std::optional<double> hr, ci_lower, ci_upper, p_value;
  double scale = 1.0;
  std::string note;
};

enum class Direction { All, Lower, Same, Higher };
std::string_view to_string(Direction d);

struct DiscordanceCell {
  int grade_group = 0;
  Direction direction = Direction::All;
  std::size_t n = 0;
  std::optional<double> estimate, ci_lower, ci_upper;
  std::string note;
};

struct LogRankRow {
  std::string analysis;
  std::string stratum;
  std::string groups;  // labels of the compared curves, ';'-separated
  std::size_t n = 0;
  std::optional<double> chi2, p_value;
  std::size_t df = 0;
  std::string note;
};

struct KmStratum {
  std::string name;  // file stem under km/
  std::string analysis;
  std::string stratum;
  std::string group;
  survstats::SurvivalCurve curve;
};

struct ReportBundle {
  std::vector<CIndexCell> table2;
  std::vector<DifferenceCell> table2_differences;
  std::vector<HazardRow> hr_univariable;
  std::vector<HazardRow> hr_per_pattern;
  std::vector<DiscordanceCell> discordance10y;
  std::vector<KmStratum> km_curves;
  std::vector<LogRankRow> logrank;
  std::vector<CIndexCell> sensitivity_years;
  std::vector<CIndexCell> sensitivity_discretization;
  std::vector<CIndexCell> multivariable;
  nlohmann::json manifest;
  std::string out_dir;
};

// Per (grade group, direction of AI group vs grade group) Kaplan-Meier
// estimate at `horizon`, including an "all" row per grade group. Impossible
// or empty cells carry a note instead of an estimate.
std::vector<DiscordanceCell> discordance_survival(std::span<const int> ai_groups,
                                                  std::span<const int> grade_groups,
                                                  std::span<const double> times,
                                                  std::span<const EventFlag> events,
                                                  double horizon = 10.0, double alpha = 0.05,
                                                  survstats::ConfidenceBand band =
                                                      survstats::ConfidenceBand::LogLog);

// Kaplan-Meier curves per (stratum, group) and one log-rank test per stratum.
// A stratum with fewer than two nonempty groups records why no test was run.
struct Substratification {
  std::vector<KmStratum> curves;
  std::vector<LogRankRow> tests;
};
Substratification substratify_km(const std::string& analysis, std::span<const std::string> strata,
                                 std::span<const std::string> groups, std::span<const double> times,
                                 std::span<const EventFlag> events, double alpha = 0.05,
                                 survstats::ConfidenceBand band = survstats::ConfidenceBand::LogLog);

// Header of every CSV file in a bundle, keyed by path relative to the bundle
// root. KM curve files share survstats::curve_csv_columns().
const std::map<std::string, std::vector<std::string>>& bundle_schema();

// Checks that every section exists and every CSV carries its documented
// header; returns the problems found (empty when valid).
std::vector<std::string> validate_bundle(const std::string& dir);

struct InputData {
  cohort::Cohort cohort;  // before exclusions
  std::vector<cohort::RowError> rejected_rows;
  // Path of the primary input file, empty for simulation.
  std::string path;
};

// Loads, aggregates or simulates the cohort named by the config. Patch input
// replaces the pattern percentages of the clinical cohort file with the
// aggregated ones; every clinical case needs at least one slide.
InputData load_input(const RunConfig& config);

// Runs every analysis and writes the bundle to config.out_dir. Output is
// staged in "<out_dir>.partial" and moved into place only on success. Errors
// keep their kind and gain the name of the failing stage.
ReportBundle run_pipeline(const RunConfig& config);

}  // namespace survrisk::pipeline
