#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "survrisk/cohort.hpp"
#include "survrisk/coxph.hpp"
#include "survrisk/grade_rules.hpp"
#include "survrisk/patchagg.hpp"
#include "survrisk/riskmodel.hpp"
#include "survrisk/survstats.hpp"

namespace survrisk::pipeline {

enum class InputSource { CohortFile, Simulation, Patches };
std::string_view to_string(InputSource s);

enum class ReferenceSource { PathologistGrades, Explicit };

// Everything a pipeline run depends on. Populated from a key = value file
// (see README) and/or command-line overrides.
struct RunConfig {
  // Input. Exactly one of cohort_path, simulate, patch_path.
  std::optional<std::string> cohort_path;
  bool simulate = false;
  cohort::SimulationParams simulation;
  std::optional<std::uint64_t> simulation_seed;  // defaults to `seed`
  std::optional<std::string> patch_path;
  std::string slide_manifest_path;
  std::string clinical_path;  // outcomes and grades for patch input
  patchagg::ClassWeights class_weights;
  double tissue_threshold = 0.5;

  // Cohort definition.
  int min_year = cohort::kGradingAdoptionYear;
  int sensitivity_min_year = 1995;
  int temporal_train_end = 2000;
  riskmodel::Outcome outcome = riskmodel::Outcome::DSS;

  // Scoring and discretization.
  riskmodel::Method score_method = riskmodel::Method::Loocv;
  ReferenceSource reference = ReferenceSource::PathologistGrades;
  riskmodel::ReferenceHistogram reference_counts = riskmodel::kDefaultReference;
  riskmodel::GradeRuleConfig grade_rules;
  coxph::Ties ties = coxph::Ties::Efron;
  double fold_ridge = riskmodel::kFoldRidgeFallback;
  double multivariable_ridge = coxph::kDefaultMultivariableRidge;
  coxph::GroupCoding grade_coding = coxph::GroupCoding::Categorical;

  // Inference and reporting.
  std::size_t bootstrap_n = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  survstats::ConfidenceBand band = survstats::ConfidenceBand::LogLog;
  double horizon_years = 10.0;
  bool dump_replicates = false;

  unsigned threads = 1;
  std::string out_dir;

  // Derived: the single configured input source. Throws ConfigError when
  // zero or several are set.
  InputSource source() const;
};

// Sets one key. Relative paths are resolved against base_dir. Unknown keys
// and malformed values raise ConfigError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value,
                   const std::string& base_dir = "");

// Parses "key = value" lines; '#' starts a comment.
RunConfig parse_config(std::string_view text, const std::string& base_dir = "",
                       const std::string& source_name = "<config>");
RunConfig load_config(const std::string& path);

// Checks the input-source rule, value ranges and that input files exist.
void validate(const RunConfig& config);

// Every key in fixed order with its current value, one "key=value" per line.
// Output location and thread count are left out: they do not change results.
std::string canonical_text(const RunConfig& config);

// Keys accepted by apply_setting.
std::vector<std::string> known_keys();

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace survrisk::pipeline
