#include "survrisk/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "survrisk/concordance.hpp"
#include "survrisk/coxph.hpp"
#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"
#include "survrisk/inference.hpp"
#include "survrisk/patchagg.hpp"

namespace survrisk::pipeline {

namespace fs = std::filesystem;
using cohort::Cohort;
using riskmodel::RiskAssignment;

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::All:
      return "all";
    case Direction::Lower:
      return "lower";
    case Direction::Same:
      return "same";
    case Direction::Higher:
      return "higher";
  }
  return "?";
}

namespace {

const std::vector<std::string> kCIndexColumns{"analysis", "row",      "validation_set", "n",
                                              "c_index",  "ci_lower", "ci_upper",       "note"};
const std::vector<std::string> kHazardColumns{"validation_set", "variable", "level",
                                              "scale",          "hr",       "ci_lower",
                                              "ci_upper",       "p_value",  "note"};

std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : ""; }
std::string num(double v) { return csv::format_double(v); }

[[noreturn]] void rethrow_in_stage(const std::string& stage, const std::string& what, ErrorKind kind) {
  const std::string msg = "stage '" + stage + "': " + what;
  switch (kind) {
    case ErrorKind::Config:
      throw ConfigError(msg);
    case ErrorKind::Data:
      throw DataError(msg);
    case ErrorKind::Numeric:
      throw NumericError(msg);
  }
  throw NumericError(msg);
}

template <typename F>
auto in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_in_stage(stage, e.what(), e.kind());
  } catch (const fs::filesystem_error& e) {
    rethrow_in_stage(stage, e.what(), ErrorKind::Data);
  }
}

// Writes CSV files below the staging root and remembers their names.
class BundleWriter {
 public:
  explicit BundleWriter(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  void csv(const std::string& rel, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out = open(rel);
    csv::write_row(out, header);
    for (const auto& r : rows) csv::write_row(out, r);
    finish(out, rel);
  }

  void text(const std::string& rel, const std::string& body) {
    std::ofstream out = open(rel);
    out << body;
    finish(out, rel);
  }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }
  void record(const std::string& rel) { files_.insert(rel); }
  const std::set<std::string>& files() const { return files_; }

 private:
  std::ofstream open(const std::string& rel) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
  }
  void finish(std::ofstream& out, const std::string& rel) {
    out.close();
    if (!out) throw DataError("failed writing " + (root_ / rel).string());
    files_.insert(rel);
  }

  fs::path root_;
  std::set<std::string> files_;
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Outcome vectors and per-case labels of one validation set.
struct Subset {
  std::string name;
  Cohort cohort;
  std::vector<double> times;
  EventFlags events;

  Subset(std::string n, Cohort c, riskmodel::Outcome outcome)
      : name(std::move(n)),
        cohort(std::move(c)),
        times(riskmodel::outcome_times(cohort)),
        events(riskmodel::outcome_events(cohort, outcome)) {}

  std::size_t size() const { return cohort.size(); }

  bool fully_graded() const {
    return std::all_of(cohort.cases().begin(), cohort.cases().end(),
                       [](const cohort::Case& c) { return c.pathologist_gg.has_value(); });
  }
  std::vector<int> grades() const {
    std::vector<int> g;
    for (const auto& c : cohort.cases()) g.push_back(c.pathologist_gg.value());
    return g;
  }
  // Scores of this subset's cases looked up by case id.
  std::vector<RiskAssignment> pick(const std::vector<RiskAssignment>& from) const {
    std::map<std::string, const RiskAssignment*> by_id;
    for (const auto& a : from) by_id[a.case_id] = &a;
    std::vector<RiskAssignment> out;
    for (const auto& c : cohort.cases()) {
      const auto it = by_id.find(c.case_id);
      if (it == by_id.end()) throw DataError("no risk score for case '" + c.case_id + "'");
      out.push_back(*it->second);
    }
    return out;
  }
};

std::vector<double> scores_of(const std::vector<RiskAssignment>& a) {
  std::vector<double> s;
  for (const auto& r : a) s.push_back(r.risk_score);
  return s;
}

std::vector<int> groups_of(const std::vector<RiskAssignment>& a) {
  std::vector<int> g;
  for (const auto& r : a) g.push_back(r.risk_group.value());
  return g;
}

template <typename T>
std::vector<double> as_double(const std::vector<T>& v) {
  return std::vector<double>(v.begin(), v.end());
}

std::string slug(std::string s) {
  for (char& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
  }
  return s;
}

class Analyzer {
 public:
  Analyzer(const RunConfig& config, BundleWriter& writer) : cfg_(config), out_(writer) {}

  inference::BootstrapOptions boot() const {
    inference::BootstrapOptions o;
    o.n_resamples = cfg_.bootstrap_n;
    o.alpha = cfg_.alpha;
    o.seed = cfg_.seed;
    o.n_threads = cfg_.threads;
    return o;
  }

  inference::Metric c_metric(const std::vector<double>& score, const Subset& s) const {
    return [&score, &s](std::span<const std::size_t> idx) -> std::optional<double> {
      return concordance::c_index(score, s.times, s.events, idx).c_index;
    };
  }

  CIndexCell c_cell(const std::string& analysis, const std::string& row, const Subset& s,
                    const std::vector<double>& score) {
    CIndexCell cell{analysis, row, s.name, s.size(), {}, {}, {}, ""};
    try {
      const auto r = inference::bootstrap_ci(c_metric(score, s), s.size(), boot());
      cell.c_index = r.point_estimate;
      cell.ci_lower = r.ci_lower;
      cell.ci_upper = r.ci_upper;
      dump(analysis + "__" + row + "__" + s.name, r);
    } catch (const NumericError& e) {
      cell.note = e.what();
    }
    return cell;
  }

  static CIndexCell na(const std::string& analysis, const std::string& row, const std::string& vs,
                       std::size_t n, std::string note) {
    return {analysis, row, vs, n, {}, {}, {}, std::move(note)};
  }

  DifferenceCell diff_cell(const std::string& a_name, const std::vector<double>& a,
                           const std::string& b_name, const std::vector<double>& b,
                           const Subset& s) {
    const auto r = inference::bootstrap_diff_ci(c_metric(a, s), c_metric(b, s), s.size(), boot());
    dump("difference__" + a_name + "_minus_" + b_name + "__" + s.name, r);
    return {a_name + " - " + b_name, s.name, s.size(), r.point_estimate, r.ci_lower, r.ci_upper,
            r.n_effective};
  }

  void dump(const std::string& name, const inference::BootstrapResult& r) {
    if (!cfg_.dump_replicates) return;
    const std::string rel = "bootstrap/" + slug(name) + ".csv";
    fs::create_directories(out_.root() / "bootstrap");
    inference::write_replicates_csv(out_.path(rel), r);
    out_.record(rel);
  }

  std::vector<HazardRow> group_hazards(const Subset& s, const std::string& variable,
                                       const std::vector<int>& groups) const {
    std::vector<HazardRow> rows;
    coxph::CoxOptions opt;
    opt.ties = cfg_.ties;
    std::string note;
    std::vector<coxph::HazardRatio> hr;
    try {
      hr = coxph::fit_univariable_groups(groups, s.times, s.events, 1, opt);
    } catch (const coxph::SeparationError&) {
      opt.ridge = cfg_.fold_ridge;
      note = "ridge " + num(cfg_.fold_ridge) + " after separation";
      hr = coxph::fit_univariable_groups(groups, s.times, s.events, 1, opt);
    }
    rows.push_back({s.name, variable, "1", 1.0, {}, {}, {}, 1.0, "reference"});
    std::set<int> present(groups.begin(), groups.end());
    std::size_t k = 0;
    for (int level = 2; level <= 5; ++level) {
      if (!present.count(level)) {
        rows.push_back({s.name, variable, std::to_string(level), {}, {}, {}, {}, 1.0, "no cases"});
        continue;
      }
      const auto& h = hr.at(k++);
      rows.push_back({s.name, variable, std::to_string(level), h.hr, h.ci_lower, h.ci_upper,
                      h.p_value, 1.0, note});
    }
    return rows;
  }

 private:
  const RunConfig& cfg_;
  BundleWriter& out_;
};

std::vector<std::vector<std::string>> c_rows(const std::vector<CIndexCell>& cells) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : cells) {
    rows.push_back({c.analysis, c.row, c.validation_set, std::to_string(c.n), opt(c.c_index),
                    opt(c.ci_lower), opt(c.ci_upper), c.note});
  }
  return rows;
}

std::vector<std::vector<std::string>> hazard_rows(const std::vector<HazardRow>& hs) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& h : hs) {
    rows.push_back({h.validation_set, h.variable, h.level, num(h.scale), opt(h.hr),
                    opt(h.ci_lower), opt(h.ci_upper), opt(h.p_value), h.note});
  }
  return rows;
}

// The reference histogram used for a set of n cases.
riskmodel::ReferenceHistogram reference_for(const RunConfig& cfg, const Subset& v2, std::size_t n) {
  const riskmodel::ReferenceHistogram base =
      cfg.reference == ReferenceSource::PathologistGrades
          ? riskmodel::ReferenceHistogram::from_grades(v2.cohort)
          : cfg.reference_counts;
  return base.total() == n ? base : base.scaled_to(n);
}

}  // namespace

const std::map<std::string, std::vector<std::string>>& bundle_schema() {
  static const std::map<std::string, std::vector<std::string>> schema = [] {
    std::map<std::string, std::vector<std::string>> m;
    m["exclusions.csv"] = {"case_id", "reason"};
    for (const char* f : {"assignments_v1.csv", "assignments_v2.csv", "assignments_rule_based_v1.csv",
                          "assignments_rule_based_v2.csv", "assignments_temporal_v2.csv"}) {
      m[f] = riskmodel::assignment_csv_columns();
    }
    m["table2.csv"] = kCIndexColumns;
    m["table2_differences.csv"] = {"comparison", "validation_set", "n",          "difference",
                                   "ci_lower",   "ci_upper",       "n_effective"};
    m["hr_univariable.csv"] = kHazardColumns;
    m["hr_per_pattern.csv"] = kHazardColumns;
    m["discordance10y.csv"] = {"grade_group", "direction", "n",       "horizon_years",
                               "estimate",    "ci_lower",  "ci_upper", "note"};
    m["km/index.csv"] = {"name", "analysis", "stratum", "group", "n", "n_events", "file"};
    m["logrank.csv"] = {"analysis", "stratum", "groups", "n", "chi2", "df", "p_value", "note"};
    m["sensitivity_years.csv"] = kCIndexColumns;
    m["sensitivity_discretization.csv"] = kCIndexColumns;
    m["multivariable.csv"] = kCIndexColumns;
    return m;
  }();
  return schema;
}

std::vector<std::string> validate_bundle(const std::string& dir) {
  std::vector<std::string> problems;
  const fs::path root(dir);
  auto check_header = [&](const fs::path& p, const std::vector<std::string>& want) {
    if (!fs::is_regular_file(p)) {
      problems.push_back("missing " + p.string());
      return;
    }
    std::ifstream in(p, std::ios::binary);
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (csv::split_line(line) != want) problems.push_back("unexpected header in " + p.string());
  };
  for (const auto& [rel, cols] : bundle_schema()) check_header(root / rel, cols);
  for (const char* f : {"manifest.json", "cox_fits.json"}) {
    if (!fs::is_regular_file(root / f)) {
      problems.push_back(std::string("missing ") + f);
      continue;
    }
    if (!nlohmann::json::accept(read_bytes(root / f))) problems.push_back(std::string("malformed ") + f);
  }
  if (fs::is_regular_file(root / "km/index.csv")) {
    const auto idx = csv::read_file((root / "km/index.csv").string());
    const int file_col = idx.column("file");
    if (idx.rows.empty()) problems.push_back("km/index.csv lists no curves");
    for (const auto& r : idx.rows) {
      check_header(root / r.at(static_cast<std::size_t>(file_col)), survstats::curve_csv_columns());
    }
  }
  return problems;
}

std::vector<DiscordanceCell> discordance_survival(std::span<const int> ai_groups,
                                                  std::span<const int> grade_groups,
                                                  std::span<const double> times,
                                                  std::span<const EventFlag> events, double horizon,
                                                  double alpha, survstats::ConfidenceBand band) {
  const std::size_t n = ai_groups.size();
  if (grade_groups.size() != n || times.size() != n || events.size() != n) {
    throw DataError("discordance inputs differ in length");
  }
  std::vector<DiscordanceCell> cells;
  for (int gg = 1; gg <= 5; ++gg) {
    for (Direction d : {Direction::All, Direction::Lower, Direction::Same, Direction::Higher}) {
      DiscordanceCell cell;
      cell.grade_group = gg;
      cell.direction = d;
      if ((gg == 1 && d == Direction::Lower) || (gg == 5 && d == Direction::Higher)) {
        cell.note = "not possible for grade group " + std::to_string(gg);
        cells.push_back(cell);
        continue;
      }
      std::vector<double> t;
      EventFlags e;
      for (std::size_t i = 0; i < n; ++i) {
        if (grade_groups[i] != gg) continue;
        const int diff = ai_groups[i] - gg;
        const bool keep = d == Direction::All || (d == Direction::Lower && diff < 0) ||
                          (d == Direction::Same && diff == 0) || (d == Direction::Higher && diff > 0);
        if (keep) t.push_back(times[i]), e.push_back(events[i]);
      }
      cell.n = t.size();
      if (t.empty()) {
        cell.note = "no cases";
      } else {
        const auto s = survstats::survival_at(survstats::kaplan_meier(t, e, alpha, band), horizon);
        cell.estimate = s.estimate;
        cell.ci_lower = s.ci_lower;
        cell.ci_upper = s.ci_upper;
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

Substratification substratify_km(const std::string& analysis, std::span<const std::string> strata,
                                 std::span<const std::string> groups, std::span<const double> times,
                                 std::span<const EventFlag> events, double alpha,
                                 survstats::ConfidenceBand band) {
  const std::size_t n = strata.size();
  if (groups.size() != n || times.size() != n || events.size() != n) {
    throw DataError("stratification inputs differ in length");
  }
  // stratum -> group -> member indices; empty stratum labels are left out.
  std::map<std::string, std::map<std::string, std::vector<std::size_t>>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    if (!strata[i].empty()) cells[strata[i]][groups[i]].push_back(i);
  }
  Substratification out;
  for (const auto& [stratum, by_group] : cells) {
    std::vector<std::vector<double>> gt;
    std::vector<EventFlags> ge;
    std::string labels;
    std::size_t total = 0;
    for (const auto& [group, idx] : by_group) {
      std::vector<double> t;
      EventFlags e;
      for (auto i : idx) t.push_back(times[i]), e.push_back(events[i]);
      KmStratum k;
      k.name = slug(analysis + "__" + stratum + "__" + group);
      k.analysis = analysis;
      k.stratum = stratum;
      k.group = group;
      k.curve = survstats::kaplan_meier(t, e, alpha, band);
      out.curves.push_back(std::move(k));
      gt.push_back(std::move(t));
      ge.push_back(std::move(e));
      labels += (labels.empty() ? "" : ";") + group;
      total += idx.size();
    }
    LogRankRow row{analysis, stratum, labels, total, {}, {}, 0, ""};
    if (gt.size() < 2) {
      row.note = "single group present";
    } else {
      try {
        const auto lr = survstats::logrank(gt, ge);
        row.chi2 = lr.chi2;
        row.df = lr.df;
        row.p_value = lr.p_value;
      } catch (const UndefinedMetricError&) {
        row.note = "no events";
      }
    }
    out.tests.push_back(row);
  }
  return out;
}

InputData load_input(const RunConfig& config) {
  switch (config.source()) {
    case InputSource::Simulation: {
      cohort::SimulationParams p = config.simulation;
      p.seed = config.simulation_seed.value_or(config.seed);
      return {cohort::simulate_cohort(p), {}, ""};
    }
    case InputSource::CohortFile: {
      auto r = cohort::load_cohort(*config.cohort_path);
      return {std::move(r.cohort), std::move(r.row_errors), *config.cohort_path};
    }
    case InputSource::Patches: {
      const auto grids = patchagg::read_patch_file(*config.patch_path);
      const auto manifest = patchagg::read_slide_manifest(config.slide_manifest_path);
      const auto agg = patchagg::aggregate_cases(grids, manifest, config.class_weights,
                                                 config.tissue_threshold);
      auto clinical = cohort::load_cohort(config.clinical_path);
      std::map<std::string, const patchagg::CaseAggregate*> by_id;
      for (const auto& a : agg) by_id[a.case_id] = &a;
      std::vector<cohort::Case> cases;
      for (cohort::Case c : clinical.cohort.cases()) {
        const auto it = by_id.find(c.case_id);
        if (it == by_id.end()) throw DataError("case '" + c.case_id + "' has no slides");
        c.pct_gp3 = it->second->pct.pct_gp3;
        c.pct_gp4 = it->second->pct.pct_gp4;
        c.pct_gp5 = it->second->pct.pct_gp5;
        c.tumor_present = it->second->pct.tumor_present;
        cases.push_back(std::move(c));
      }
      return {Cohort(std::move(cases), clinical.cohort.label(), clinical.cohort.exclusion_log()),
              std::move(clinical.row_errors), *config.patch_path};
    }
  }
  throw ConfigError("unknown input source");
}

ReportBundle run_pipeline(const RunConfig& config) {
  in_stage("config", [&] {
    validate(config);
    if (config.out_dir.empty()) throw ConfigError("output directory is required");
    const fs::path out(config.out_dir);
    if (fs::exists(out) && !(fs::is_directory(out) &&
                             (fs::is_empty(out) || fs::exists(out / "manifest.json")))) {
      throw ConfigError("refusing to overwrite " + config.out_dir +
                        ": not empty and not a previous report bundle");
    }
    return 0;
  });

  const fs::path final_dir = fs::path(config.out_dir);
  const fs::path staging = fs::path(config.out_dir + ".partial");
  fs::remove_all(staging);
  fs::create_directories(staging);
  BundleWriter out(staging);
  Analyzer an(config, out);
  ReportBundle b;
  const riskmodel::Outcome outcome = config.outcome;

  try {
    // Input and cohort definition.
    InputData input = in_stage("input", [&] { return load_input(config); });
    const Cohort v1_cohort = in_stage("exclusions", [&] {
      const Cohort kept = cohort::apply_exclusions(input.cohort);
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : input.rejected_rows) {
        rows.push_back({r.case_id, "invalid row " + std::to_string(r.line) + ": " + r.reason});
      }
      for (const auto& x : kept.exclusion_log()) rows.push_back({x.case_id, x.reason});
      out.csv("exclusions.csv", bundle_schema().at("exclusions.csv"), rows);
      return kept;
    });
    const Subset v1 = in_stage("validation_sets", [&] { return Subset("V1", v1_cohort, outcome); });
    const Subset v2 = in_stage("validation_sets", [&] {
      Subset s("V2",
               cohort::select_validation_set(v1_cohort, cohort::ValidationSet::V2, config.min_year),
               outcome);
      if (s.size() < 2) throw DataError("validation set 2 has fewer than two cases");
      return s;
    });

    // Continuous scores on V1; V2 reuses them.
    const std::vector<RiskAssignment> scores = in_stage("scores", [&] {
      if (config.score_method == riskmodel::Method::InSample) {
        return riskmodel::in_sample_risk_scores(v1.cohort, outcome);
      }
      riskmodel::LoocvOptions o;
      o.outcome = outcome;
      o.fallback_ridge = config.fold_ridge;
      o.n_threads = config.threads;
      o.ties = config.ties;
      return riskmodel::loocv_risk_scores(v1.cohort, o);
    });

    // Discretize, write, and read back: every later metric uses the files.
    std::vector<RiskAssignment> a1, a2;
    in_stage("discretize", [&] {
      riskmodel::write_assignments(
          out.path("assignments_v1.csv"),
          riskmodel::discretize_to_reference(scores, reference_for(config, v2, v1.size())));
      riskmodel::write_assignments(
          out.path("assignments_v2.csv"),
          riskmodel::discretize_to_reference(v2.pick(scores), reference_for(config, v2, v2.size())));
      out.record("assignments_v1.csv");
      out.record("assignments_v2.csv");
      a1 = v1.pick(riskmodel::read_assignments(out.path("assignments_v1.csv")));
      a2 = v2.pick(riskmodel::read_assignments(out.path("assignments_v2.csv")));
      return 0;
    });
    const auto s1 = scores_of(a1), s2 = scores_of(a2);
    const auto g1 = groups_of(a1), g2 = groups_of(a2);
    const auto gg2 = v2.grades();
    std::vector<double> ens2;
    for (std::size_t i = 0; i < v2.size(); ++i) ens2.push_back(riskmodel::ensemble_mean(g2[i], gg2[i]));

    in_stage("table2", [&] {
      const std::string na_v1 = "pathologist grade groups not available for all cases in validation set 1";
      b.table2.push_back(Analyzer::na("table2", "pathologist_gg", "V1", v1.size(), na_v1));
      b.table2.push_back(an.c_cell("table2", "ai_risk_score", v1, s1));
      b.table2.push_back(an.c_cell("table2", "ai_risk_group", v1, as_double(g1)));
      b.table2.push_back(Analyzer::na("table2", "ensemble_mean", "V1", v1.size(), na_v1));
      b.table2.push_back(an.c_cell("table2", "pathologist_gg", v2, as_double(gg2)));
      b.table2.push_back(an.c_cell("table2", "ai_risk_score", v2, s2));
      b.table2.push_back(an.c_cell("table2", "ai_risk_group", v2, as_double(g2)));
      b.table2.push_back(an.c_cell("table2", "ensemble_mean", v2, ens2));
      out.csv("table2.csv", kCIndexColumns, c_rows(b.table2));

      const auto gg = as_double(gg2);
      b.table2_differences.push_back(an.diff_cell("ai_risk_score", s2, "pathologist_gg", gg, v2));
      b.table2_differences.push_back(
          an.diff_cell("ai_risk_group", as_double(g2), "pathologist_gg", gg, v2));
      b.table2_differences.push_back(an.diff_cell("ensemble_mean", ens2, "pathologist_gg", gg, v2));
      std::vector<std::vector<std::string>> rows;
      for (const auto& d : b.table2_differences) {
        rows.push_back({d.comparison, d.validation_set, std::to_string(d.n), num(d.difference),
                        num(d.ci_lower), num(d.ci_upper), std::to_string(d.n_effective)});
      }
      out.csv("table2_differences.csv", bundle_schema().at("table2_differences.csv"), rows);
      return 0;
    });

    nlohmann::json fits;
    in_stage("hazard_ratios", [&] {
      b.hr_univariable.push_back({"V1", "pathologist_gg", "", {}, {}, {}, {}, 1.0,
                                  "pathologist grade groups not available for all cases in validation set 1"});
      for (auto& r : an.group_hazards(v1, "ai_risk_group", g1)) b.hr_univariable.push_back(r);
      for (auto& r : an.group_hazards(v2, "pathologist_gg", gg2)) b.hr_univariable.push_back(r);
      for (auto& r : an.group_hazards(v2, "ai_risk_group", g2)) b.hr_univariable.push_back(r);
      out.csv("hr_univariable.csv", kHazardColumns, hazard_rows(b.hr_univariable));

      const std::vector<double> per10{10.0, 10.0};
      for (const Subset* s : {&v1, &v2}) {
        const auto fit =
            riskmodel::fit_pattern_model(s->cohort, outcome, config.ties, config.fold_ridge);
        fits["pattern_model_" + s->name] = coxph::fit_report(fit, per10, config.alpha);
        b.hr_per_pattern.push_back(
            {s->name, "pct_gp3", "per 10 points", 1.0, {}, {}, {}, 10.0, "reference (not a model input)"});
        for (const auto& h : coxph::hazard_ratios(fit, per10, config.alpha)) {
          b.hr_per_pattern.push_back({s->name, h.name, "per 10 points", h.hr, h.ci_lower, h.ci_upper,
                                      h.p_value, h.scale,
                                      fit.ridge > 0 ? "ridge " + num(fit.ridge) + " after separation" : ""});
        }
      }
      out.csv("hr_per_pattern.csv", kHazardColumns, hazard_rows(b.hr_per_pattern));
      return 0;
    });

    in_stage("discordance", [&] {
      b.discordance10y = discordance_survival(g2, gg2, v2.times, v2.events, config.horizon_years,
                                              config.alpha, config.band);
      std::vector<std::vector<std::string>> rows;
      for (const auto& c : b.discordance10y) {
        rows.push_back({std::to_string(c.grade_group), std::string(to_string(c.direction)),
                        std::to_string(c.n), num(config.horizon_years), opt(c.estimate),
                        opt(c.ci_lower), opt(c.ci_upper), c.note});
      }
      out.csv("discordance10y.csv", bundle_schema().at("discordance10y.csv"), rows);
      return 0;
    });

    in_stage("km", [&] {
      auto add = [&](Substratification s) {
        for (auto& c : s.curves) b.km_curves.push_back(std::move(c));
        for (auto& t : s.tests) b.logrank.push_back(std::move(t));
      };
      auto labels = [](const std::vector<int>& g, const std::string& prefix) {
        std::vector<std::string> l;
        for (int v : g) l.push_back(prefix + std::to_string(v));
        return l;
      };
      const std::vector<std::string> all1(v1.size(), "V1"), all2(v2.size(), "V2");
      add(substratify_km("ai_risk_groups", all1, labels(g1, "ai_group_"), v1.times, v1.events,
                         config.alpha, config.band));
      add(substratify_km("ai_risk_groups", all2, labels(g2, "ai_group_"), v2.times, v2.events,
                         config.alpha, config.band));
      add(substratify_km("pathologist_gg", all2, labels(gg2, "gg_"), v2.times, v2.events,
                         config.alpha, config.band));
      std::vector<std::string> ai_split;
      for (int g : g2) ai_split.push_back(g <= 2 ? "ai_1-2" : "ai_3-5");
      add(substratify_km("ai_within_gg", labels(gg2, "gg_"), ai_split, v2.times, v2.events,
                         config.alpha, config.band));
      std::vector<std::string> tstage;
      for (const auto& c : v1.cohort.cases()) {
        const auto high = c.t_stage_high();
        tstage.push_back(!high ? "" : (*high ? "t3-4" : "t1-2"));
      }
      add(substratify_km("ai_within_tstage", tstage, labels(g1, "ai_group_"), v1.times, v1.events,
                         config.alpha, config.band));

      std::vector<std::vector<std::string>> index;
      for (const auto& k : b.km_curves) {
        const std::string rel = "km/" + k.name + ".km.csv";
        fs::create_directories(out.root() / "km");
        survstats::write_curve_csv(out.path(rel), k.curve);
        out.record(rel);
        std::size_t events = 0;
        for (auto e : k.curve.n_events) events += e;
        index.push_back({k.name, k.analysis, k.stratum, k.group,
                         std::to_string(k.curve.at_risk.empty() ? 0 : k.curve.at_risk.front()),
                         std::to_string(events), rel});
      }
      out.csv("km/index.csv", bundle_schema().at("km/index.csv"), index);
      std::vector<std::vector<std::string>> rows;
      for (const auto& t : b.logrank) {
        rows.push_back({t.analysis, t.stratum, t.groups, std::to_string(t.n), opt(t.chi2),
                        t.chi2 ? std::to_string(t.df) : "", opt(t.p_value), t.note});
      }
      out.csv("logrank.csv", bundle_schema().at("logrank.csv"), rows);
      return 0;
    });

    in_stage("sensitivity", [&] {
      // Year range of the graded validation set.
      std::vector<int> years{config.min_year};
      if (config.sensitivity_min_year != config.min_year) years.push_back(config.sensitivity_min_year);
      for (int year : years) {
        const std::string analysis = "years_from_" + std::to_string(year);
        const Subset s("V2_from_" + std::to_string(year),
                       cohort::select_validation_set(v1_cohort, cohort::ValidationSet::V2, year),
                       outcome);
        const auto sc = s.pick(scores);
        const auto grp = groups_of(
            s.pick(riskmodel::discretize_to_reference(sc, reference_for(config, s, s.size()))));
        b.sensitivity_years.push_back(an.c_cell(analysis, "pathologist_gg", s, as_double(s.grades())));
        b.sensitivity_years.push_back(an.c_cell(analysis, "ai_risk_score", s, scores_of(sc)));
        b.sensitivity_years.push_back(an.c_cell(analysis, "ai_risk_group", s, as_double(grp)));
      }
      out.csv("sensitivity_years.csv", kCIndexColumns, c_rows(b.sensitivity_years));

      // Discretization route: LOOCV, temporal split, rule-based.
      auto& sd = b.sensitivity_discretization;
      sd.push_back(an.c_cell("discretization", "loocv", v1, as_double(g1)));
      sd.push_back(an.c_cell("discretization", "loocv", v2, as_double(g2)));

      std::vector<cohort::Case> train_cases;
      for (const auto& c : v1.cohort.cases()) {
        if (c.surgery_year <= config.temporal_train_end && !v2.cohort.find(c.case_id)) {
          train_cases.push_back(c);
        }
      }
      sd.push_back(Analyzer::na("discretization", "temporal_split", "V1", v1.size(),
                                "training cases belong to validation set 1"));
      std::vector<RiskAssignment> temporal;
      try {
        const Cohort train(train_cases, v1.cohort.label());
        temporal = riskmodel::discretize_to_reference(
            riskmodel::temporal_split_scores(train, v2.cohort, outcome),
            reference_for(config, v2, v2.size()));
      } catch (const Error& e) {
        sd.push_back(Analyzer::na("discretization", "temporal_split", "V2", v2.size(),
                                  std::string("temporal split unavailable: ") + e.what()));
      }
      riskmodel::write_assignments(out.path("assignments_temporal_v2.csv"), temporal);
      out.record("assignments_temporal_v2.csv");
      if (!temporal.empty()) {
        sd.push_back(an.c_cell("discretization", "temporal_split", v2,
                               as_double(groups_of(v2.pick(temporal)))));
      }

      for (const Subset* s : {&v1, &v2}) {
        const auto rule = riskmodel::rule_based_assignments(s->cohort, config.grade_rules);
        const std::string rel = "assignments_rule_based_" + std::string(s == &v1 ? "v1" : "v2") + ".csv";
        riskmodel::write_assignments(out.path(rel), rule);
        out.record(rel);
        sd.push_back(an.c_cell("discretization", "rule_based", *s, as_double(groups_of(rule))));
      }
      out.csv("sensitivity_discretization.csv", kCIndexColumns, c_rows(sd));
      return 0;
    });

    in_stage("multivariable", [&] {
      // Graded cases with a known T-stage.
      std::vector<cohort::Case> staged;
      for (const auto& c : v2.cohort.cases()) {
        if (c.t_stage_high()) staged.push_back(c);
      }
      const Subset s("V2_known_t", Cohort(staged, v2.cohort.label()), outcome);
      const auto ai = groups_of(s.pick(a2));
      const auto gg = s.grades();
      EventFlags th;
      for (const auto& c : s.cohort.cases()) th.push_back(*c.t_stage_high() ? 1 : 0);
      std::vector<double> mean;
      std::vector<int> mean_levels;
      std::vector<RiskAssignment> mean_scores;
      for (std::size_t i = 0; i < s.size(); ++i) {
        mean.push_back(riskmodel::ensemble_mean(ai[i], gg[i]));
        mean_levels.push_back(ai[i] + gg[i] - 1);  // 1..9
        mean_scores.push_back({s.cohort[i].case_id, mean.back(), std::nullopt, riskmodel::Method::Loocv});
      }
      const auto mean_disc = groups_of(
          s.pick(riskmodel::discretize_to_reference(mean_scores, reference_for(config, s, s.size()))));

      auto row = [&](const std::string& name, const std::vector<int>& levels,
                     const std::vector<double>& uni_score) {
        b.multivariable.push_back(an.c_cell("univariable", name, s, uni_score));
        try {
          const auto fit = coxph::fit_multivariable(levels, th, s.times, s.events,
                                                    config.multivariable_ridge, config.grade_coding);
          fits["multivariable_" + name] = coxph::fit_report(fit, {}, config.alpha);
          const Eigen::VectorXd lp = coxph::linear_predictor(
              fit, coxph::multivariable_design(levels, th, config.grade_coding));
          b.multivariable.push_back(an.c_cell("multivariable_tstage", name, s,
                                              std::vector<double>(lp.data(), lp.data() + lp.size())));
        } catch (const Error& e) {
          b.multivariable.push_back(Analyzer::na("multivariable_tstage", name, s.name, s.size(), e.what()));
        }
      };
      row("pathologist_gg", gg, as_double(gg));
      row("ai_risk_group", ai, as_double(ai));
      row("ensemble_mean", mean_levels, mean);
      row("ensemble_discretized", mean_disc, as_double(mean_disc));
      out.csv("multivariable.csv", kCIndexColumns, c_rows(b.multivariable));
      out.text("cox_fits.json", fits.dump(2) + "\n");
      return 0;
    });

    in_stage("manifest", [&] {
      nlohmann::json m;
      m["version"] = std::string(kVersion);
      m["seed"] = config.seed;
      const std::string canon = canonical_text(config);
      m["config_hash"] = hex64(fnv1a64(canon));
      nlohmann::json cfg = nlohmann::json::object();
      std::istringstream lines(canon);
      for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        cfg[line.substr(0, eq)] = line.substr(eq + 1);
      }
      m["config"] = cfg;
      m["input"] = {{"source", std::string(to_string(config.source()))}, {"path", input.path}};
      if (!input.path.empty()) m["input"]["fnv1a64"] = hex64(fnv1a64(read_bytes(input.path)));
      m["cohort"] = {{"label", input.cohort.label()},
                     {"n_input", input.cohort.size() + input.rejected_rows.size()},
                     {"n_rejected_rows", input.rejected_rows.size()},
                     {"n_excluded", v1.cohort.exclusion_log().size() - input.cohort.exclusion_log().size()},
                     {"n_v1", v1.size()},
                     {"n_v2", v2.size()},
                     {"events_v1", std::count(v1.events.begin(), v1.events.end(), 1)},
                     {"events_v2", std::count(v2.events.begin(), v2.events.end(), 1)}};
      m["table2_sources"] = {{"V1", "assignments_v1.csv"}, {"V2", "assignments_v2.csv"}};
      nlohmann::json files = nlohmann::json::object();
      for (const auto& rel : out.files()) files[rel] = hex64(fnv1a64(read_bytes(out.root() / rel)));
      m["outputs"] = files;
      m["created_utc"] = utc_now();
      b.manifest = m;
      out.text("manifest.json", m.dump(2) + "\n");
      return 0;
    });

    in_stage("finalize", [&] {
      if (fs::exists(final_dir)) fs::remove_all(final_dir);
      fs::rename(staging, final_dir);
      return 0;
    });
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  b.out_dir = final_dir.string();
  return b;
}

}  // namespace survrisk::pipeline
