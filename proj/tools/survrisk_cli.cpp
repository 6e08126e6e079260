#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "survrisk/cohort.hpp"
#include "survrisk/concordance.hpp"
#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"
#include "survrisk/inference.hpp"
#include "survrisk/patchagg.hpp"
#include "survrisk/pipeline.hpp"
#include "survrisk/riskmodel.hpp"
#include "survrisk/run_config.hpp"
#include "survrisk/survstats.hpp"

namespace fs = std::filesystem;
using namespace survrisk;

namespace {

std::string fmt(double v) { return csv::format_double(v); }
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

double to_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError(where + ": not a number: '" + s + "'");
  return v;
}

std::ofstream open_out(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

cohort::Cohort read_cohort(const std::string& path) {
  auto r = cohort::load_cohort(path);
  for (const auto& e : r.row_errors) {
    std::cerr << path << ":" << e.line << ": skipped row: " << e.reason << "\n";
  }
  return std::move(r.cohort);
}

// key=value pairs from repeated --set flags.
void apply_overrides(pipeline::RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    pipeline::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

// Cases of `c` ordered like `assignments`; cases without an assignment are an error.
struct Joined {
  std::vector<double> scores;
  std::vector<int> groups;
  std::vector<double> times;
  EventFlags events;
};

Joined join(const cohort::Cohort& c, const std::vector<riskmodel::RiskAssignment>& a,
            riskmodel::Outcome outcome) {
  const auto times = riskmodel::outcome_times(c);
  const auto events = riskmodel::outcome_events(c, outcome);
  Joined j;
  for (const auto& r : a) {
    const auto i = c.find(r.case_id);
    if (!i) throw DataError("case '" + r.case_id + "' is not in the cohort");
    j.scores.push_back(r.risk_score);
    if (r.risk_group) j.groups.push_back(*r.risk_group);
    j.times.push_back(times[*i]);
    j.events.push_back(events[*i]);
  }
  if (!j.groups.empty() && j.groups.size() != a.size()) {
    throw DataError("some assignments lack a risk group");
  }
  return j;
}

riskmodel::Outcome outcome_of(const std::string& s) {
  const auto o = riskmodel::parse_outcome(s);
  if (!o) throw ConfigError("unknown outcome '" + s + "' (dss or os)");
  return *o;
}

struct SimulateArgs {
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
};

void run_simulate(const SimulateArgs& a) {
  pipeline::RunConfig cfg;
  cfg.simulate = true;
  cfg.seed = a.seed;
  apply_overrides(cfg, a.sets);
  cfg.simulation.seed = cfg.simulation_seed.value_or(cfg.seed);
  const auto c = cohort::simulate_cohort(cfg.simulation);
  cohort::write_cohort(a.out, c);
  std::size_t events = 0;
  for (const auto& k : c.cases()) events += k.dss_event;
  std::cout << "simulated " << c.size() << " cases, " << events << " disease-specific deaths -> "
            << a.out << "\n";
}

struct IngestArgs {
  std::string cohort, out, exclusions;
};

void run_ingest(const IngestArgs& a) {
  auto r = cohort::load_cohort(a.cohort);
  const auto kept = cohort::apply_exclusions(r.cohort);
  cohort::write_cohort(a.out, kept);
  if (!a.exclusions.empty()) {
    auto out = open_out(a.exclusions);
    csv::write_row(out, {"case_id", "reason"});
    for (const auto& e : r.row_errors) {
      csv::write_row(out, {e.case_id, "invalid row " + std::to_string(e.line) + ": " + e.reason});
    }
    for (const auto& x : kept.exclusion_log()) csv::write_row(out, {x.case_id, x.reason});
  }
  std::cout << r.cohort.size() + r.row_errors.size() << " rows read, " << r.row_errors.size()
            << " rejected, " << kept.exclusion_log().size() - r.cohort.exclusion_log().size()
            << " excluded, " << kept.size() << " kept -> " << a.out << "\n";
}

struct AggregateArgs {
  std::string patches, manifest, out;
  double threshold = 0.5;
  std::vector<double> weights;
  std::string calibrate;
  double target_precision = 0.97;
};

void run_aggregate(AggregateArgs a) {
  if (!a.calibrate.empty()) {
    const auto t = csv::read_file(a.calibrate);
    const int sc = t.column("tissue_score"), lb = t.column("label");
    if (sc < 0 || lb < 0) throw DataError(a.calibrate + ": needs tissue_score and label columns");
    std::vector<patchagg::ScoredTissue> scored;
    for (const auto& row : t.rows) {
      const auto& label = row.at(static_cast<std::size_t>(lb));
      if (label != "prostatic" && label != "extraprostatic") {
        throw DataError(a.calibrate + ": label must be prostatic or extraprostatic");
      }
      scored.push_back({to_double(row.at(static_cast<std::size_t>(sc)), a.calibrate),
                        label == "prostatic" ? patchagg::TissueLabel::Prostatic
                                             : patchagg::TissueLabel::Extraprostatic});
    }
    const auto th = patchagg::select_tissue_threshold(scored, a.target_precision);
    std::cout << "tissue threshold " << fmt(th.threshold) << " (precision " << fmt(th.precision)
              << ", recall " << fmt(th.recall) << ")\n";
    a.threshold = th.threshold;
  }
  patchagg::ClassWeights w;
  if (!a.weights.empty()) {
    if (a.weights.size() != 4) throw ConfigError("--weights takes four values");
    std::copy(a.weights.begin(), a.weights.end(), w.w.begin());
  }
  patchagg::validate(w);
  const auto agg = patchagg::aggregate_cases(patchagg::read_patch_file(a.patches),
                                             patchagg::read_slide_manifest(a.manifest), w, a.threshold);
  auto out = open_out(a.out);
  csv::write_row(out, {"case_id", "n_slides", "masked", "nontumor", "gp3", "gp4", "gp5", "pct_gp3",
                       "pct_gp4", "pct_gp5", "tumor_present"});
  for (const auto& c : agg) {
    csv::write_row(out, {c.case_id, std::to_string(c.n_slides), std::to_string(c.counts.masked),
                         std::to_string(c.counts.nontumor), std::to_string(c.counts.gp3),
                         std::to_string(c.counts.gp4), std::to_string(c.counts.gp5),
                         fmt(c.pct.pct_gp3), fmt(c.pct.pct_gp4), fmt(c.pct.pct_gp5),
                         c.pct.tumor_present ? "1" : "0"});
  }
  std::cout << agg.size() << " cases aggregated -> " << a.out << "\n";
}

struct ScoreArgs {
  std::string cohort, out, method = "loocv", outcome = "dss", train;
  unsigned threads = 1;
};

void run_score(const ScoreArgs& a) {
  const auto c = read_cohort(a.cohort);
  const auto outcome = outcome_of(a.outcome);
  std::vector<riskmodel::RiskAssignment> s;
  if (a.method == "loocv") {
    riskmodel::LoocvOptions o;
    o.outcome = outcome;
    o.n_threads = a.threads;
    s = riskmodel::loocv_risk_scores(c, o);
  } else if (a.method == "in_sample") {
    s = riskmodel::in_sample_risk_scores(c, outcome);
  } else if (a.method == "rule_based") {
    s = riskmodel::rule_based_assignments(c);
  } else if (a.method == "temporal_split") {
    if (a.train.empty()) throw ConfigError("temporal_split needs --train");
    s = riskmodel::temporal_split_scores(read_cohort(a.train), c, outcome);
  } else {
    throw ConfigError("unknown method '" + a.method + "'");
  }
  riskmodel::write_assignments(a.out, s);
  std::cout << s.size() << " cases scored (" << a.method << ") -> " << a.out << "\n";
}

struct DiscretizeArgs {
  std::string scores, out, grades_from;
  std::vector<std::size_t> counts;
};

void run_discretize(const DiscretizeArgs& a) {
  const auto s = riskmodel::read_assignments(a.scores);
  riskmodel::ReferenceHistogram ref = riskmodel::kDefaultReference;
  if (!a.grades_from.empty()) {
    if (!a.counts.empty()) throw ConfigError("--counts and --grades-from are exclusive");
    const auto c = read_cohort(a.grades_from);
    std::vector<cohort::Case> graded;
    for (const auto& k : c.cases()) {
      if (k.pathologist_gg) graded.push_back(k);
    }
    ref = riskmodel::ReferenceHistogram::from_grades(cohort::Cohort(graded, c.label()));
  } else if (!a.counts.empty()) {
    if (a.counts.size() != 5) throw ConfigError("--counts takes five values");
    std::copy(a.counts.begin(), a.counts.end(), ref.counts.begin());
  }
  if (ref.total() != s.size()) ref = ref.scaled_to(s.size());
  const auto g = riskmodel::discretize_to_reference(s, ref);
  riskmodel::write_assignments(a.out, g);
  std::cout << "groups:";
  for (auto n : ref.counts) std::cout << " " << n;
  std::cout << " -> " << a.out << "\n";
}

struct EvaluateArgs {
  std::string assignments, cohort, outcome = "dss", out;
  std::size_t bootstrap_n = 1000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  unsigned threads = 1;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto j = join(read_cohort(a.cohort), riskmodel::read_assignments(a.assignments),
                      outcome_of(a.outcome));
  inference::BootstrapOptions o;
  o.n_resamples = a.bootstrap_n;
  o.seed = a.seed;
  o.alpha = a.alpha;
  o.n_threads = a.threads;
  std::vector<std::pair<std::string, std::vector<double>>> rows{{"risk_score", j.scores}};
  if (!j.groups.empty()) rows.emplace_back("risk_group", std::vector<double>(j.groups.begin(), j.groups.end()));
  std::optional<std::ofstream> out;
  if (!a.out.empty()) {
    out = open_out(a.out);
    csv::write_row(*out, {"row", "n", "c_index", "ci_lower", "ci_upper"});
  }
  for (const auto& [name, score] : rows) {
    const auto r = inference::bootstrap_ci(
        [&](std::span<const std::size_t> idx) -> std::optional<double> {
          return concordance::c_index(score, j.times, j.events, idx).c_index;
        },
        score.size(), o);
    std::cout << name << ": C = " << fmt(r.point_estimate) << " [" << fmt(r.ci_lower) << ", "
              << fmt(r.ci_upper) << "] n=" << score.size() << "\n";
    if (out) {
      csv::write_row(*out, {name, std::to_string(score.size()), fmt(r.point_estimate), fmt(r.ci_lower),
                            fmt(r.ci_upper)});
    }
  }
}

struct KmArgs {
  std::string assignments, cohort, outcome = "dss", out;
  double alpha = 0.05;
  std::string band = "loglog";
};

void run_km(const KmArgs& a) {
  const auto j = join(read_cohort(a.cohort), riskmodel::read_assignments(a.assignments),
                      outcome_of(a.outcome));
  if (j.groups.empty()) throw DataError(a.assignments + " has no risk groups");
  if (a.band != "loglog" && a.band != "linear") throw ConfigError("--band is loglog or linear");
  const auto band = a.band == "linear" ? survstats::ConfidenceBand::Linear : survstats::ConfidenceBand::LogLog;
  std::vector<std::string> strata(j.groups.size(), "all"), labels;
  for (int g : j.groups) labels.push_back("group_" + std::to_string(g));
  const auto s = pipeline::substratify_km("risk_groups", strata, labels, j.times, j.events, a.alpha, band);
  fs::create_directories(a.out);
  for (const auto& k : s.curves) {
    survstats::write_curve_csv((fs::path(a.out) / (k.group + ".km.csv")).string(), k.curve);
  }
  for (const auto& t : s.tests) {
    std::cout << "log-rank " << t.groups << ": chi2 = " << fmt(t.chi2) << ", df = " << t.df
              << ", p = " << fmt(t.p_value) << (t.note.empty() ? "" : " (" + t.note + ")") << "\n";
  }
}

void run_report(const std::string& dir) {
  const auto problems = pipeline::validate_bundle(dir);
  for (const auto& p : problems) std::cerr << "invalid bundle: " << p << "\n";
  if (!problems.empty()) throw DataError(dir + " is not a valid report bundle");
  const auto table = csv::read_file((fs::path(dir) / "table2.csv").string());
  std::cout << "bundle " << dir << " is valid\n";
  for (const auto& r : table.rows) {
    std::cout << "  " << r[2] << " " << r[1] << ": ";
    if (r[4].empty()) {
      std::cout << "N/A (" << r[7] << ")\n";
    } else {
      std::cout << r[4] << " [" << r[5] << ", " << r[6] << "]\n";
    }
  }
}

struct PipelineArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
};

void run_pipeline_cmd(const PipelineArgs& a) {
  pipeline::RunConfig cfg = a.config.empty() ? pipeline::RunConfig{} : pipeline::load_config(a.config);
  for (const auto& [k, v] : a.flags) pipeline::apply_setting(cfg, k, v);
  apply_overrides(cfg, a.sets);
  cfg.seed = a.seed;
  cfg.out_dir = a.out;
  const auto b = pipeline::run_pipeline(cfg);
  std::cout << "report bundle written to " << b.out_dir << " (config "
            << b.manifest.at("config_hash").get<std::string>() << ")\n";
  for (const auto& c : b.table2) {
    std::cout << "  " << c.validation_set << " " << c.row << ": "
              << (c.c_index ? fmt(c.c_index) + " [" + fmt(c.ci_lower) + ", " + fmt(c.ci_upper) + "]"
                            : "N/A")
              << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk stratification from Gleason pattern percentages"};
  app.set_version_flag("--version", std::string(pipeline::kVersion));
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Write a synthetic cohort CSV");
  c_sim->add_option("-o,--out", sim.out, "Cohort CSV to write")->required();
  c_sim->add_option("--seed", sim.seed, "Random seed");
  c_sim->add_option("--set", sim.sets, "Simulation setting, e.g. sim.n_cases=500");

  IngestArgs ing;
  auto* c_ing = app.add_subcommand("ingest", "Validate a cohort CSV and apply exclusions");
  c_ing->add_option("--cohort", ing.cohort)->required()->check(CLI::ExistingFile);
  c_ing->add_option("-o,--out", ing.out, "Cohort CSV of kept cases")->required();
  c_ing->add_option("--exclusions", ing.exclusions, "CSV of rejected and excluded cases");

  AggregateArgs agg;
  auto* c_agg = app.add_subcommand("aggregate", "Patch classifier output to case percentages");
  c_agg->add_option("--patches", agg.patches)->required()->check(CLI::ExistingFile);
  c_agg->add_option("--manifest", agg.manifest, "slide_id,case_id CSV")->required()->check(CLI::ExistingFile);
  c_agg->add_option("-o,--out", agg.out)->required();
  c_agg->add_option("--threshold", agg.threshold, "Tissue score threshold");
  c_agg->add_option("--weights", agg.weights, "Class weights: nontumor gp3 gp4 gp5")->expected(4);
  c_agg->add_option("--calibrate", agg.calibrate, "CSV of tissue_score,label used to pick the threshold")
      ->check(CLI::ExistingFile);
  c_agg->add_option("--target-precision", agg.target_precision);

  ScoreArgs sc;
  auto* c_sc = app.add_subcommand("score", "Continuous risk scores");
  c_sc->add_option("--cohort", sc.cohort)->required()->check(CLI::ExistingFile);
  c_sc->add_option("-o,--out", sc.out)->required();
  c_sc->add_option("--method", sc.method, "loocv, in_sample, rule_based or temporal_split");
  c_sc->add_option("--train", sc.train, "Training cohort for temporal_split")->check(CLI::ExistingFile);
  c_sc->add_option("--outcome", sc.outcome, "dss or os");
  c_sc->add_option("--threads", sc.threads);

  DiscretizeArgs dz;
  auto* c_dz = app.add_subcommand("discretize", "Map scores onto five groups by reference counts");
  c_dz->add_option("--scores", dz.scores)->required()->check(CLI::ExistingFile);
  c_dz->add_option("-o,--out", dz.out)->required();
  c_dz->add_option("--counts", dz.counts, "Reference counts for groups 1..5")->expected(5);
  c_dz->add_option("--grades-from", dz.grades_from, "Cohort whose pathologist grades give the counts")
      ->check(CLI::ExistingFile);

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "C-index with bootstrap interval");
  c_ev->add_option("--assignments", ev.assignments)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--cohort", ev.cohort)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--outcome", ev.outcome);
  c_ev->add_option("--bootstrap-n", ev.bootstrap_n);
  c_ev->add_option("--seed", ev.seed);
  c_ev->add_option("--alpha", ev.alpha);
  c_ev->add_option("--threads", ev.threads);
  c_ev->add_option("-o,--out", ev.out, "Optional CSV of the results");

  KmArgs km;
  auto* c_km = app.add_subcommand("km", "Kaplan-Meier curves per risk group and log-rank test");
  c_km->add_option("--assignments", km.assignments)->required()->check(CLI::ExistingFile);
  c_km->add_option("--cohort", km.cohort)->required()->check(CLI::ExistingFile);
  c_km->add_option("--outcome", km.outcome);
  c_km->add_option("--alpha", km.alpha);
  c_km->add_option("--band", km.band, "loglog or linear");
  c_km->add_option("-o,--out", km.out, "Directory for curve files")->required();

  std::string report_dir;
  auto* c_rep = app.add_subcommand("report", "Validate a report bundle and print Table 2");
  c_rep->add_option("bundle", report_dir)->required();

  PipelineArgs pl;
  auto* c_pl = app.add_subcommand("pipeline", "Run every analysis and write a report bundle");
  c_pl->add_option("--config", pl.config, "key = value configuration file")->check(CLI::ExistingFile);
  c_pl->add_option("--seed", pl.seed)->required();
  c_pl->add_option("-o,--out", pl.out)->required();
  c_pl->add_option("--set", pl.sets, "Override one setting, key=value");
  for (const auto& key : pipeline::known_keys()) {
    if (key == "seed" || key == "out") continue;
    c_pl->add_option_function<std::string>(
            "--" + key, [&pl, key](const std::string& v) { pl.flags[key] = v; }, "Same as --set " + key + "=...")
        ->group("Settings");
  }

  try {
    app.parse(argc, argv);
    if (c_sim->parsed()) run_simulate(sim);
    if (c_ing->parsed()) run_ingest(ing);
    if (c_agg->parsed()) run_aggregate(agg);
    if (c_sc->parsed()) run_score(sc);
    if (c_dz->parsed()) run_discretize(dz);
    if (c_ev->parsed()) run_evaluate(ev);
    if (c_km->parsed()) run_km(km);
    if (c_rep->parsed()) run_report(report_dir);
    if (c_pl->parsed()) run_pipeline_cmd(pl);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code_for(ErrorKind::Config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(ErrorKind::Data);
  }
  return 0;
}
