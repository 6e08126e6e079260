#include "survrisk/run_config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"

namespace survrisk::pipeline {

namespace fs = std::filesystem;

std::string_view to_string(InputSource s) {
  switch (s) {
    case InputSource::CohortFile:
      return "cohort";
    case InputSource::Simulation:
      return "simulate";
    case InputSource::Patches:
      return "patches";
  }
  return "?";
}

InputSource RunConfig::source() const {
  const int n = (cohort_path ? 1 : 0) + (simulate ? 1 : 0) + (patch_path ? 1 : 0);
  if (n != 1) {
    throw ConfigError(n == 0 ? "no input source: set one of cohort, simulate, patches"
                             : "several input sources: set exactly one of cohort, simulate, patches");
  }
  if (cohort_path) return InputSource::CohortFile;
  if (simulate) return InputSource::Simulation;
  return InputSource::Patches;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(want) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v, "a number");
  }
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::vector<double> to_list(std::string_view key, std::string_view v, std::size_t n) {
  std::vector<double> out;
  for (const auto& f : csv::split_line(v)) out.push_back(to_double(key, trim(f)));
  if (out.size() != n) bad_value(key, v, std::to_string(n) + " comma-separated numbers");
  return out;
}

std::string resolve(std::string_view value, const std::string& base_dir) {
  fs::path p{std::string(value)};
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  return p.lexically_normal().string();
}

std::string fmt(double v) { return csv::format_double(v); }

template <std::size_t N>
std::string fmt_list(const std::array<double, N>& a) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + fmt(a[i]);
  return s;
}

struct Setting {
  std::string key;
  std::function<void(RunConfig&, std::string_view, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool in_hash = true;
};

const std::vector<Setting>& settings() {
  using C = RunConfig;
  using V = std::string_view;
  using B = const std::string&;
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t;
    auto add = [&](std::string key, auto set, auto get, bool in_hash = true) {
      t.push_back({std::move(key), set, get, in_hash});
    };
    add("cohort", [](C& c, V v, B b) { c.cohort_path = resolve(v, b); },
        [](const C& c) { return c.cohort_path.value_or(""); });
    add("simulate", [](C& c, V v, B) { c.simulate = to_bool("simulate", v); },
        [](const C& c) { return std::string(c.simulate ? "true" : "false"); });
    add("patches", [](C& c, V v, B b) { c.patch_path = resolve(v, b); },
        [](const C& c) { return c.patch_path.value_or(""); });
    add("slide_manifest", [](C& c, V v, B b) { c.slide_manifest_path = resolve(v, b); },
        [](const C& c) { return c.slide_manifest_path; });
    add("clinical", [](C& c, V v, B b) { c.clinical_path = resolve(v, b); },
        [](const C& c) { return c.clinical_path; });
    add("patch.threshold", [](C& c, V v, B) { c.tissue_threshold = to_double("patch.threshold", v); },
        [](const C& c) { return fmt(c.tissue_threshold); });
    add("patch.weights",
        [](C& c, V v, B) {
          const auto w = to_list("patch.weights", v, 4);
          std::copy(w.begin(), w.end(), c.class_weights.w.begin());
        },
        [](const C& c) { return fmt_list(c.class_weights.w); });

    // Simulation parameters; any of them selects the simulation source.
    auto sim_num = [&](std::string key, auto member) {
      add("sim." + key,
          [key, member](C& c, V v, B) {
            c.simulate = true;
            c.simulation.*member = to_double("sim." + key, v);
          },
          [member](const C& c) { return fmt(c.simulation.*member); });
    };
    add("sim.n_cases",
        [](C& c, V v, B) {
          c.simulate = true;
          c.simulation.n_cases = to_int<std::size_t>("sim.n_cases", v);
        },
        [](const C& c) { return std::to_string(c.simulation.n_cases); });
    add("sim.seed",
        [](C& c, V v, B) {
          c.simulate = true;
          c.simulation_seed = to_int<std::uint64_t>("sim.seed", v);
        },
        [](const C& c) { return c.simulation_seed ? std::to_string(*c.simulation_seed) : ""; });
    sim_num("beta_gp4", &cohort::SimulationParams::beta_gp4);
    sim_num("beta_gp5", &cohort::SimulationParams::beta_gp5);
    sim_num("beta_t_high", &cohort::SimulationParams::beta_t_high);
    sim_num("baseline_hazard", &cohort::SimulationParams::baseline_hazard);
    sim_num("other_cause_hazard", &cohort::SimulationParams::other_cause_hazard);
    sim_num("censor_min_years", &cohort::SimulationParams::censor_min_years);
    sim_num("censor_max_years", &cohort::SimulationParams::censor_max_years);
    sim_num("grade_noise_sd", &cohort::SimulationParams::grade_noise_sd);
    sim_num("p_t_unknown", &cohort::SimulationParams::p_t_unknown);
    sim_num("p_graded_from_adoption", &cohort::SimulationParams::p_graded_from_adoption);
    sim_num("p_graded_before_adoption", &cohort::SimulationParams::p_graded_before_adoption);
    add("sim.gg_mixture",
        [](C& c, V v, B) {
          c.simulate = true;
          const auto w = to_list("sim.gg_mixture", v, 5);
          std::copy(w.begin(), w.end(), c.simulation.gg_mixture.begin());
        },
        [](const C& c) { return fmt_list(c.simulation.gg_mixture); });
    add("sim.label",
        [](C& c, V v, B) {
          c.simulate = true;
          c.simulation.label = std::string(v);
        },
        [](const C& c) { return c.simulation.label; });

    add("min_year", [](C& c, V v, B) { c.min_year = to_int<int>("min_year", v); },
        [](const C& c) { return std::to_string(c.min_year); });
    add("sensitivity_min_year",
        [](C& c, V v, B) { c.sensitivity_min_year = to_int<int>("sensitivity_min_year", v); },
        [](const C& c) { return std::to_string(c.sensitivity_min_year); });
    add("temporal_train_end",
        [](C& c, V v, B) { c.temporal_train_end = to_int<int>("temporal_train_end", v); },
        [](const C& c) { return std::to_string(c.temporal_train_end); });
    add("outcome",
        [](C& c, V v, B) {
          const auto o = riskmodel::parse_outcome(v);
          if (!o) bad_value("outcome", v, "dss or os");
          c.outcome = *o;
        },
        [](const C& c) { return std::string(riskmodel::to_string(c.outcome)); });
    add("score_method",
        [](C& c, V v, B) {
          const auto m = riskmodel::parse_method(v);
          if (!m || (*m != riskmodel::Method::Loocv && *m != riskmodel::Method::InSample)) {
            bad_value("score_method", v, "loocv or in_sample");
          }
          c.score_method = *m;
        },
        [](const C& c) { return std::string(riskmodel::to_string(c.score_method)); });
    add("reference",
        [](C& c, V v, B) {
          if (v == "grades") {
            c.reference = ReferenceSource::PathologistGrades;
          } else if (v == "counts") {
            c.reference = ReferenceSource::Explicit;
          } else {
            bad_value("reference", v, "grades or counts");
          }
        },
        [](const C& c) {
          return std::string(c.reference == ReferenceSource::Explicit ? "counts" : "grades");
        });
    add("reference_counts",
        [](C& c, V v, B) {
          const auto w = to_list("reference_counts", v, 5);
          for (std::size_t k = 0; k < 5; ++k) {
            if (w[k] < 0 || w[k] != std::floor(w[k])) bad_value("reference_counts", v, "counts");
            c.reference_counts.counts[k] = static_cast<std::size_t>(w[k]);
          }
        },
        [](const C& c) {
          std::string s;
          for (std::size_t k = 0; k < 5; ++k) {
            s += (k ? "," : "") + std::to_string(c.reference_counts.counts[k]);
          }
          return s;
        });
    add("grade.secondary_min_pct",
        [](C& c, V v, B) {
          c.grade_rules.secondary_min_pct = to_double("grade.secondary_min_pct", v);
        },
        [](const C& c) { return fmt(c.grade_rules.secondary_min_pct); });
    add("grade.higher_grade_override",
        [](C& c, V v, B) {
          c.grade_rules.higher_grade_override = to_bool("grade.higher_grade_override", v);
        },
        [](const C& c) { return std::string(c.grade_rules.higher_grade_override ? "true" : "false"); });
    add("ties",
        [](C& c, V v, B) {
          if (v == "efron") {
            c.ties = coxph::Ties::Efron;
          } else if (v == "breslow") {
            c.ties = coxph::Ties::Breslow;
          } else {
            bad_value("ties", v, "efron or breslow");
          }
        },
        [](const C& c) { return std::string(coxph::to_string(c.ties)); });
    add("ridge.fold_fallback", [](C& c, V v, B) { c.fold_ridge = to_double("ridge.fold_fallback", v); },
        [](const C& c) { return fmt(c.fold_ridge); });
    add("ridge.multivariable",
        [](C& c, V v, B) { c.multivariable_ridge = to_double("ridge.multivariable", v); },
        [](const C& c) { return fmt(c.multivariable_ridge); });
    add("grade_coding",
        [](C& c, V v, B) {
          if (v == "categorical") {
            c.grade_coding = coxph::GroupCoding::Categorical;
          } else if (v == "ordinal") {
            c.grade_coding = coxph::GroupCoding::Ordinal;
          } else {
            bad_value("grade_coding", v, "categorical or ordinal");
          }
        },
        [](const C& c) {
          return std::string(c.grade_coding == coxph::GroupCoding::Ordinal ? "ordinal" : "categorical");
        });
    add("bootstrap.n", [](C& c, V v, B) { c.bootstrap_n = to_int<std::size_t>("bootstrap.n", v); },
        [](const C& c) { return std::to_string(c.bootstrap_n); });
    add("bootstrap.alpha", [](C& c, V v, B) { c.alpha = to_double("bootstrap.alpha", v); },
        [](const C& c) { return fmt(c.alpha); });
    add("bootstrap.dump_replicates",
        [](C& c, V v, B) { c.dump_replicates = to_bool("bootstrap.dump_replicates", v); },
        [](const C& c) { return std::string(c.dump_replicates ? "true" : "false"); });
    add("seed", [](C& c, V v, B) { c.seed = to_int<std::uint64_t>("seed", v); },
        [](const C& c) { return std::to_string(c.seed); });
    add("km.band",
        [](C& c, V v, B) {
          if (v == "loglog") {
            c.band = survstats::ConfidenceBand::LogLog;
          } else if (v == "linear") {
            c.band = survstats::ConfidenceBand::Linear;
          } else {
            bad_value("km.band", v, "loglog or linear");
          }
        },
        [](const C& c) {
          return std::string(c.band == survstats::ConfidenceBand::Linear ? "linear" : "loglog");
        });
    add("horizon_years", [](C& c, V v, B) { c.horizon_years = to_double("horizon_years", v); },
        [](const C& c) { return fmt(c.horizon_years); });
    add("threads", [](C& c, V v, B) { c.threads = to_int<unsigned>("threads", v); },
        [](const C& c) { return std::to_string(c.threads); }, false);
    add("out", [](C& c, V v, B b) { c.out_dir = resolve(v, b); },
        [](const C& c) { return c.out_dir; }, false);
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(RunConfig& config, std::string_view key, std::string_view value,
                   const std::string& base_dir) {
  key = trim(key);
  value = trim(value);
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.set(config, value, base_dir);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

RunConfig parse_config(std::string_view text, const std::string& base_dir,
                       const std::string& source_name) {
  RunConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1), base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::path(path).parent_path().string(), path);
}

void validate(const RunConfig& c) {
  const InputSource src = c.source();
  auto need_file = [](const std::string& what, const std::string& p) {
    if (p.empty()) throw ConfigError(what + " is required");
    if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p);
  };
  if (src == InputSource::CohortFile) need_file("cohort file", *c.cohort_path);
  if (src == InputSource::Patches) {
    need_file("patch file", *c.patch_path);
    need_file("slide_manifest", c.slide_manifest_path);
    need_file("clinical file", c.clinical_path);
    patchagg::validate(c.class_weights);
    if (!(c.tissue_threshold >= 0.0 && c.tissue_threshold <= 1.0)) {
      throw ConfigError("patch.threshold must lie in [0, 1]");
    }
  }
  if (src == InputSource::Simulation) cohort::validate(c.simulation);
  if (c.bootstrap_n == 0) throw ConfigError("bootstrap.n must be positive");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("bootstrap.alpha must lie in (0, 1)");
  if (!(c.fold_ridge > 0.0)) throw ConfigError("ridge.fold_fallback must be positive");
  if (!(c.multivariable_ridge >= 0.0)) throw ConfigError("ridge.multivariable must be nonnegative");
  if (!(c.horizon_years > 0.0)) throw ConfigError("horizon_years must be positive");
  if (!(c.grade_rules.secondary_min_pct >= 0.0 && c.grade_rules.secondary_min_pct < 50.0)) {
    throw ConfigError("grade.secondary_min_pct must lie in [0, 50)");
  }
  if (c.sensitivity_min_year > c.min_year) {
    throw ConfigError("sensitivity_min_year must not exceed min_year");
  }
  if (c.reference == ReferenceSource::Explicit && c.reference_counts.total() == 0) {
    throw ConfigError("reference_counts must not all be zero");
  }
  if (c.threads == 0) throw ConfigError("threads must be positive");
}

std::string canonical_text(const RunConfig& config) {
  std::string out;
  for (const auto& s : settings()) {
    if (s.in_hash) out += s.key + "=" + s.get(config) + "\n";
  }
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> k;
  for (const auto& s : settings()) k.push_back(s.key);
  return k;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace survrisk::pipeline
