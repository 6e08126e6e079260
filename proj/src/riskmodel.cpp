#include "survrisk/riskmodel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"

namespace survrisk::riskmodel {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Loocv:
      return "loocv";
    case Method::TemporalSplit:
      return "temporal_split";
    case Method::RuleBased:
      return "rule_based";
    case Method::InSample:
      return "in_sample";
  }
  return "";
}

std::optional<Method> parse_method(std::string_view s) {
  for (Method m : {Method::Loocv, Method::TemporalSplit, Method::RuleBased, Method::InSample}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

std::string_view to_string(Outcome o) { return o == Outcome::DSS ? "dss" : "os"; }

std::optional<Outcome> parse_outcome(std::string_view s) {
  if (s == "dss" || s == "DSS") return Outcome::DSS;
  if (s == "os" || s == "OS") return Outcome::OS;
  return std::nullopt;
}

std::size_t ReferenceHistogram::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ReferenceHistogram ReferenceHistogram::scaled_to(std::size_t n) const {
  const std::size_t tot = total();
  if (tot == 0) throw DataError("reference histogram is empty");
  ReferenceHistogram out;
  std::array<std::size_t, 5> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    out.counts[k] = counts[k] * n / tot;
    remainder[k] = counts[k] * n % tot;
    assigned += out.counts[k];
  }
  std::array<std::size_t, 5> order{0, 1, 2, 3, 4};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++out.counts[order[k % 5]];
  return out;
}

ReferenceHistogram ReferenceHistogram::from_grades(const cohort::Cohort& cohort) {
  ReferenceHistogram h;
  for (const auto& c : cohort.cases()) {
    if (!c.pathologist_gg) {
      throw DataError("case '" + c.case_id + "' has no Grade Group for the reference histogram");
    }
    ++h.counts[static_cast<std::size_t>(*c.pathologist_gg - 1)];
  }
  return h;
}

Eigen::MatrixXd pattern_features(const cohort::Cohort& cohort) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(cohort.size()), 2);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = cohort[i].pct_gp4;
    x(r, 1) = cohort[i].pct_gp5;
  }
  return x;
}

std::vector<double> outcome_times(const cohort::Cohort& cohort) {
  std::vector<double> t;
  t.reserve(cohort.size());
  for (const auto& c : cohort.cases()) t.push_back(c.followup_years);
  return t;
}

EventFlags outcome_events(const cohort::Cohort& cohort, Outcome outcome) {
  EventFlags e;
  e.reserve(cohort.size());
  for (const auto& c : cohort.cases()) {
    if (outcome == Outcome::DSS) {
      e.push_back(c.dss_event ? 1 : 0);
    } else {
      if (!c.os_event) throw DataError("case '" + c.case_id + "' has no overall-survival status");
      e.push_back(*c.os_event ? 1 : 0);
    }
  }
  return e;
}

namespace {

const std::vector<std::string> kFeatureNames{"pct_gp4", "pct_gp5"};

coxph::CoxFit fit_with_fallback(const Eigen::MatrixXd& x, std::span<const double> times,
                                std::span<const EventFlag> events, coxph::Ties ties,
                                double fallback_ridge) {
  coxph::CoxOptions opt;
  opt.ties = ties;
  try {
    return coxph::fit_cox(x, times, events, opt, kFeatureNames);
  } catch (const coxph::SeparationError&) {
    opt.ridge = fallback_ridge;
    return coxph::fit_cox(x, times, events, opt, kFeatureNames);
  }
}

void require_fit_size(const cohort::Cohort& c, std::span<const EventFlag> events,
                      std::size_t min_cases) {
  const auto n_events = std::count_if(events.begin(), events.end(), [](EventFlag e) { return e; });
  if (c.size() < min_cases || n_events < 2) {
    throw DataError("cohort too small for risk modelling: " + std::to_string(c.size()) +
                    " cases, " + std::to_string(n_events) + " events (need >= " +
                    std::to_string(min_cases) + " cases and >= 2 events)");
  }
}

}  // namespace

coxph::CoxFit fit_pattern_model(const cohort::Cohort& cohort, Outcome outcome, coxph::Ties ties,
                                double fallback_ridge) {
  const auto times = outcome_times(cohort);
  const auto events = outcome_events(cohort, outcome);
  return fit_with_fallback(pattern_features(cohort), times, events, ties, fallback_ridge);
}

std::vector<RiskAssignment> loocv_risk_scores(const cohort::Cohort& cohort,
                                              const LoocvOptions& options) {
  const auto times = outcome_times(cohort);
  const auto events = outcome_events(cohort, options.outcome);
  require_fit_size(cohort, events, options.min_cases);
  const Eigen::MatrixXd x = pattern_features(cohort);
  const auto n = static_cast<Eigen::Index>(cohort.size());

  std::vector<RiskAssignment> out(cohort.size());
  std::vector<std::string> fold_errors(cohort.size());
  auto run_fold = [&](Eigen::Index i) {
    const auto ui = static_cast<std::size_t>(i);
    Eigen::MatrixXd xf(n - 1, 2);
    std::vector<double> tf;
    EventFlags ef;
    tf.reserve(static_cast<std::size_t>(n - 1));
    ef.reserve(static_cast<std::size_t>(n - 1));
    for (Eigen::Index r = 0, w = 0; r < n; ++r) {
      if (r == i) continue;
      xf.row(w++) = x.row(r);
      tf.push_back(times[static_cast<std::size_t>(r)]);
      ef.push_back(events[static_cast<std::size_t>(r)]);
    }
    coxph::CoxFit fit;
    try {
      try {
        fit = fit_with_fallback(xf, tf, ef, options.ties, options.fallback_ridge);
      } catch (const coxph::ConvergenceError&) {
        coxph::CoxOptions opt;
        opt.ties = options.ties;
        opt.ridge = options.fallback_ridge;
        fit = coxph::fit_cox(xf, tf, ef, opt, kFeatureNames);
      }
    } catch (const Error& e) {
      fold_errors[ui] = e.what();
      return;
    }
    out[ui].case_id = cohort[ui].case_id;
    out[ui].method = Method::Loocv;
    out[ui].risk_score = fit.beta(0) * x(i, 0) + fit.beta(1) * x(i, 1);
  };

  const unsigned n_threads = std::max(1u, options.n_threads);
  if (n_threads == 1) {
    for (Eigen::Index i = 0; i < n; ++i) run_fold(i);
  } else {
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < n_threads; ++t) {
      workers.emplace_back([&, t] {
        for (Eigen::Index i = t; i < n; i += n_threads) run_fold(i);
      });
    }
    for (auto& w : workers) w.join();
  }
  for (std::size_t i = 0; i < fold_errors.size(); ++i) {
    if (!fold_errors[i].empty()) {
      throw NumericError("LOOCV fold for case '" + cohort[i].case_id + "' failed: " +
                         fold_errors[i]);
    }
  }
  return out;
}

std::vector<RiskAssignment> in_sample_risk_scores(const cohort::Cohort& cohort, Outcome outcome) {
  const auto events = outcome_events(cohort, outcome);
  require_fit_size(cohort, events, 2);
  const coxph::CoxFit fit = fit_pattern_model(cohort, outcome);
  const Eigen::VectorXd lp = coxph::linear_predictor(fit, pattern_features(cohort));
  std::vector<RiskAssignment> out;
  out.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out.push_back({cohort[i].case_id, lp(static_cast<Eigen::Index>(i)), std::nullopt,
                   Method::InSample});
  }
  return out;
}

std::vector<RiskAssignment> temporal_split_scores(const cohort::Cohort& train,
                                                  const cohort::Cohort& eval, Outcome outcome) {
  for (const auto& c : eval.cases()) {
    if (train.find(c.case_id)) {
      throw DataError("training and evaluation cohorts overlap (case '" + c.case_id + "')");
    }
  }
  const auto events = outcome_events(train, outcome);
  require_fit_size(train, events, 2);
  const coxph::CoxFit fit = fit_pattern_model(train, outcome);
  std::vector<RiskAssignment> out;
  out.reserve(eval.size());
  for (const auto& c : eval.cases()) {
    const double x[2] = {c.pct_gp4, c.pct_gp5};
    out.push_back({c.case_id, coxph::linear_predictor(fit, x), std::nullopt,
                   Method::TemporalSplit});
  }
  return out;
}

std::vector<RiskAssignment> rule_based_assignments(const cohort::Cohort& cohort,
                                                   const GradeRuleConfig& config) {
  std::vector<RiskAssignment> out;
  out.reserve(cohort.size());
  for (const auto& c : cohort.cases()) {
    if (!c.tumor_present) throw DataError("case '" + c.case_id + "' has no tumor to grade");
    const int gg = rule_based_gg(c.pct_gp3, c.pct_gp4, c.pct_gp5, config);
    out.push_back({c.case_id, static_cast<double>(gg), gg, Method::RuleBased});
  }
  return out;
}

std::vector<RiskAssignment> discretize_to_reference(std::vector<RiskAssignment> assignments,
                                                    const ReferenceHistogram& reference) {
  if (reference.total() != assignments.size()) {
    throw DataError("reference histogram totals " + std::to_string(reference.total()) +
                    " but there are " + std::to_string(assignments.size()) + " scores");
  }
  std::vector<std::size_t> order(assignments.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = assignments[a];
    const auto& y = assignments[b];
    if (x.risk_score != y.risk_score) return x.risk_score < y.risk_score;
    return x.case_id < y.case_id;
  });
  std::size_t pos = 0;
  for (int g = 0; g < 5; ++g) {
    for (std::size_t k = 0; k < reference.counts[static_cast<std::size_t>(g)]; ++k) {
      assignments[order[pos++]].risk_group = g + 1;
    }
  }
  return assignments;
}

double ensemble_mean(int ai_group, std::optional<int> pathologist_gg) {
  if (!pathologist_gg) throw DataError("ensemble requires a pathologist Grade Group");
  if (ai_group < 1 || ai_group > 5 || *pathologist_gg < 1 || *pathologist_gg > 5) {
    throw DataError("ensemble inputs must be groups 1..5");
  }
  return 0.5 * (ai_group + *pathologist_gg);
}

const std::vector<std::string>& assignment_csv_columns() {
  static const std::vector<std::string> cols{"case_id", "method", "risk_score", "risk_group"};
  return cols;
}

void write_assignments(const std::string& path, std::span<const RiskAssignment> assignments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  csv::write_row(out, assignment_csv_columns());
  for (const auto& a : assignments) {
    csv::write_row(out, {a.case_id, std::string(to_string(a.method)),
                         csv::format_double(a.risk_score),
                         a.risk_group ? std::to_string(*a.risk_group) : ""});
  }
}

std::vector<RiskAssignment> read_assignments(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  int idx[4];
  for (int k = 0; k < 4; ++k) {
    idx[k] = t.column(assignment_csv_columns()[static_cast<std::size_t>(k)]);
    if (idx[k] < 0) {
      throw DataError(path + ": missing required column '" +
                      assignment_csv_columns()[static_cast<std::size_t>(k)] + "'");
    }
  }
  std::vector<RiskAssignment> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    if (row.size() != t.header.size()) throw DataError(where + ": wrong field count");
    auto f = [&](int k) -> const std::string& { return row[static_cast<std::size_t>(idx[k])]; };
    RiskAssignment a;
    a.case_id = f(0);
    auto m = parse_method(f(1));
    if (!m) throw DataError(where + ": unknown method '" + f(1) + "'");
    a.method = *m;
    const std::string& s = f(2);
    auto res = std::from_chars(s.data(), s.data() + s.size(), a.risk_score);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw DataError(where + ": non-numeric risk_score");
    }
    if (!f(3).empty()) {
      int g = 0;
      const std::string& gs = f(3);
      auto gr = std::from_chars(gs.data(), gs.data() + gs.size(), g);
      if (gr.ec != std::errc() || gr.ptr != gs.data() + gs.size() || g < 1 || g > 5) {
        throw DataError(where + ": invalid risk_group");
      }
      a.risk_group = g;
    }
    if (!seen.insert(a.case_id).second) throw DataError(where + ": duplicate case_id");
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace survrisk::riskmodel
