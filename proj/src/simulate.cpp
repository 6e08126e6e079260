#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

#include "survrisk/cohort.hpp"
#include "survrisk/errors.hpp"
#include "survrisk/grade_rules.hpp"

namespace survrisk::cohort {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("invalid simulation parameter: ") + what);
}

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void validate(const SimulationParams& p) {
  require(p.n_cases > 0, "n_cases must be positive");
  double total = 0.0;
  for (double w : p.gg_mixture) {
    require(std::isfinite(w) && w >= 0.0, "gg_mixture entries must be nonnegative");
    total += w;
  }
  require(std::abs(total - 1.0) < 1e-9, "gg_mixture must sum to 1");
  for (const auto& alphas : p.dirichlet_alphas) {
    for (double a : alphas) require(std::isfinite(a) && a > 0.0, "dirichlet_alphas must be > 0");
  }
  require(std::isfinite(p.beta_gp4) && std::isfinite(p.beta_gp5) && std::isfinite(p.beta_t_high),
          "coefficients must be finite");
  require(std::isfinite(p.baseline_hazard) && p.baseline_hazard > 0.0,
          "baseline_hazard must be positive");
  require(std::isfinite(p.other_cause_hazard) && p.other_cause_hazard >= 0.0,
          "other_cause_hazard must be nonnegative");
  require(p.censor_min_years > 0.0, "censor_min_years must be positive");
  require(p.censor_min_years < p.censor_max_years, "censor_min_years must be < censor_max_years");
  for (double q : p.p_t_high) require(is_probability(q), "p_t_high must be probabilities");
  require(is_probability(p.p_t4_given_high) && is_probability(p.p_t_unknown) &&
              is_probability(p.p_graded_from_adoption) &&
              is_probability(p.p_graded_before_adoption),
          "probabilities must lie in [0,1]");
  require(p.year_min <= p.year_max, "year_min must be <= year_max");
  require(std::isfinite(p.grade_noise_sd) && p.grade_noise_sd >= 0.0,
          "grade_noise_sd must be nonnegative");
}

Cohort simulate_cohort(const SimulationParams& p) {
  validate(p);
  std::mt19937_64 rng(p.seed);
  std::discrete_distribution<int> group_dist(p.gg_mixture.begin(), p.gg_mixture.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> censor_dist(p.censor_min_years, p.censor_max_years);
  std::uniform_int_distribution<int> year_dist(p.year_min, p.year_max);
  std::exponential_distribution<double> std_exp(1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const int width = static_cast<int>(std::to_string(p.n_cases).size());
  std::vector<Case> cases;
  cases.reserve(p.n_cases);
  for (std::size_t i = 0; i < p.n_cases; ++i) {
    Case c;
    char id[32];
    std::snprintf(id, sizeof(id), "S%0*zu", width, i + 1);
    c.case_id = id;

    const int group = group_dist(rng);
    std::array<double, 3> comp{};
    for (int k = 0; k < 3; ++k) {
      std::gamma_distribution<double> g(p.dirichlet_alphas[group][k], 1.0);
      comp[k] = g(rng);
    }
    double sum = comp[0] + comp[1] + comp[2];
    if (!(sum > 0.0)) {
      // All three gamma draws underflowed; fall back to the group mean.
      comp = p.dirichlet_alphas[group];
      sum = comp[0] + comp[1] + comp[2];
    }
    c.pct_gp4 = 100.0 * comp[1] / sum;
    c.pct_gp5 = 100.0 * comp[2] / sum;
    c.pct_gp3 = std::max(0.0, 100.0 - c.pct_gp4 - c.pct_gp5);
    c.tumor_present = true;

    c.surgery_year = year_dist(rng);

    const double u_unknown = unit(rng);
    const double u_high = unit(rng);
    const double u_t4 = unit(rng);
    bool t_high = false;
    if (u_unknown >= p.p_t_unknown) {
      t_high = u_high < p.p_t_high[group];
      c.t_category = !t_high ? TCategory::T2 : (u_t4 < p.p_t4_given_high ? TCategory::T4
                                                                          : TCategory::T3);
    }

    const double log_hazard = p.beta_gp4 * c.pct_gp4 + p.beta_gp5 * c.pct_gp5 +
                              (t_high ? p.beta_t_high : 0.0);
    const double t_dss = std_exp(rng) / (p.baseline_hazard * std::exp(log_hazard));
    const double e_other = std_exp(rng);
    const double t_other = p.other_cause_hazard > 0.0 ? e_other / p.other_cause_hazard
                                                      : std::numeric_limits<double>::infinity();
    const double t_censor = censor_dist(rng);
    c.followup_years = std::min({t_dss, t_other, t_censor});
    c.dss_event = t_dss <= t_other && t_dss <= t_censor;
    c.os_event = c.dss_event || (t_other < t_dss && t_other <= t_censor);

    const double u_graded = unit(rng);
    std::array<double, 3> noisy{};
    for (int k = 0; k < 3; ++k) noisy[k] = noise(rng);
    const double p_graded = c.surgery_year >= p.grading_adoption_year
                                ? p.p_graded_from_adoption
                                : p.p_graded_before_adoption;
    if (u_graded < p_graded) {
      const std::array<double, 3> pct{c.pct_gp3, c.pct_gp4, c.pct_gp5};
      double noisy_sum = 0.0;
      for (int k = 0; k < 3; ++k) {
        noisy[k] = std::max(0.0, pct[k] + p.grade_noise_sd * noisy[k]);
        noisy_sum += noisy[k];
      }
      const auto& src = noisy_sum > 0.0 ? noisy : pct;
      c.pathologist_gg = riskmodel::rule_based_gg(src[0], src[1], src[2]);
    }
    cases.push_back(std::move(c));
  }
  return Cohort(std::move(cases), p.label);
}

}  // namespace survrisk::cohort
