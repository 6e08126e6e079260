#include "survrisk/survstats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "survrisk/csv.hpp"
#include "survrisk/errors.hpp"
#include "survrisk/special_functions.hpp"

namespace survrisk::survstats {

namespace {

std::vector<std::size_t> order_by_time(std::span<const double> times) {
  std::vector<std::size_t> idx(times.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  return idx;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}

}  // namespace

SurvivalCurve kaplan_meier(std::span<const double> times, std::span<const EventFlag> events,
                           double alpha, ConfidenceBand band) {
  if (times.empty()) throw DataError("empty curve: Kaplan-Meier needs at least one subject");
  if (times.size() != events.size()) throw DataError("times and events differ in length");
  check_alpha(alpha);
  for (double t : times) {
    if (!(std::isfinite(t) && t > 0.0)) throw DataError("survival times must be positive");
  }
  const double z = special::normal_quantile(1.0 - alpha / 2.0);
  const auto idx = order_by_time(times);

  SurvivalCurve curve;
  curve.alpha = alpha;
  std::size_t remaining = times.size();
  double s = 1.0;
  double greenwood = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    const double t = times[idx[i]];
    std::size_t d = 0, c = 0;
    for (; i < idx.size() && times[idx[i]] == t; ++i) {
      if (events[idx[i]]) {
        ++d;
      } else {
        ++c;
      }
    }
    const std::size_t n = remaining;
    if (d > 0) {
      if (d == n) {
        s = 0.0;
      } else {
        s *= 1.0 - static_cast<double>(d) / static_cast<double>(n);
        greenwood += static_cast<double>(d) / (static_cast<double>(n) * static_cast<double>(n - d));
      }
    }
    double lo = s, hi = s;
    if (s > 0.0 && s < 1.0) {
      if (band == ConfidenceBand::LogLog) {
        const double se = std::sqrt(greenwood) / std::abs(std::log(s));
        lo = std::pow(s, std::exp(z * se));
        hi = std::pow(s, std::exp(-z * se));
      } else {
        const double se = s * std::sqrt(greenwood);
        lo = std::max(0.0, s - z * se);
        hi = std::min(1.0, s + z * se);
      }
    }
    curve.times.push_back(t);
    curve.survival.push_back(s);
    curve.at_risk.push_back(n);
    curve.n_events.push_back(d);
    curve.n_censored.push_back(c);
    curve.ci_lower.push_back(lo);
    curve.ci_upper.push_back(hi);
    remaining -= d + c;
  }
  return curve;
}

SurvivalEstimate survival_at(const SurvivalCurve& curve, double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  auto it = std::upper_bound(curve.times.begin(), curve.times.end(), horizon);
  if (it == curve.times.begin()) return {1.0, 1.0, 1.0};
  const auto k = static_cast<std::size_t>(it - curve.times.begin()) - 1;
  return {curve.survival[k], curve.ci_lower[k], curve.ci_upper[k]};
}

const std::vector<std::string>& curve_csv_columns() {
  static const std::vector<std::string> cols{"time",     "at_risk",  "n_events",
                                             "survival", "ci_lower", "ci_upper"};
  return cols;
}

void write_curve_csv(const std::string& path, const SurvivalCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  csv::write_row(out, curve_csv_columns());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    csv::write_row(out, {csv::format_double(curve.times[i]), std::to_string(curve.at_risk[i]),
                         std::to_string(curve.n_events[i]), csv::format_double(curve.survival[i]),
                         csv::format_double(curve.ci_lower[i]),
                         csv::format_double(curve.ci_upper[i])});
  }
}

LogRankResult logrank(const std::vector<std::vector<double>>& group_times,
                      const std::vector<EventFlags>& group_events) {
  const std::size_t k = group_times.size();
  if (k < 2) throw DataError("log-rank test needs at least two groups");
  if (group_events.size() != k) throw DataError("group times and events differ in count");

  std::vector<double> times;
  EventFlags events;
  std::vector<std::size_t> group;
  std::vector<std::int64_t> at_risk(k, 0);
  for (std::size_t g = 0; g < k; ++g) {
    if (group_times[g].empty()) throw DataError("log-rank group " + std::to_string(g) + " is empty");
    if (group_times[g].size() != group_events[g].size()) {
      throw DataError("times and events differ in length in group " + std::to_string(g));
    }
    for (std::size_t i = 0; i < group_times[g].size(); ++i) {
      times.push_back(group_times[g][i]);
      events.push_back(group_events[g][i]);
      group.push_back(g);
    }
    at_risk[g] = static_cast<std::int64_t>(group_times[g].size());
  }
  const auto idx = order_by_time(times);

  LogRankResult r;
  r.observed.assign(k, 0.0);
  r.expected.assign(k, 0.0);
  std::vector<double> o_minus_e(k, 0.0);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(k));
  std::int64_t n = static_cast<std::int64_t>(times.size());
  std::size_t total_events = 0;
  std::vector<std::int64_t> d_g(k), leaving(k);
  for (std::size_t i = 0; i < idx.size();) {
    const double t = times[idx[i]];
    std::fill(d_g.begin(), d_g.end(), 0);
    std::fill(leaving.begin(), leaving.end(), 0);
    std::int64_t d = 0, out = 0;
    for (; i < idx.size() && times[idx[i]] == t; ++i) {
      const std::size_t g = group[idx[i]];
      ++leaving[g];
      ++out;
      if (events[idx[i]]) {
        ++d_g[g];
        ++d;
      }
    }
    if (d > 0) {
      total_events += static_cast<std::size_t>(d);
      const double nd = static_cast<double>(n);
      for (std::size_t g = 0; g < k; ++g) {
        r.observed[g] += static_cast<double>(d_g[g]);
        r.expected[g] += static_cast<double>(d * at_risk[g]) / nd;
        // Exact integer numerator keeps identical groups at exactly zero.
        o_minus_e[g] += static_cast<double>(d_g[g] * n - d * at_risk[g]) / nd;
      }
      if (n > 1) {
        const double scale = static_cast<double>(d) * static_cast<double>(n - d) /
                             (static_cast<double>(n - 1) * nd * nd);
        for (std::size_t g = 0; g < k; ++g) {
          for (std::size_t h = 0; h < k; ++h) {
            const double ng = static_cast<double>(at_risk[g]);
            const double nh = static_cast<double>(at_risk[h]);
            cov(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(h)) +=
                scale * ng * ((g == h ? nd : 0.0) - nh);
          }
        }
      }
    }
    for (std::size_t g = 0; g < k; ++g) at_risk[g] -= leaving[g];
    n -= out;
  }
  if (total_events == 0) {
    throw UndefinedMetricError("log-rank statistic undefined: no events in any group");
  }

  const auto m = static_cast<Eigen::Index>(k - 1);
  Eigen::VectorXd u(m);
  for (Eigen::Index g = 0; g < m; ++g) u(g) = o_minus_e[static_cast<std::size_t>(g)];
  const Eigen::MatrixXd v = cov.topLeftCorner(m, m);
  const Eigen::VectorXd sol = v.completeOrthogonalDecomposition().solve(u);
  r.chi2 = std::max(0.0, u.dot(sol));
  r.df = k - 1;
  r.p_value = special::chi2_sf(r.chi2, static_cast<double>(r.df));
  return r;
}

}  // namespace survrisk::survstats
