#include "survrisk/coxph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "survrisk/special_functions.hpp"

namespace survrisk::coxph {

std::string_view to_string(Ties ties) { return ties == Ties::Efron ? "efron" : "breslow"; }

Eigen::VectorXd CoxFit::standard_errors() const { return covariance.diagonal().cwiseSqrt(); }

namespace {

void check_inputs(const Eigen::MatrixXd& x, std::span<const double> times,
                  std::span<const EventFlag> events) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (times.size() != n || events.size() != n) {
    throw DataError("design matrix, times and events differ in length");
  }
  if (n < 2) throw DataError("Cox regression needs at least two subjects");
  if (x.cols() < 1) throw DataError("Cox regression needs at least one covariate");
  if (!x.allFinite()) throw DataError("design matrix contains non-finite values");
  for (double t : times) {
    if (!std::isfinite(t)) throw DataError("non-finite survival time");
  }
  if (std::none_of(events.begin(), events.end(), [](EventFlag e) { return e != 0; })) {
    throw DataError("Cox regression needs at least one event");
  }
}

}  // namespace

PartialLikelihoodEvaluator::PartialLikelihoodEvaluator(const Eigen::MatrixXd& x,
                                                       std::span<const double> times,
                                                       std::span<const EventFlag> events,
                                                       Ties ties)
    : ties_(ties) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (times.size() != n || events.size() != n) {
    throw DataError("design matrix, times and events differ in length");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x_.resize(x.rows(), x.cols());
  time_.resize(n);
  event_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(order[i]);
    x_.row(static_cast<Eigen::Index>(i)) = x.row(src) - mean;
    time_[i] = times[order[i]];
    event_[i] = events[order[i]] ? 1 : 0;
    n_events_ += event_[i];
  }
}

PartialLikelihood PartialLikelihoodEvaluator::evaluate(const Eigen::VectorXd& beta,
                                                       bool with_information) const {
  const Eigen::Index p = x_.cols();
  if (beta.size() != p) throw DataError("beta has wrong dimension");
  const auto n = static_cast<Eigen::Index>(time_.size());
  const Eigen::VectorXd eta = x_ * beta;
  const double eta_max = n > 0 ? eta.maxCoeff() : 0.0;

  PartialLikelihood out;
  out.score = Eigen::VectorXd::Zero(p);
  if (with_information) out.information = Eigen::MatrixXd::Zero(p, p);

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(with_information ? p : 0, with_information ? p : 0);
  Eigen::VectorXd t1(p), mean(p);
  Eigen::MatrixXd t2(with_information ? p : 0, with_information ? p : 0);

  for (Eigen::Index i = 0; i < n;) {
    const double t = time_[static_cast<std::size_t>(i)];
    double t0 = 0.0;
    t1.setZero();
    if (with_information) t2.setZero();
    int d = 0;
    for (; i < n && time_[static_cast<std::size_t>(i)] == t; ++i) {
      const double w = std::exp(eta(i) - eta_max);
      const auto xi = x_.row(i).transpose();
      s0 += w;
      s1.noalias() += w * xi;
      if (with_information) s2.noalias() += w * xi * xi.transpose();
      if (event_[static_cast<std::size_t>(i)]) {
        ++d;
        t0 += w;
        t1.noalias() += w * xi;
        if (with_information) t2.noalias() += w * xi * xi.transpose();
        out.log_likelihood += eta(i) - eta_max;
        out.score.noalias() += xi;
      }
    }
    for (int l = 0; l < d; ++l) {
      const double f = ties_ == Ties::Efron ? static_cast<double>(l) / d : 0.0;
      const double den = s0 - f * t0;
      out.log_likelihood -= std::log(den);
      mean = (s1 - f * t1) / den;
      out.score -= mean;
      if (with_information) {
        out.information.noalias() += (s2 - f * t2) / den;
        out.information.noalias() -= mean * mean.transpose();
      }
    }
  }
  return out;
}

double log_partial_likelihood(const Eigen::MatrixXd& x, std::span<const double> times,
                              std::span<const EventFlag> events, const Eigen::VectorXd& beta,
                              Ties ties) {
  return PartialLikelihoodEvaluator(x, times, events, ties).evaluate(beta, false).log_likelihood;
}

namespace {

std::string coefficient_list(const std::vector<std::size_t>& idx,
                             const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t k : idx) {
    if (!s.empty()) s += ", ";
    s += k < names.size() && !names[k].empty() ? names[k] : "x" + std::to_string(k);
  }
  return s;
}

}  // namespace

CoxFit fit_cox(const Eigen::MatrixXd& x, std::span<const double> times,
               std::span<const EventFlag> events, const CoxOptions& options,
               std::vector<std::string> names) {
  check_inputs(x, times, events);
  if (!(options.ridge >= 0.0) || !std::isfinite(options.ridge)) {
    throw ConfigError("ridge must be a nonnegative finite number");
  }
  if (!(options.tol > 0.0)) throw ConfigError("tolerance must be positive");
  const Eigen::Index p = x.cols();
  if (!names.empty() && names.size() != static_cast<std::size_t>(p)) {
    throw DataError("covariate names do not match design width");
  }
  for (Eigen::Index k = 0; k < p; ++k) {
    if (x.col(k).maxCoeff() == x.col(k).minCoeff()) {
      throw DataError("degenerate covariate: " + coefficient_list({static_cast<std::size_t>(k)}, names) +
                      " is constant across all rows");
    }
  }

  const PartialLikelihoodEvaluator eval(x, times, events, options.ties);
  const double ridge = options.ridge;
  const Eigen::MatrixXd ridge_eye = ridge * Eigen::MatrixXd::Identity(p, p);
  auto objective = [&](const Eigen::VectorXd& b) {
    return eval.evaluate(b, false).log_likelihood - 0.5 * ridge * b.squaredNorm();
  };

  Eigen::VectorXd beta = options.initial_beta.value_or(Eigen::VectorXd::Zero(p));
  if (beta.size() != p) throw ConfigError("initial beta has wrong dimension");

  CoxFit fit;
  fit.names = std::move(names);
  fit.ties = options.ties;
  fit.ridge = ridge;
  fit.n_observations = static_cast<std::size_t>(x.rows());
  fit.n_events = eval.n_events();
  fit.null_log_likelihood = eval.evaluate(Eigen::VectorXd::Zero(p), false).log_likelihood;

  PartialLikelihood cur;
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;
  double f = 0.0;
  int iter = 0;
  for (;;) {
    cur = eval.evaluate(beta, true);
    f = cur.log_likelihood - 0.5 * ridge * beta.squaredNorm();
    grad = cur.score - ridge * beta;
    info = cur.information + ridge_eye;
    if (grad.cwiseAbs().maxCoeff() < options.tol) break;
    if (iter >= options.max_iter) {
      throw ConvergenceError("Cox fit did not converge in " + std::to_string(options.max_iter) +
                                 " iterations (gradient max-norm " +
                                 std::to_string(grad.cwiseAbs().maxCoeff()) + ")",
                             beta);
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 0.0) {
      std::vector<std::size_t> bad;
      for (Eigen::Index k = 0; k < p; ++k) {
        if (!(info(k, k) > 0.0)) bad.push_back(static_cast<std::size_t>(k));
      }
      throw SeparationError("information matrix is singular; not identified: " +
                                coefficient_list(bad, fit.names),
                            bad);
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    Eigen::VectorXd candidate;
    bool accepted = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      candidate = beta + t * step;
      const double fc = objective(candidate);
      if (std::isfinite(fc) && fc >= f - 1e-12 * (1.0 + std::abs(f))) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw ConvergenceError("step halving failed to improve the partial likelihood", beta);
    }
    beta = candidate;
    ++iter;
    if (ridge == 0.0) {
      std::vector<std::size_t> bad;
      for (Eigen::Index k = 0; k < p; ++k) {
        if (std::abs(beta(k)) > options.separation_bound) bad.push_back(static_cast<std::size_t>(k));
      }
      if (!bad.empty()) {
        throw SeparationError("monotone partial likelihood (|beta| > " +
                                  std::to_string(options.separation_bound) +
                                  "): " + coefficient_list(bad, fit.names),
                              bad);
      }
    }
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  std::vector<std::size_t> bad;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    for (Eigen::Index k = 0; k < p; ++k) bad.push_back(static_cast<std::size_t>(k));
    throw SeparationError("information matrix is singular; not identified: " +
                              coefficient_list(bad, fit.names),
                          bad);
  }
  fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());
  if (ridge == 0.0) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const double var = fit.covariance(k, k);
      if (!(var > 0.0) || std::sqrt(var) > options.separation_bound) {
        bad.push_back(static_cast<std::size_t>(k));
      }
    }
    if (!bad.empty()) {
      throw SeparationError("monotone partial likelihood (coefficient not identified): " +
                                coefficient_list(bad, fit.names),
                            bad);
    }
  }
  fit.beta = beta;
  fit.log_likelihood = cur.log_likelihood;
  fit.penalized_log_likelihood = f;
  fit.gradient_max_norm = grad.cwiseAbs().maxCoeff();
  fit.n_iterations = iter;
  fit.converged = true;
  return fit;
}

std::vector<HazardRatio> hazard_ratios(const CoxFit& fit, std::span<const double> scales,
                                       double alpha) {
  if (!fit.converged) throw NumericError("hazard ratios require a converged fit");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const auto p = static_cast<std::size_t>(fit.beta.size());
  if (!scales.empty() && scales.size() != p) throw DataError("one scale per coefficient required");
  const double z = special::normal_quantile(1.0 - alpha / 2.0);
  const Eigen::VectorXd se = fit.standard_errors();
  std::vector<HazardRatio> out;
  out.reserve(p);
  for (std::size_t k = 0; k < p; ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    HazardRatio h;
    h.name = k < fit.names.size() ? fit.names[k] : "x" + std::to_string(k);
    h.scale = scales.empty() ? 1.0 : scales[k];
    h.beta = fit.beta(ki);
    h.se = se(ki);
    h.hr = std::exp(h.scale * h.beta);
    h.ci_lower = std::exp(h.scale * (h.beta - z * h.se));
    h.ci_upper = std::exp(h.scale * (h.beta + z * h.se));
    if (h.se > 0.0) {
      h.p_value = special::normal_two_sided_p(h.beta / h.se);
    } else {
      h.p_value = h.beta == 0.0 ? 1.0 : 0.0;
    }
    out.push_back(std::move(h));
  }
  return out;
}

double linear_predictor(const CoxFit& fit, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(fit.beta.size())) {
    throw DataError("covariate vector has wrong dimension");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += fit.beta(static_cast<Eigen::Index>(k)) * x[k];
  return s;
}

Eigen::VectorXd linear_predictor(const CoxFit& fit, const Eigen::MatrixXd& x) {
  if (x.cols() != fit.beta.size()) throw DataError("design matrix has wrong width");
  return x * fit.beta;
}

std::vector<HazardRatio> fit_univariable_groups(std::span<const int> groups,
                                                std::span<const double> times,
                                                std::span<const EventFlag> events, int reference,
                                                const CoxOptions& options) {
  const std::set<int> labels(groups.begin(), groups.end());
  if (!labels.count(reference)) {
    throw DataError("reference group " + std::to_string(reference) + " has no cases");
  }
  std::vector<int> levels;
  for (int l : labels) {
    if (l != reference) levels.push_back(l);
  }
  if (levels.empty()) throw DataError("no non-reference groups to compare");
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(groups.size()),
                                            static_cast<Eigen::Index>(levels.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    names.push_back("group " + std::to_string(levels[k]));
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i] == levels[k]) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = 1.0;
    }
  }
  return hazard_ratios(fit_cox(x, times, events, options, names));
}

Eigen::MatrixXd multivariable_design(std::span<const int> groups,
                                     std::span<const EventFlag> tstage_high, GroupCoding coding,
                                     std::vector<std::string>* names) {
  if (groups.size() != tstage_high.size()) throw DataError("groups and T-stage differ in length");
  const auto n = static_cast<Eigen::Index>(groups.size());
  std::vector<std::string> cols;
  Eigen::MatrixXd x;
  if (coding == GroupCoding::Categorical) {
    const std::set<int> labels(groups.begin(), groups.end());
    if (!labels.count(1)) throw DataError("reference group 1 has no cases");
    std::vector<int> levels(std::next(labels.begin()), labels.end());
    x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(levels.size()) + 1);
    for (std::size_t k = 0; k < levels.size(); ++k) {
      cols.push_back("group " + std::to_string(levels[k]));
      for (Eigen::Index i = 0; i < n; ++i) {
        if (groups[static_cast<std::size_t>(i)] == levels[k]) x(i, static_cast<Eigen::Index>(k)) = 1.0;
      }
    }
  } else {
    x = Eigen::MatrixXd::Zero(n, 2);
    cols.push_back("group");
    for (Eigen::Index i = 0; i < n; ++i) x(i, 0) = groups[static_cast<std::size_t>(i)];
  }
  cols.push_back("t_stage_high");
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, x.cols() - 1) = tstage_high[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  if (names) *names = std::move(cols);
  return x;
}

CoxFit fit_multivariable(std::span<const int> groups, std::span<const EventFlag> tstage_high,
                         std::span<const double> times, std::span<const EventFlag> events,
                         double ridge, GroupCoding coding) {
  std::vector<std::string> names;
  const Eigen::MatrixXd x = multivariable_design(groups, tstage_high, coding, &names);
  CoxOptions opt;
  opt.ridge = ridge;
  return fit_cox(x, times, events, opt, std::move(names));
}

nlohmann::json fit_report(const CoxFit& fit, std::span<const double> scales, double alpha) {
  nlohmann::json j;
  j["ties"] = std::string(to_string(fit.ties));
  j["ridge"] = fit.ridge;
  j["loglik"] = fit.log_likelihood;
  j["penalized_loglik"] = fit.penalized_log_likelihood;
  j["null_loglik"] = fit.null_log_likelihood;
  j["iterations"] = fit.n_iterations;
  j["converged"] = fit.converged;
  j["n"] = fit.n_observations;
  j["n_events"] = fit.n_events;
  j["alpha"] = alpha;
  j["coefficients"] = nlohmann::json::array();
  for (const HazardRatio& h : hazard_ratios(fit, scales, alpha)) {
    j["coefficients"].push_back({{"name", h.name},
                                 {"beta", h.beta},
                                 {"se", h.se},
                                 {"scale", h.scale},
                                 {"hr", h.hr},
                                 {"ci", {h.ci_lower, h.ci_upper}},
                                 {"p", h.p_value}});
  }
  return j;
}

}  // namespace survrisk::coxph
