#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "survrisk/errors.hpp"
#include "survrisk/types.hpp"

namespace survrisk::coxph {

enum class Ties { Efron, Breslow };

std::string_view to_string(Ties ties);

struct CoxOptions {
  Ties ties = Ties::Efron;
  // Penalized objective: log PL - ridge/2 * ||beta||^2, applied to every
  // coefficient.
  double ridge = 0.0;
  // Convergence when the max-norm of the penalized gradient falls below tol.
  double tol = 1e-9;
  int max_iter = 100;
  // Without a ridge, |beta_k| or se_k beyond this bound means the partial
  // likelihood is monotone in that coefficient.
  double separation_bound = 50.0;
  std::optional<Eigen::VectorXd> initial_beta;
};

struct CoxFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  std::vector<std::string> names;
  double log_likelihood = 0.0;            // unpenalized log PL at beta
  double penalized_log_likelihood = 0.0;  // objective actually maximized
  double null_log_likelihood = 0.0;       // log PL at beta = 0
  double gradient_max_norm = 0.0;
  int n_iterations = 0;
  bool converged = false;
  Ties ties = Ties::Efron;
  double ridge = 0.0;
  std::size_t n_observations = 0;
  std::size_t n_events = 0;

  Eigen::VectorXd standard_errors() const;
};

// Partial likelihood is monotone in the listed coefficients (or they are not
// identified by the risk sets).
class SeparationError : public NumericError {
 public:
  SeparationError(const std::string& what, std::vector<std::size_t> coefficients)
      : NumericError(what), coefficients_(std::move(coefficients)) {}
  const std::vector<std::size_t>& coefficients() const noexcept { return coefficients_; }

 private:
  std::vector<std::size_t> coefficients_;
};

// Newton iterations ran out; carries the last iterate.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_beta)
      : NumericError(what), last_beta_(std::move(last_beta)) {}
  const Eigen::VectorXd& last_beta() const noexcept { return last_beta_; }

 private:
  Eigen::VectorXd last_beta_;
};

// Log partial likelihood, its gradient and the observed information
// (negative Hessian), all unpenalized.
struct PartialLikelihood {
  double log_likelihood = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

// Evaluates the partial likelihood of a fixed dataset at arbitrary beta.
// Covariates are centered internally; this does not change any output.
class PartialLikelihoodEvaluator {
 public:
  PartialLikelihoodEvaluator(const Eigen::MatrixXd& x, std::span<const double> times,
                             std::span<const EventFlag> events, Ties ties);

  PartialLikelihood evaluate(const Eigen::VectorXd& beta, bool with_information = true) const;

  Eigen::Index n_covariates() const noexcept { return x_.cols(); }
  std::size_t n_events() const noexcept { return n_events_; }

 private:
  // Rows sorted by descending time; tie blocks share a time value.
  Eigen::MatrixXd x_;
  std::vector<double> time_;
  EventFlags event_;
  Ties ties_;
  std::size_t n_events_ = 0;
};

double log_partial_likelihood(const Eigen::MatrixXd& x, std::span<const double> times,
                              std::span<const EventFlag> events, const Eigen::VectorXd& beta,
                              Ties ties = Ties::Efron);

// Damped Newton maximization of the (penalized) log partial likelihood.
// Errors: DataError for invalid input or a constant covariate, SeparationError,
// ConvergenceError.
CoxFit fit_cox(const Eigen::MatrixXd& x, std::span<const double> times,
               std::span<const EventFlag> events, const CoxOptions& options = {},
               std::vector<std::string> names = {});

struct HazardRatio {
  std::string name;
  double beta = 0.0;
  double se = 0.0;
  double hr = 1.0;
  double ci_lower = 1.0;
  double ci_upper = 1.0;
  double p_value = 1.0;
  double scale = 1.0;
};

// exp(scale * beta) with Wald intervals and two-sided Wald p-values. An empty
// scales span means unit scale for every coefficient.
std::vector<HazardRatio> hazard_ratios(const CoxFit& fit, std::span<const double> scales = {},
                                       double alpha = 0.05);

double linear_predictor(const CoxFit& fit, std::span<const double> x);
// One score per design-matrix row.
Eigen::VectorXd linear_predictor(const CoxFit& fit, const Eigen::MatrixXd& x);

// Univariable Cox model on one-hot group indicators against `reference`.
// Returns one ratio per non-reference level, in ascending label order.
std::vector<HazardRatio> fit_univariable_groups(std::span<const int> groups,
                                                std::span<const double> times,
                                                std::span<const EventFlag> events,
                                                int reference = 1, const CoxOptions& options = {});

enum class GroupCoding { Categorical, Ordinal };

inline constexpr double kDefaultMultivariableRidge = 0.02;

// Groups (one-hot against group 1, or a single ordinal column) plus a binary
// high T-stage indicator, fitted with an L2 penalty.
CoxFit fit_multivariable(std::span<const int> groups, std::span<const EventFlag> tstage_high,
                         std::span<const double> times, std::span<const EventFlag> events,
                         double ridge = kDefaultMultivariableRidge,
                         GroupCoding coding = GroupCoding::Categorical);

// Design matrix used by fit_multivariable.
Eigen::MatrixXd multivariable_design(std::span<const int> groups,
                                     std::span<const EventFlag> tstage_high, GroupCoding coding,
                                     std::vector<std::string>* names = nullptr);

// beta, se, hr (with scale), ci, p, loglik, iterations, ties, ridge.
nlohmann::json fit_report(const CoxFit& fit, std::span<const double> scales = {},
                          double alpha = 0.05);

}  // namespace survrisk::coxph
