#pragma once

namespace survrisk::special {

// Regularized lower incomplete gamma P(a, x). Series for x < a + 1, Lentz
// continued fraction otherwise; relative accuracy ~1e-14.
double gamma_p(double a, double x);
// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed without
// cancellation.
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution.
double chi2_sf(double x, double df);

double normal_cdf(double z);
// Two-sided p-value for a standard normal statistic.
double normal_two_sided_p(double z);
// Inverse standard normal CDF for p in (0, 1).
double normal_quantile(double p);

}  // namespace survrisk::special
