#pragma once

// Brute-force reference implementations used only by the tests. They follow
// the textbook definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

namespace oracle {

struct PairCounts {
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t tied = 0;
  std::int64_t comparable() const { return concordant + discordant + tied; }
};

// O(n^2) Harrell pair enumeration.
inline PairCounts harrell_pairs(const std::vector<double>& score, const std::vector<double>& time,
                                const std::vector<std::uint8_t>& event) {
  PairCounts c;
  const std::size_t n = score.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Identify the member failing first, if the pair is comparable.
      long first = -1, second = -1;
      if (time[i] < time[j] && event[i]) {
        first = static_cast<long>(i), second = static_cast<long>(j);
      } else if (time[j] < time[i] && event[j]) {
        first = static_cast<long>(j), second = static_cast<long>(i);
      } else if (time[i] == time[j] && event[i] != event[j]) {
        first = event[i] ? static_cast<long>(i) : static_cast<long>(j);
        second = event[i] ? static_cast<long>(j) : static_cast<long>(i);
      }
      if (first < 0) continue;
      const double sf = score[static_cast<std::size_t>(first)];
      const double ss = score[static_cast<std::size_t>(second)];
      if (sf > ss) {
        ++c.concordant;
      } else if (sf < ss) {
        ++c.discordant;
      } else {
        ++c.tied;
      }
    }
  }
  return c;
}

// Log partial likelihood straight from its definition, Efron or Breslow.
// x is row-major n x p.
inline double partial_likelihood(const std::vector<std::vector<double>>& x,
                                 const std::vector<double>& time,
                                 const std::vector<std::uint8_t>& event,
                                 const std::vector<double>& beta, bool efron = true) {
  const std::size_t n = time.size();
  auto eta = [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) s += beta[k] * x[i][k];
    return s;
  };
  std::set<double> event_times;
  for (std::size_t i = 0; i < n; ++i) {
    if (event[i]) event_times.insert(time[i]);
  }
  double ll = 0.0;
  for (double t : event_times) {
    double risk = 0.0, tied = 0.0;
    int d = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (time[j] >= t) risk += std::exp(eta(j));
      if (time[j] == t && event[j]) {
        tied += std::exp(eta(j));
        ll += eta(j);
        ++d;
      }
    }
    for (int l = 0; l < d; ++l) {
      ll -= std::log(risk - (efron ? static_cast<double>(l) / d : 0.0) * tied);
    }
  }
  return ll;
}

// Maximizer of a unimodal function on [lo, hi].
inline double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                                 double tol = 1e-9) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Exhaustive grid on [lo, hi] followed by golden-section refinement in the
// bracketing cell pair.
inline double grid_golden_max(const std::function<double(double)>& f, double lo, double hi,
                              double step, double tol = 1e-9) {
  double best = lo, best_val = f(lo);
  for (double b = lo + step; b <= hi + 1e-12; b += step) {
    const double v = f(b);
    if (v > best_val) best = b, best_val = v;
  }
  return golden_section_max(f, std::max(lo, best - step), std::min(hi, best + step), tol);
}

}  // namespace oracle
