#include "survrisk/concordance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "survrisk/errors.hpp"

namespace survrisk::concordance {

namespace {

// Counts of inserted score ranks.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t rank) {
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  // Number of inserted ranks < rank.
  std::int64_t below(std::size_t rank) const {
    std::int64_t s = 0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::int64_t> tree_;
};

ConcordanceResult count_pairs(std::span<const double> scores, std::span<const double> times,
                              std::span<const EventFlag> events,
                              std::span<const std::size_t> subjects) {
  const std::size_t m = subjects.size();

  // Dense ranks of scores among the selected subjects.
  std::vector<double> distinct(m);
  for (std::size_t i = 0; i < m; ++i) distinct[i] = scores[subjects[i]];
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> rank(m);
  for (std::size_t i = 0; i < m; ++i) {
    rank[i] = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), scores[subjects[i]]) - distinct.begin());
  }

  // Descending time; the tree holds everyone with a strictly later time.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return times[subjects[a]] > times[subjects[b]];
  });

  ConcordanceResult r;
  Fenwick later(distinct.size());
  std::int64_t n_later = 0;
  std::vector<std::size_t> censored_ranks;
  for (std::size_t i = 0; i < m;) {
    const double t = times[subjects[order[i]]];
    std::size_t j = i;
    censored_ranks.clear();
    for (; j < m && times[subjects[order[j]]] == t; ++j) {
      if (!events[subjects[order[j]]]) censored_ranks.push_back(rank[order[j]]);
    }
    std::sort(censored_ranks.begin(), censored_ranks.end());
    for (std::size_t k = i; k < j; ++k) {
      if (!events[subjects[order[k]]]) continue;
      const std::size_t rk = rank[order[k]];
      // Partners with a later time.
      const std::int64_t lower = later.below(rk);
      const std::int64_t tied = later.below(rk + 1) - lower;
      const std::int64_t higher = n_later - lower - tied;
      // Censored partners at the same time.
      const auto lo = std::lower_bound(censored_ranks.begin(), censored_ranks.end(), rk);
      const auto hi = std::upper_bound(censored_ranks.begin(), censored_ranks.end(), rk);
      const auto c_lower = static_cast<std::int64_t>(lo - censored_ranks.begin());
      const auto c_tied = static_cast<std::int64_t>(hi - lo);
      const auto c_higher = static_cast<std::int64_t>(censored_ranks.end() - hi);
      r.n_concordant += lower + c_lower;
      r.n_tied_score += tied + c_tied;
      r.n_discordant += higher + c_higher;
    }
    for (std::size_t k = i; k < j; ++k) later.add(rank[order[k]]);
    n_later += static_cast<std::int64_t>(j - i);
    i = j;
  }
  r.n_comparable = r.n_concordant + r.n_discordant + r.n_tied_score;
  if (r.n_comparable == 0) throw UndefinedMetricError("C-index undefined: no comparable pairs");
  r.c_index = (static_cast<double>(r.n_concordant) + 0.5 * static_cast<double>(r.n_tied_score)) /
              static_cast<double>(r.n_comparable);
  return r;
}

void check_inputs(std::span<const double> scores, std::span<const double> times,
                  std::span<const EventFlag> events) {
  if (scores.size() != times.size() || scores.size() != events.size()) {
    throw DataError("scores, times and events differ in length");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("non-finite score");
    if (!std::isfinite(times[i])) throw DataError("non-finite time");
  }
}

}  // namespace

ConcordanceResult c_index(std::span<const double> scores, std::span<const double> times,
                          std::span<const EventFlag> events) {
  check_inputs(scores, times, events);
  std::vector<std::size_t> all(scores.size());
  std::iota(all.begin(), all.end(), 0);
  return count_pairs(scores, times, events, all);
}

ConcordanceResult c_index(std::span<const double> scores, std::span<const double> times,
                          std::span<const EventFlag> events, std::span<const std::size_t> indices) {
  check_inputs(scores, times, events);
  for (std::size_t i : indices) {
    if (i >= scores.size()) throw DataError("subject index out of range");
  }
  return count_pairs(scores, times, events, indices);
}

}  // namespace survrisk::concordance
