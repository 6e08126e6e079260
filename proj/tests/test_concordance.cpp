#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "survrisk/concordance.hpp"
#include "survrisk/errors.hpp"

using namespace survrisk;
using survrisk::concordance::c_index;

TEST(CIndex, PerfectRanking) {
  const std::vector<double> t{1, 2, 3, 4, 5};
  const std::vector<double> s{-1, -2, -3, -4, -5};
  const EventFlags e(5, 1);
  const auto r = c_index(s, t, e);
  EXPECT_EQ(r.c_index, 1.0);
  EXPECT_EQ(r.n_comparable, 10);
}

TEST(CIndex, AllScoresTied) {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<double> s(4, 7.0);
  const EventFlags e{1, 0, 1, 0};
  const auto r = c_index(s, t, e);
  EXPECT_EQ(r.c_index, 0.5);
  EXPECT_EQ(r.n_tied_score, r.n_comparable);
}

TEST(CIndex, ThreeSubjectEnumeration) {
  const std::vector<double> s{3, 1, 2}, t{1, 2, 3};
  const EventFlags e{1, 1, 1};
  const auto r = c_index(s, t, e);
  EXPECT_EQ(r.n_concordant, 2);
  EXPECT_EQ(r.n_discordant, 1);
  EXPECT_DOUBLE_EQ(r.c_index, 2.0 / 3.0);
}

TEST(CIndex, TiedTimeConventions) {
  // Both events at t=2: not comparable. Event vs censor at t=3: comparable.
  const std::vector<double> t{2, 2, 3, 3};
  const std::vector<double> s{1, 2, 5, 4};
  const EventFlags e{1, 1, 0, 1};
  const auto ref = oracle::harrell_pairs(s, t, e);
  const auto r = c_index(s, t, e);
  EXPECT_EQ(r.n_comparable, ref.comparable());
  EXPECT_EQ(r.n_concordant, ref.concordant);
  EXPECT_EQ(r.n_comparable, 5);
  EXPECT_EQ(r.n_discordant, 5);
}

TEST(CIndex, MatchesPairEnumerationOnRandomInstances) {
  std::mt19937_64 rng(2718);
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = 2 + rng() % 199;
    const int tlevels = 1 + static_cast<int>(rng() % 40);
    const int slevels = 1 + static_cast<int>(rng() % 60);
    std::vector<double> s(n), t(n);
    EventFlags e(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = 1.0 + static_cast<double>(rng() % tlevels);
      s[i] = static_cast<double>(rng() % slevels) * 0.37 - 3.0;
      e[i] = rng() % 3 != 0;
    }
    const auto ref = oracle::harrell_pairs(s, t, e);
    if (ref.comparable() == 0) {
      EXPECT_THROW(c_index(s, t, e), UndefinedMetricError);
      continue;
    }
    const auto r = c_index(s, t, e);
    ASSERT_EQ(r.n_concordant, ref.concordant) << inst;
    ASSERT_EQ(r.n_discordant, ref.discordant) << inst;
    ASSERT_EQ(r.n_tied_score, ref.tied) << inst;
    ASSERT_EQ(r.n_comparable, ref.comparable());
    EXPECT_EQ(r.c_index, (static_cast<double>(ref.concordant) + 0.5 * static_cast<double>(ref.tied)) /
                             static_cast<double>(ref.comparable()));
  }
}

TEST(CIndex, IndexSubsetMatchesMaterializedResample) {
  std::mt19937_64 rng(5);
  const std::size_t n = 150;
  std::vector<double> s(n), t(n);
  EventFlags e(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = 1.0 + static_cast<double>(rng() % 30);
    s[i] = static_cast<double>(rng() % 10);
    e[i] = rng() % 2;
  }
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = rng() % n;
    std::vector<double> s2, t2;
    EventFlags e2;
    for (auto i : idx) s2.push_back(s[i]), t2.push_back(t[i]), e2.push_back(e[i]);
    EXPECT_EQ(c_index(s, t, e, idx), c_index(s2, t2, e2));
  }
}

TEST(CIndex, StrictlyIncreasingTransformInvariance) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> s(300), t(300);
  EventFlags e(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::round(z(rng) * 4) / 4;
    t[i] = std::exp(z(rng) - 0.5 * s[i]);
    e[i] = rng() % 4 != 0;
  }
  std::vector<double> ts;
  for (double v : s) ts.push_back(std::exp(3 * v) + 2);
  EXPECT_EQ(c_index(s, t, e), c_index(ts, t, e));
}

TEST(CIndex, SignFlipComplements) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> s(200), t(200), neg(200);
  EventFlags e(200);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = z(rng), neg[i] = -s[i], t[i] = std::exp(z(rng)), e[i] = rng() % 2;
  }
  const auto a = c_index(s, t, e), b = c_index(neg, t, e);
  ASSERT_EQ(a.n_tied_score, 0);
  EXPECT_NEAR(a.c_index + b.c_index, 1.0, 1e-15);
}

TEST(CIndex, DiscreteGroupsAsScores) {
  const std::vector<double> g{1, 1, 2, 3, 5, 4}, t{9, 8, 6, 4, 1, 2};
  const EventFlags e{0, 1, 1, 1, 1, 0};
  const auto r = c_index(g, t, e);
  const auto ref = oracle::harrell_pairs(g, t, e);
  EXPECT_EQ(r.n_concordant, ref.concordant);
  EXPECT_EQ(r.n_tied_score, ref.tied);
}

TEST(CIndex, Errors) {
  const std::vector<double> t{1, 2}, s{1, 2};
  const EventFlags none{0, 0};
  EXPECT_THROW(c_index(s, t, none), UndefinedMetricError);
  const std::vector<double> short_s{1};
  const EventFlags e{1, 1};
  EXPECT_THROW(c_index(short_s, t, e), DataError);
  const std::vector<double> nan_s{1, std::nan("")};
  EXPECT_THROW(c_index(nan_s, t, e), DataError);
  const std::vector<std::size_t> idx{0, 5};
  EXPECT_THROW(c_index(s, t, e, idx), DataError);
}
