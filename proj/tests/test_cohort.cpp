#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "survrisk/cohort.hpp"
#include "survrisk/coxph.hpp"
#include "survrisk/errors.hpp"
#include "survrisk/riskmodel.hpp"
#include "test_util.hpp"

using namespace survrisk;
using namespace survrisk::cohort;

namespace {

const char* kHeader =
    "case_id,surgery_year,pct_gp3,pct_gp4,pct_gp5,tumor_present,gg,t_category,followup_years,"
    "dss_event,os_event\n";

Case make_case(std::string id, double followup, bool dss, std::optional<bool> os = std::nullopt,
               bool tumor = true) {
  Case c;
  c.case_id = std::move(id);
  c.surgery_year = 2005;
  c.pct_gp3 = tumor ? 60 : 0;
  c.pct_gp4 = tumor ? 40 : 0;
  c.pct_gp5 = 0;
  c.tumor_present = tumor;
  c.followup_years = followup;
  c.dss_event = dss;
  c.os_event = os;
  return c;
}

}  // namespace

TEST(LoadCohort, WellFormedFileLoadsEveryRowSorted) {
  testutil::TempDir dir("cohort");
  const auto path = dir.file("c.csv");
  testutil::write_text(path, std::string(kHeader) +
                                 "b,2001,50,30,20,1,3,T3,10.5,1,1\n"
                                 "a,1998,100,0,0,1,,T2,12,0,\n"
                                 "c,2010,0,0,100,1,5,,3.25,0,0\n");
  const auto loaded = load_cohort(path);
  ASSERT_EQ(loaded.cohort.size(), 3u);
  EXPECT_TRUE(loaded.row_errors.empty());
  EXPECT_TRUE(loaded.cohort.exclusion_log().empty());
  EXPECT_EQ(loaded.cohort[0].case_id, "a");
  EXPECT_EQ(loaded.cohort[1].case_id, "b");
  EXPECT_FALSE(loaded.cohort[0].pathologist_gg.has_value());
  EXPECT_FALSE(loaded.cohort[0].os_event.has_value());
  EXPECT_EQ(loaded.cohort[1].t_category, TCategory::T3);
  EXPECT_EQ(loaded.cohort[1].pathologist_gg, 3);
  EXPECT_FALSE(loaded.cohort[2].t_category.has_value());
}

TEST(LoadCohort, PatternSumViolationRejectsRow) {
  testutil::TempDir dir("cohort");
  const auto path = dir.file("c.csv");
  testutil::write_text(path, std::string(kHeader) +
                                 "a,2001,50,30,18,1,3,T3,10.5,1,1\n"
                                 "b,2001,50,30,20,1,3,T3,10.5,1,1\n");
  const auto loaded = load_cohort(path);
  ASSERT_EQ(loaded.cohort.size(), 1u);
  ASSERT_EQ(loaded.row_errors.size(), 1u);
  EXPECT_EQ(loaded.row_errors[0].case_id, "a");
  EXPECT_EQ(loaded.row_errors[0].reason, "pattern sum violation");
  EXPECT_EQ(loaded.row_errors[0].line, 2u);
}

TEST(LoadCohort, NonNumericPercentageIsRowErrorUnlessAllRowsFail) {
  testutil::TempDir dir("cohort");
  const auto path = dir.file("c.csv");
  testutil::write_text(path, std::string(kHeader) + "a,2001,x,30,20,1,3,T3,10.5,1,1\n" +
                                 "b,2001,50,30,20,1,3,T3,10.5,1,1\n");
  const auto loaded = load_cohort(path);
  EXPECT_EQ(loaded.cohort.size(), 1u);
  EXPECT_EQ(loaded.row_errors.at(0).reason, "non-numeric pct_gp3");

  testutil::write_text(path, std::string(kHeader) + "a,2001,x,30,20,1,3,T3,10.5,1,1\n");
  EXPECT_THROW(load_cohort(path), DataError);
}

TEST(LoadCohort, DuplicateIdNamesTheDuplicate) {
  testutil::TempDir dir("cohort");
  const auto path = dir.file("c.csv");
  testutil::write_text(path, std::string(kHeader) + "dup,2001,50,30,20,1,3,T3,10.5,1,1\n" +
                                 "dup,2002,50,30,20,1,3,T3,10.5,1,1\n");
  try {
    load_cohort(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("dup"), std::string::npos);
  }
}

TEST(LoadCohort, MissingColumnIsSchemaError) {
  testutil::TempDir dir("cohort");
  const auto path = dir.file("c.csv");
  testutil::write_text(path, "case_id,surgery_year\na,2001\n");
  EXPECT_THROW(load_cohort(path), DataError);
  EXPECT_THROW(load_cohort(path, "2"), DataError);
}

TEST(LoadCohort, RoundTripIsFixedPoint) {
  SimulationParams p;
  p.n_cases = 200;
  p.seed = 11;
  const Cohort sim = apply_exclusions(simulate_cohort(p));
  testutil::TempDir dir("cohort");
  write_cohort(dir.file("a.csv"), sim);
  const Cohort once = load_cohort(dir.file("a.csv")).cohort;
  EXPECT_EQ(once, sim);
  write_cohort(dir.file("b.csv"), once);
  EXPECT_EQ(testutil::read_text(dir.file("a.csv")), testutil::read_text(dir.file("b.csv")));
  EXPECT_EQ(load_cohort(dir.file("b.csv")).cohort, once);
}

TEST(Exclusions, EarlyDeathAndNoTumorAreRemovedWithReasons) {
  const Cohort c({make_case("a", 0.05, true, true), make_case("b", 0.05, false, false),
                  make_case("c", 5.0, false, false, /*tumor=*/false),
                  make_case("d", 0.05, false, true)},
                 "t");
  const Cohort out = apply_exclusions(c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].case_id, "b");
  ASSERT_EQ(out.exclusion_log().size(), 3u);
  EXPECT_EQ(out.exclusion_log()[0], (Exclusion{"a", "death within 30 days"}));
  EXPECT_EQ(out.exclusion_log()[1], (Exclusion{"c", "no tumor"}));
  // Other-cause death within 30 days qualifies as well.
  EXPECT_EQ(out.exclusion_log()[2], (Exclusion{"d", "death within 30 days"}));
}

TEST(Exclusions, ThirtyDayBoundaryUsesJulianYear) {
  const Cohort c({make_case("in", 29.9 / 365.25, true, true),
                  make_case("out", 30.0 / 365.25, true, true)},
                 "t");
  const Cohort out = apply_exclusions(c);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].case_id, "out");
}

TEST(Exclusions, Idempotent) {
  SimulationParams p;
  p.n_cases = 500;
  p.seed = 3;
  const Cohort once = apply_exclusions(simulate_cohort(p));
  EXPECT_EQ(apply_exclusions(once), once);
}

TEST(ValidationSets, V1IsIdentityAndV2IsSubset) {
  SimulationParams p;
  p.seed = 5;
  const Cohort all = simulate_cohort(p);
  EXPECT_EQ(select_validation_set(all, ValidationSet::V1), all);
  const Cohort v2 = select_validation_set(all, ValidationSet::V2);
  std::set<std::string> ids;
  for (const auto& c : all.cases()) ids.insert(c.case_id);
  for (const auto& c : v2.cases()) {
    EXPECT_TRUE(ids.count(c.case_id));
    EXPECT_GE(c.surgery_year, 2000);
    EXPECT_TRUE(c.pathologist_gg.has_value());
  }
  const Cohort v2_1995 = select_validation_set(all, ValidationSet::V2, 1995);
  EXPECT_GT(v2_1995.size(), v2.size());
  for (const auto& c : v2.cases()) EXPECT_TRUE(v2_1995.find(c.case_id));
}

TEST(ValidationSets, V2SizeFromGradeGroupCounts) {
  // Graded post-2000 cases with counts (608,473,224,127,85), plus ungraded and
  // pre-2000 cases that must be dropped.
  std::vector<Case> cases;
  const int counts[5] = {608, 473, 224, 127, 85};
  int id = 0;
  for (int g = 0; g < 5; ++g) {
    for (int k = 0; k < counts[g]; ++k) {
      Case c = make_case("g" + std::to_string(id++), 10, false, false);
      c.pathologist_gg = g + 1;
      c.surgery_year = 2000 + (k % 15);
      cases.push_back(c);
    }
  }
  for (int k = 0; k < 300; ++k) {
    Case c = make_case("u" + std::to_string(k), 10, false, false);
    c.surgery_year = 1995 + (k % 20);
    if (c.surgery_year < 2000 && k % 2) c.pathologist_gg = 2;
    cases.push_back(c);
  }
  const Cohort all(std::move(cases), "t");
  EXPECT_EQ(select_validation_set(all, ValidationSet::V2).size(), 1517u);
}

TEST(Simulation, DefaultEffectSizes) {
  SimulationParams p;
  EXPECT_NEAR(p.beta_gp4, std::log(1.48) / 10.0, 1e-12);
  EXPECT_NEAR(p.beta_gp5, std::log(1.51) / 10.0, 1e-12);
}

TEST(Simulation, SameSeedIsByteIdentical) {
  SimulationParams p;
  p.n_cases = 300;
  p.seed = 99;
  testutil::TempDir dir("sim");
  write_cohort(dir.file("a.csv"), simulate_cohort(p));
  write_cohort(dir.file("b.csv"), simulate_cohort(p));
  EXPECT_EQ(testutil::read_text(dir.file("a.csv")), testutil::read_text(dir.file("b.csv")));
  p.seed = 100;
  write_cohort(dir.file("c.csv"), simulate_cohort(p));
  EXPECT_NE(testutil::read_text(dir.file("a.csv")), testutil::read_text(dir.file("c.csv")));
}

TEST(Simulation, CasesSatisfyInvariants) {
  SimulationParams p;
  p.seed = 17;
  const Cohort c = simulate_cohort(p);
  ASSERT_EQ(c.size(), p.n_cases);
  for (const auto& k : c.cases()) {
    EXPECT_FALSE(validate_case(k).has_value()) << k.case_id;
    if (k.dss_event) EXPECT_TRUE(k.os_event.value());
  }
}

TEST(Simulation, EventFractionMatchesCalibrationTarget) {
  // Target 134 / 2807 observed disease-specific deaths.
  SimulationParams p;
  p.seed = 2024;
  const Cohort c = simulate_cohort(p);
  std::size_t events = 0;
  for (const auto& k : c.cases()) events += k.dss_event;
  const double frac = static_cast<double>(events) / static_cast<double>(c.size());
  EXPECT_GE(frac, 0.03);
  EXPECT_LE(frac, 0.07);
}

TEST(Simulation, InvalidParamsRejected) {
  SimulationParams p;
  p.gg_mixture[0] += 0.1;
  EXPECT_THROW(simulate_cohort(p), ConfigError);
  p = {};
  p.censor_min_years = 30;
  EXPECT_THROW(simulate_cohort(p), ConfigError);
  p = {};
  p.dirichlet_alphas[2][1] = 0.0;
  EXPECT_THROW(simulate_cohort(p), ConfigError);
}

TEST(Simulation, HazardRatiosConvergeToTruth) {
  // n = 5000 with enough events that the estimate is tight.
  SimulationParams p;
  p.seed = 5000;
  p.n_cases = 5000;
  p.baseline_hazard = 0.01;
  const Cohort c = simulate_cohort(p);
  const auto fit = riskmodel::fit_pattern_model(c, riskmodel::Outcome::DSS);
  const std::vector<double> per10{10.0, 10.0};
  const auto hr = coxph::hazard_ratios(fit, per10);
  EXPECT_NEAR(hr[0].hr, std::exp(10 * p.beta_gp4), 0.1);
  EXPECT_NEAR(hr[1].hr, std::exp(10 * p.beta_gp5), 0.1);
}
