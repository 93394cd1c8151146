#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "forge/fixture.hpp"
#include "forge/missforest.hpp"
#include "test_util.hpp"

using namespace forge;
using namespace forge::test;

namespace {

ImputationPlan plan_for(std::vector<std::vector<std::string>> stages, std::size_t trees = 50) {
  ImputationPlan plan;
  plan.stages = std::move(stages);
  plan.forest.n_trees = trees;
  plan.forest.min_leaf = 1;
  plan.forest.seed = 3;
  plan.forest.threads = 1;
  return plan;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(ImputationPlanParse, Grammar) {
  auto plan = parse_imputation_plan(
      "trees 100\nmax_iterations 7\nmin_leaf 5\nseed 4\nexclude Police_Force\n"
      "stage 2: C, D trees=20\nstage 1: A, B\n");
  ASSERT_EQ(plan.stages.size(), 2u);
  EXPECT_EQ(plan.stages[0], (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(plan.stages[1], (std::vector<std::string>{"C", "D"}));
  EXPECT_EQ(plan.trees.at("D"), 20u);
  EXPECT_EQ(plan.forest.n_trees, 100u);
  EXPECT_EQ(plan.max_iterations, 7u);
  EXPECT_EQ(plan.forest.seed, 4u);
  EXPECT_EQ(plan.exclude_predictors, std::vector<std::string>{"Police_Force"});
  EXPECT_THROW(parse_imputation_plan("stage 1: A\nstage 2: A\n"), Error);
  EXPECT_THROW(parse_imputation_plan("wibble 3\n"), Error);
}

TEST(ImputationPlanParse, DefaultPlanLoads) {
  auto plan = load_imputation_plan(std::filesystem::path(FORGE_DEFAULT_CONFIG_DIR) / "imputation.plan");
  EXPECT_EQ(plan.forest.n_trees, 100u);
  EXPECT_EQ(plan.stages.size(), 7u);
}

TEST(MissForest, CompleteColumnUntouched) {
  auto m = mask_and_recover_table(200, 0.0, 0.2, 1);
  auto [out, report] = missforest_impute(m.masked, plan_for({{"y", "c"}}, 20));
  EXPECT_EQ(out.column("y"), m.masked.column("y"));
  for (const auto& c : report.columns) {
    if (c.column == "y") {
      EXPECT_EQ(c.missing, 0u);
      EXPECT_EQ(c.iterations, 0u);
    }
  }
}

TEST(MissForest, MaskAndRecover) {
  auto m = mask_and_recover_table(500, 0.2, 0.3, 17);
  auto [out, report] = missforest_impute(m.masked, plan_for({{"y", "c"}}));
  EXPECT_EQ(out.missing_cells(), 0u);

  std::size_t close = 0;
  for (auto r : m.masked_rows_y) {
    double truth = m.complete.column("y").values()[r];
    close += std::fabs(out.column("y").values()[r] - truth) <= 0.15 * std::fabs(truth) ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(close), 0.8 * static_cast<double>(m.masked_rows_y.size()));

  std::size_t exact = 0;
  for (auto r : m.masked_rows_c) exact += out.column("c").codes()[r] == m.complete.column("c").codes()[r] ? 1 : 0;
  EXPECT_GE(static_cast<double>(exact), 0.9 * static_cast<double>(m.masked_rows_c.size()));

  // Observed cells are bitwise stable.
  for (std::size_t c = 0; c < out.n_cols(); ++c) {
    const auto& before = m.masked.column(c);
    const auto& after = out.column(c);
    for (std::size_t r = 0; r < out.n_rows(); ++r) {
      if (before.is_missing_at(r)) continue;
      if (before.kind() == FeatureKind::Numerical) {
        ASSERT_TRUE(same_bits(before.values()[r], after.values()[r]));
      } else {
        ASSERT_EQ(before.codes()[r], after.codes()[r]);
      }
    }
  }
  for (const auto& c : report.columns) {
    EXPECT_GE(c.iterations, 1u);
    EXPECT_LE(c.iterations, 10u);
  }
}

TEST(MissForest, Deterministic) {
  auto m = mask_and_recover_table(300, 0.2, 0.2, 5);
  auto plan = plan_for({{"c"}, {"y"}}, 20);
  auto a = missforest_impute(m.masked, plan).first;
  plan.forest.threads = 3;
  auto b = missforest_impute(m.masked, plan).first;
  EXPECT_EQ(a, b);
}

TEST(MissForest, NoObservedValues) {
  DataTable t({numerical("x", {1, 2, 3}), numerical("y", {kMissingValue, kMissingValue, kMissingValue})});
  try {
    missforest_impute(t, plan_for({{"y"}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoObservedValues);
  }
}

TEST(MissForest, AbsentAndUnplannedColumnsReported) {
  auto m = mask_and_recover_table(100, 0.1, 0.1, 2);
  auto [out, report] = missforest_impute(m.masked, plan_for({{"y", "Nope"}}, 10));
  EXPECT_EQ(report.absent, std::vector<std::string>{"Nope"});
  EXPECT_EQ(report.unplanned, std::vector<std::string>{"c"});
  EXPECT_EQ(out.column("y").missing_count(), 0u);
  EXPECT_NE(format_imputation_report(report).find("Nope,-1"), std::string::npos);
}
