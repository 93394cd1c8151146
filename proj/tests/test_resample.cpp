#include <gtest/gtest.h>

#include <random>

#include "forge/fixture.hpp"
#include "forge/resample.hpp"
#include "test_util.hpp"

using namespace forge;
using namespace forge::test;

TEST(ClassWeights, DftSeverityCounts) {
  auto w = class_weights({2539715, 345997, 30171});
  const double n = 2539715.0 + 345997.0 + 30171.0;
  EXPECT_NEAR(w[ClassLabel::Slight], n / (3 * 2539715.0), 1e-12);
  EXPECT_NEAR(w[ClassLabel::Slight], 0.3827, 1e-4);
  EXPECT_NEAR(w[ClassLabel::Serious], 2.809, 1e-3);
  EXPECT_NEAR(w[ClassLabel::Fatal], 32.21, 1e-2);
  // Within 2% of the weights reported for the imputed-data experiment.
  const std::array<double, 3> reported{0.383, 2.814, 32.105};
  for (std::size_t c = 0; c < 3; ++c) EXPECT_LT(std::fabs(w[c] / reported[c] - 1.0), 0.02);
}

TEST(ClassWeights, BalancedAndZero) {
  auto w = class_weights({10, 10, 10});
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(w[c], 1.0);
  try {
    class_weights({10, 0, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroCount);
  }
}

namespace {

DataTable line_table() {
  // Class 0: 20 scattered rows; class 1: 6 rows on y = x; class 2: 5 rows.
  std::vector<double> x, y;
  std::vector<std::int32_t> g, t;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  for (int i = 0; i < 20; ++i) {
    x.push_back(u(rng));
    y.push_back(u(rng));
    g.push_back(i % 3);
    t.push_back(0);
  }
  for (int i = 0; i < 6; ++i) {
    double v = 1.5 * i + 0.25;
    x.push_back(v);
    y.push_back(v);
    g.push_back(i % 2);
    t.push_back(1);
  }
  for (int i = 0; i < 5; ++i) {
    x.push_back(u(rng));
    y.push_back(u(rng));
    g.push_back(2);
    t.push_back(2);
  }
  return DataTable({numerical("x", x), numerical("y", y), nominal("g", g), target(t)});
}

}  // namespace

TEST(Smote, PointsOnALineStayOnIt) {
  auto t = line_table();
  auto res = smote_with_parents(t, SmoteConfig::equalize(class_counts(t), 3, 5));
  const auto& out = res.table;
  EXPECT_EQ(class_counts(out), (ClassCounts{20, 20, 20}));
  for (std::size_t r = res.original_rows; r < out.n_rows(); ++r) {
    if (out.target().codes()[r] != 1) continue;
    EXPECT_EQ(out.column("x").values()[r], out.column("y").values()[r]);
  }
}

TEST(Smote, CoincidentPointsDuplicate) {
  DataTable t({numerical("x", {1, 2, 3, 4, 7, 7}), numerical("y", {0, 1, 0, 1, 5, 5}),
               target({0, 0, 0, 0, 1, 1})});
  SmoteConfig cfg;
  cfg.k_neighbors = 1;
  cfg.target_counts = {4, 4, 0};
  auto out = smote(t, cfg);
  ASSERT_EQ(out.n_rows(), 8u);
  for (std::size_t r = 6; r < 8; ++r) {
    EXPECT_EQ(out.column("x").values()[r], 7.0);
    EXPECT_EQ(out.column("y").values()[r], 5.0);
  }
}

TEST(Smote, IdentityWhenTargetsEqualCurrent) {
  auto t = line_table();
  SmoteConfig cfg;
  cfg.target_counts = class_counts(t);
  EXPECT_EQ(smote(t, cfg), t);
}

TEST(Smote, GeometryHistogramAndOriginals) {
  BlobSpec spec;
  spec.proportions = {0.8, 0.15, 0.05};
  spec.n = 2000;
  spec.dims = 4;
  spec.seed = 8;
  auto t = make_blobs(spec);
  auto cfg = SmoteConfig::equalize(class_counts(t), 3, 21);
  auto res = smote_with_parents(t, cfg);
  EXPECT_EQ(class_counts(res.table), cfg.target_counts);
  auto head = res.table.take_rows([&] {
    std::vector<std::size_t> v(t.n_rows());
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
  }());
  EXPECT_EQ(head, t);
  for (std::size_t i = 0; i < res.parents.size(); ++i) {
    const auto r = res.original_rows + i;
    const auto [a, b] = res.parents[i];
    EXPECT_EQ(res.table.target().codes()[r], t.target().codes()[a]);
    EXPECT_EQ(t.target().codes()[a], t.target().codes()[b]);
    for (std::size_t d = 1; d <= 4; ++d) {
      const auto& col = res.table.column("x" + std::to_string(d));
      const double lo = std::min(col.values()[a], col.values()[b]);
      const double hi = std::max(col.values()[a], col.values()[b]);
      ASSERT_GE(col.values()[r], lo);
      ASSERT_LE(col.values()[r], hi);
    }
  }
  EXPECT_EQ(smote(t, cfg), res.table);
}

TEST(Smote, NominalCellsTakeAParentValue) {
  auto t = line_table();
  auto res = smote_with_parents(t, SmoteConfig::equalize(class_counts(t), 3, 2));
  for (std::size_t i = 0; i < res.parents.size(); ++i) {
    auto v = res.table.column("g").codes()[res.original_rows + i];
    auto pa = t.column("g").codes()[res.parents[i].first], pb = t.column("g").codes()[res.parents[i].second];
    EXPECT_TRUE(v == pa || v == pb);
  }
}

TEST(Smote, TooFewMembers) {
  DataTable t({numerical("x", {1, 2, 3, 4, 5}), target({0, 0, 0, 1, 1})});
  try {
    smote(t, SmoteConfig::equalize(class_counts(t), 3, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewMembers);
  }
}
