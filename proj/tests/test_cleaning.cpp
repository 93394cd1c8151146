#include <gtest/gtest.h>

#include "forge/cleaning.hpp"
#include "forge/fixture.hpp"
#include "forge/merge.hpp"
#include "test_util.hpp"

using namespace forge;
using namespace forge::test;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::StageFailure;
}

DataTable small_table() {
  return DataTable({text("Time", {"14:30", "22:10", "05:59", "06:00", ""}),
                    nominal("Light_Conditions", {-1, -1, -1, -1, 4}),
                    nominal("Casualty_Type", {11, 9, 11, 0, 9}),
                    nominal("Car_Passenger", {-1, -1, 1, -1, 2}),
                    numerical("Speed", {30, 40, 50, 60, 70}),
                    nominal("Target", {0, 1, 0, 2, 0}, ColumnRole::Target)});
}

}  // namespace

TEST(CleaningPlanParse, Grammar) {
  auto plan = parse_cleaning_plan(
      "# comment\n"
      "drop A\n"
      "recode B 9->-1\n"
      "target Sev -> Target slight=3 serious=2 fatal=1\n"
      "rule r1: if C=missing and D=1|2 and T>=06:00 then C:=0\n"
      "rule r2: if E=missing then E:=$F\n"
      "require G\n");
  EXPECT_EQ(plan.drop_columns, std::vector<std::string>{"A"});
  ASSERT_EQ(plan.recode_unknown.size(), 1u);
  EXPECT_EQ(plan.recode_unknown[0].second, 9);
  ASSERT_EQ(plan.targets.size(), 1u);
  EXPECT_EQ(plan.targets[0].source_codes[0], 3);
  EXPECT_EQ(plan.targets[0].source_codes[2], 1);
  ASSERT_EQ(plan.domain_rules.size(), 2u);
  EXPECT_EQ(plan.domain_rules[0].guard.size(), 3u);
  EXPECT_EQ(plan.domain_rules[0].guard[1].values, (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(plan.domain_rules[0].guard[2].op, CompareOp::Ge);
  EXPECT_EQ(plan.domain_rules[1].assign_from, "F");
  EXPECT_EQ(plan.require_present, std::vector<std::string>{"G"});
}

TEST(CleaningPlanParse, Rejections) {
  EXPECT_EQ(kind_of([] { parse_cleaning_plan("frobnicate X\n"); }), ErrorKind::PlanSyntax);
  EXPECT_EQ(kind_of([] { parse_cleaning_plan("rule r: if A=1 then B:=-1\n"); }), ErrorKind::PlanSyntax);
  EXPECT_EQ(kind_of([] { parse_cleaning_plan("recode A 9->4\n"); }), ErrorKind::PlanSyntax);
  EXPECT_EQ(kind_of([] { parse_cleaning_plan("drop B\nrule r: if A=1 then B:=2\n"); }), ErrorKind::PlanSyntax);
}

TEST(Cleaning, BusPassengerIsNotCarPassenger) {
  auto plan = parse_cleaning_plan("rule bus: if Car_Passenger=missing and Casualty_Type=11 then Car_Passenger:=0\n");
  auto [out, report] = apply_cleaning(small_table(), plan);
  auto cp = out.column("Car_Passenger").codes();
  EXPECT_EQ(cp[0], 0);   // bus passenger, was missing
  EXPECT_EQ(cp[1], -1);  // not a bus passenger
  EXPECT_EQ(cp[2], 1);   // already present, untouched
  EXPECT_EQ(report.rule_cells.at(0).second, 1u);
}

TEST(Cleaning, DaylightFromTime) {
  auto plan = parse_cleaning_plan("rule daylight: if Light_Conditions=missing and Time>=06:00 and Time<18:00 then Light_Conditions:=1\n");
  auto [out, report] = apply_cleaning(small_table(), plan);
  auto lc = out.column("Light_Conditions").codes();
  EXPECT_EQ(lc[0], 1);   // 14:30
  EXPECT_EQ(lc[1], -1);  // 22:10
  EXPECT_EQ(lc[2], -1);  // 05:59
  EXPECT_EQ(lc[3], 1);   // 06:00 is inside the window
  EXPECT_EQ(lc[4], 4);
}

TEST(Cleaning, EmptyRuleListOnlyDrops) {
  auto t = small_table();
  auto plan = parse_cleaning_plan("drop Speed\n");
  auto [out, report] = apply_cleaning(t, plan);
  std::vector<std::string> drop{"Speed"};
  EXPECT_EQ(out, t.without(drop));
  EXPECT_TRUE(report.rule_cells.empty());
  EXPECT_TRUE(report.recoded_cells.empty());
  EXPECT_EQ(report.rows_dropped, 0u);
}

TEST(Cleaning, RecodeRequireAndTarget) {
  DataTable t({nominal("Sev", {3, 2, 1, 3}), nominal("Sex", {1, 9, 2, 9}), numerical("East", {1, 2, -1, 4})});
  // -1 already parsed as missing only via CSV; build with NaN to mirror a loaded file.
  t.mutable_column(2).mutable_values()[2] = kMissingValue;
  auto plan = parse_cleaning_plan(
      "target Sev -> Target slight=3 serious=2 fatal=1\nrecode Sex 9->-1\nrequire East\n");
  auto [out, report] = apply_cleaning(t, plan);
  EXPECT_EQ(out.n_rows(), 3u);
  EXPECT_EQ(report.rows_dropped, 1u);
  EXPECT_EQ(report.recoded_cells.at("Sex"), 2u);
  auto target = out.target().codes();
  EXPECT_EQ(std::vector<std::int32_t>(target.begin(), target.end()), (std::vector<std::int32_t>{0, 1, 0}));
  EXPECT_FALSE(out.has("Sev"));
}

TEST(Cleaning, MissingRuleColumn) {
  auto plan = parse_cleaning_plan("rule r: if Nope=1 then Car_Passenger:=0\n");
  EXPECT_EQ(kind_of([&] { apply_cleaning(small_table(), plan); }), ErrorKind::RuleColumnMissing);
}

TEST(Cleaning, DefaultPlanIdempotentAndMonotone) {
  FixtureSpec spec;
  spec.n = 1500;
  spec.missingness = 0.1;
  spec.seed = 9;
  auto fx = generate_fixture(spec);
  auto merged = merge_datasets(fx.accidents, fx.vehicles, fx.casualties).table;
  auto plan = load_cleaning_plan(std::filesystem::path(FORGE_DEFAULT_CONFIG_DIR) / "cleaning.plan");
  auto [once, r1] = apply_cleaning(merged, plan);
  auto [twice, r2] = apply_cleaning(once, plan);
  EXPECT_EQ(once, twice);
  for (const auto& [id, n] : r2.rule_cells) EXPECT_EQ(n, 0u) << id;
  EXPECT_EQ(r1.rows_after, r1.rows_before - r1.rows_dropped);
  std::size_t fired = 0;
  for (const auto& [id, n] : r1.rule_cells) fired += n;
  EXPECT_GT(fired, 0u);
  EXPECT_GT(r1.rows_dropped, 0u);

  // Rules never blank a present cell: with drops, target mapping and recodes
  // applied but no rules, every present cell stays present.
  CleaningPlan no_rules = plan;
  no_rules.domain_rules.clear();
  no_rules.require_present.clear();
  auto base = apply_cleaning(merged, no_rules).first;
  CleaningPlan rules_only = plan;
  rules_only.require_present.clear();
  auto ruled = apply_cleaning(merged, rules_only).first;
  ASSERT_EQ(base.n_rows(), ruled.n_rows());
  for (std::size_t c = 0; c < base.n_cols(); ++c) {
    const auto& a = base.column(c);
    const auto& b = ruled.column(a.name());
    for (std::size_t r = 0; r < base.n_rows(); ++r) {
      if (!a.is_missing_at(r)) {
        ASSERT_FALSE(b.is_missing_at(r)) << a.name() << " row " << r;
        if (a.kind() != FeatureKind::Text) ASSERT_EQ(a.as_double(r), b.as_double(r));
      }
    }
  }
}

TEST(ExpandTime, Parses) {
  DataTable t({text("Date", {"13/02/2015", "01/12/2009"}), text("Time", {"09:45", "23:59"}), nominal("X", {1, 2})});
  auto out = expand_time(t);
  EXPECT_FALSE(out.has("Date"));
  EXPECT_FALSE(out.has("Time"));
  EXPECT_EQ(out.column("Hour").values()[0], 9.0);
  EXPECT_EQ(out.column("Month").values()[0], 2.0);
  EXPECT_EQ(out.column("Year").values()[0], 2015.0);
  EXPECT_EQ(out.column("Hour").values()[1], 23.0);
}

TEST(ExpandTime, Malformed) {
  DataTable t({text("Date", {"13/02/2015"}), text("Time", {"25:00"})});
  EXPECT_EQ(kind_of([&] { expand_time(t); }), ErrorKind::MalformedTimestamp);
  DataTable d({text("Date", {"2015-02-13"}), text("Time", {"10:00"})});
  EXPECT_EQ(kind_of([&] { expand_time(d); }), ErrorKind::MalformedTimestamp);
}
