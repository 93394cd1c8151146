#pragma once

#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "forge/csv.hpp"
#include "forge/table.hpp"

namespace forge {

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

/// One guard term. `values` holds one literal, or several for `col=a|b|c`;
/// the literal "missing" tests the missing marker.
struct Condition {
  std::string column;
  CompareOp op = CompareOp::Eq;
  std::vector<std::string> values;
};

struct DomainRule {
  std::string id;
  std::vector<Condition> guard;
  std::string assign_column;
  std::string assign_value;      // literal, unless assign_from is set
  std::string assign_from;       // `$column`: copy that row's value
};

/// Converts a source severity column into the 0/1/2 class codes.
struct TargetMapping {
  std::string source;
  std::string target;
  std::array<std::int32_t, kNumClasses> source_codes{};  // indexed by ClassLabel
};

struct CleaningPlan {
  std::vector<std::string> drop_columns;
  std::vector<std::pair<std::string, std::int32_t>> recode_unknown;
  std::vector<TargetMapping> targets;
  std::vector<DomainRule> domain_rules;
  std::vector<std::string> require_present;
};

struct CleaningReport {
  std::vector<std::string> dropped_columns;
  std::vector<std::string> absent_drop_columns;
  std::map<std::string, std::size_t> recoded_cells;   // per column
  std::vector<std::pair<std::string, std::size_t>> rule_cells;  // per rule id, plan order
  std::size_t rule_passes = 0;
  std::size_t rows_before = 0;
  std::size_t rows_dropped = 0;
  std::size_t rows_after = 0;
  std::size_t incomplete_rows_after = 0;
};

namespace cleaning_detail {

using csv_detail::trim;

inline std::optional<int> parse_hhmm(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  int h = 0, m = 0;
  auto hs = s.substr(0, colon), ms = s.substr(colon + 1);
  if (hs.empty() || ms.size() != 2) return std::nullopt;
  auto r1 = std::from_chars(hs.data(), hs.data() + hs.size(), h);
  auto r2 = std::from_chars(ms.data(), ms.data() + ms.size(), m);
  if (r1.ec != std::errc{} || r1.ptr != hs.data() + hs.size()) return std::nullopt;
  if (r2.ec != std::errc{} || r2.ptr != ms.data() + ms.size()) return std::nullopt;
  if (h < 0 || h > 23 || m < 0 || m > 59) return std::nullopt;
  return h * 60 + m;
}

inline std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline bool compare(double a, CompareOp op, double b) {
  switch (op) {
    case CompareOp::Eq: return a == b;
    case CompareOp::Ne: return a != b;
    case CompareOp::Lt: return a < b;
    case CompareOp::Le: return a <= b;
    case CompareOp::Gt: return a > b;
    case CompareOp::Ge: return a >= b;
  }
  return false;
}

/// A condition literal against a cell. HH:MM literals compare text cells as times.
inline bool literal_matches(const Column& col, std::size_t r, CompareOp op, const std::string& lit) {
  const bool cell_missing = col.is_missing_at(r);
  if (lit == "missing") {
    if (op == CompareOp::Eq) return cell_missing;
    if (op == CompareOp::Ne) return !cell_missing;
    throw Error(ErrorKind::PlanSyntax, "'missing' supports only = and !=");
  }
  if (cell_missing) return op == CompareOp::Ne;
  if (col.kind() == FeatureKind::Text) {
    if (auto t = parse_hhmm(lit)) {
      auto cell = parse_hhmm(col.text()[r]);
      if (!cell) return false;
      return compare(*cell, op, *t);
    }
    if (op == CompareOp::Eq) return col.text()[r] == lit;
    if (op == CompareOp::Ne) return col.text()[r] != lit;
    throw Error(ErrorKind::PlanSyntax, "ordering on text column '" + col.name() + "' needs an HH:MM literal");
  }
  auto v = parse_real(lit);
  if (!v) throw Error(ErrorKind::PlanSyntax, "literal '" + lit + "' is not numeric for column '" + col.name() + "'");
  return compare(col.as_double(r), op, *v);
}

inline bool condition_holds(const Column& col, std::size_t r, const Condition& c) {
  if (c.op == CompareOp::Ne) {
    for (const auto& v : c.values) {
      if (!literal_matches(col, r, CompareOp::Ne, v)) return false;
    }
    return true;
  }
  for (const auto& v : c.values) {
    if (literal_matches(col, r, c.op, v)) return true;
  }
  return false;
}

inline Condition parse_condition(const std::string& text, int lineno) {
  static const std::pair<const char*, CompareOp> ops[] = {{"!=", CompareOp::Ne}, {">=", CompareOp::Ge},
                                                          {"<=", CompareOp::Le}, {"=", CompareOp::Eq},
                                                          {"<", CompareOp::Lt},  {">", CompareOp::Gt}};
  for (const auto& [tok, op] : ops) {
    auto p = text.find(tok);
    if (p == std::string::npos) continue;
    Condition c;
    c.column = trim(text.substr(0, p));
    c.op = op;
    std::string rhs = trim(text.substr(p + std::char_traits<char>::length(tok)));
    std::size_t start = 0;
    while (true) {
      auto bar = rhs.find('|', start);
      c.values.push_back(trim(rhs.substr(start, bar - start)));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    if (c.column.empty() || c.values.empty() || c.values.front().empty()) break;
    return c;
  }
  throw Error(ErrorKind::PlanSyntax, "line " + std::to_string(lineno) + ": bad condition '" + text + "'");
}

inline std::pair<std::int32_t, std::int32_t> parse_arrow(const std::string& text, int lineno) {
  auto p = text.find("->");
  auto bad = [&] { return Error(ErrorKind::PlanSyntax, "line " + std::to_string(lineno) + ": expected a->b, got '" + text + "'"); };
  if (p == std::string::npos) throw bad();
  auto a = parse_real(trim(text.substr(0, p)));
  auto b = parse_real(trim(text.substr(p + 2)));
  if (!a || !b) throw bad();
  return {static_cast<std::int32_t>(*a), static_cast<std::int32_t>(*b)};
}

}  // namespace cleaning_detail

/// Parses the plan-file grammar:
///   drop <col>
///   recode <col> <code>->-1
///   target <col> -> <new col> slight=<code> serious=<code> fatal=<code>
///   rule <id>: if <cond> [and <cond>...] then <col>:=<value|$col>
///   require <col>
/// Conditions are `col=v`, `col!=v`, `col<v` (also <=, >, >=), with `v` a code,
/// a real, HH:MM, `missing`, or an alternation `a|b|c`.
inline CleaningPlan parse_cleaning_plan(std::string_view text) {
  using cleaning_detail::trim;
  CleaningPlan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto sp = t.find(' ');
    std::string verb = t.substr(0, sp);
    std::string rest = sp == std::string::npos ? std::string{} : trim(t.substr(sp + 1));
    auto err = [&](const std::string& what) {
      return Error(ErrorKind::PlanSyntax, "line " + std::to_string(lineno) + ": " + what);
    };
    if (verb == "drop") {
      if (rest.empty()) throw err("drop needs a column");
      plan.drop_columns.push_back(rest);
    } else if (verb == "require") {
      if (rest.empty()) throw err("require needs a column");
      plan.require_present.push_back(rest);
    } else if (verb == "recode") {
      auto last = rest.rfind(' ');
      if (last == std::string::npos) throw err("recode <col> <code>->-1");
      auto [from, to] = cleaning_detail::parse_arrow(trim(rest.substr(last + 1)), lineno);
      if (to != kMissingCode) throw err("recode must target -1");
      plan.recode_unknown.emplace_back(trim(rest.substr(0, last)), from);
    } else if (verb == "target") {
      auto arrow = rest.find("->");
      if (arrow == std::string::npos) throw err("target <col> -> <new> slight=a serious=b fatal=c");
      TargetMapping m;
      m.source = trim(rest.substr(0, arrow));
      std::istringstream words(rest.substr(arrow + 2));
      std::vector<std::string> toks;
      for (std::string w; words >> w;) toks.push_back(w);
      if (toks.size() != 4) throw err("target mapping needs a name and three class codes");
      m.target = toks[0];
      std::array<bool, kNumClasses> seen{};
      for (std::size_t i = 1; i < toks.size(); ++i) {
        auto eq = toks[i].find('=');
        if (eq == std::string::npos) throw err("bad class mapping '" + toks[i] + "'");
        auto cls = toks[i].substr(0, eq);
        auto code = cleaning_detail::parse_real(toks[i].substr(eq + 1));
        if (!code) throw err("bad class code '" + toks[i] + "'");
        std::size_t k = cls == "slight" ? 0 : cls == "serious" ? 1 : cls == "fatal" ? 2 : 99;
        if (k == 99) throw err("unknown class '" + cls + "'");
        m.source_codes[k] = static_cast<std::int32_t>(*code);
        seen[k] = true;
      }
      if (!(seen[0] && seen[1] && seen[2])) throw err("all three classes must be mapped");
      plan.targets.push_back(std::move(m));
    } else if (verb == "rule") {
      auto colon = rest.find(':');
      if (colon == std::string::npos) throw err("rule <id>: if ... then ...");
      DomainRule rule;
      rule.id = trim(rest.substr(0, colon));
      std::string body = trim(rest.substr(colon + 1));
      if (!body.starts_with("if ")) throw err("rule body must start with 'if'");
      auto then = body.find(" then ");
      if (then == std::string::npos) throw err("rule needs 'then'");
      std::string guard = body.substr(3, then - 3);
      std::size_t start = 0;
      while (true) {
        auto a = guard.find(" and ", start);
        rule.guard.push_back(cleaning_detail::parse_condition(guard.substr(start, a - start), lineno));
        if (a == std::string::npos) break;
        start = a + 5;
      }
      std::string assign = trim(body.substr(then + 6));
      auto ce = assign.find(":=");
      if (ce == std::string::npos) throw err("assignment must use :=");
      rule.assign_column = trim(assign.substr(0, ce));
      std::string value = trim(assign.substr(ce + 2));
      if (value.starts_with("$")) {
        rule.assign_from = value.substr(1);
      } else {
        if (value == "-1" || value == "missing" || value.empty()) throw err("a rule may not assign the missing marker");
        rule.assign_value = value;
      }
      plan.domain_rules.push_back(std::move(rule));
    } else {
      throw err("unknown directive '" + verb + "'");
    }
  }
  for (const auto& rule : plan.domain_rules) {
    for (const auto& d : plan.drop_columns) {
      bool used = rule.assign_column == d || rule.assign_from == d;
      for (const auto& c : rule.guard) used = used || c.column == d;
      if (used) throw Error(ErrorKind::PlanSyntax, "rule '" + rule.id + "' uses dropped column '" + d + "'");
    }
  }
  return plan;
}

inline CleaningPlan load_cleaning_plan(const std::filesystem::path& path) {
  return parse_cleaning_plan(read_file(path));
}

/// Drops, target mapping, unknown→missing recodes, domain rules and row filters,
/// in that order. Rules are swept in plan order until no rule fires, and a rule
/// only fills a cell that is currently missing, so the plan is idempotent.
inline std::pair<DataTable, CleaningReport> apply_cleaning(const DataTable& input, const CleaningPlan& plan) {
  CleaningReport report;
  report.rows_before = input.n_rows();

  std::vector<std::string> drops;
  for (const auto& d : plan.drop_columns) {
    (input.has(d) ? drops : report.absent_drop_columns).push_back(d);
  }
  report.dropped_columns = drops;
  DataTable table = input.without(drops);

  for (const auto& m : plan.targets) {
    if (!table.has(m.source)) {
      if (table.has(m.target)) continue;
      throw Error(ErrorKind::RuleColumnMissing, "target source '" + m.source + "'");
    }
    const auto& src = table.column(m.source);
    if (src.kind() != FeatureKind::Nominal) throw Error(ErrorKind::SchemaMismatch, "target source must be nominal");
    std::vector<std::int32_t> codes(table.n_rows(), kMissingCode);
    for (std::size_t r = 0; r < codes.size(); ++r) {
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        if (src.codes()[r] == m.source_codes[k]) codes[r] = static_cast<std::int32_t>(k);
      }
    }
    std::vector<Column> cols;
    for (const auto& c : table.columns()) {
      if (c.name() == m.source) continue;
      Column copy = c;
      if (copy.role() == ColumnRole::Target) copy.set_role(ColumnRole::Dropped);
      cols.push_back(std::move(copy));
    }
    cols.emplace_back(ColumnSchema{m.target, FeatureKind::Nominal, ColumnRole::Target}, std::move(codes));
    table = DataTable(std::move(cols));
  }

  for (const auto& [name, code] : plan.recode_unknown) {
    auto idx = table.find(name);
    if (!idx) throw Error(ErrorKind::RuleColumnMissing, "recode column '" + name + "'");
    auto& col = table.mutable_column(*idx);
    std::size_t changed = 0;
    if (col.kind() == FeatureKind::Nominal) {
      for (auto& c : col.mutable_codes()) {
        if (c == code) {
          c = kMissingCode;
          ++changed;
        }
      }
    } else if (col.kind() == FeatureKind::Numerical) {
      for (auto& v : col.mutable_values()) {
        if (v == code) {
          v = kMissingValue;
          ++changed;
        }
      }
    }
    report.recoded_cells[name] += changed;
  }

  struct Bound {
    const DomainRule* rule;
    std::vector<std::size_t> guard_cols;
    std::size_t target = 0;
    std::optional<std::size_t> source;
  };
  std::vector<Bound> bound;
  for (const auto& rule : plan.domain_rules) {
    Bound b{&rule, {}, 0, std::nullopt};
    auto need = [&](const std::string& name) {
      auto i = table.find(name);
      if (!i) throw Error(ErrorKind::RuleColumnMissing, "rule '" + rule.id + "' references '" + name + "'");
      return *i;
    };
    for (const auto& c : rule.guard) b.guard_cols.push_back(need(c.column));
    b.target = need(rule.assign_column);
    if (table.column(b.target).kind() == FeatureKind::Text) {
      throw Error(ErrorKind::PlanSyntax, "rule '" + rule.id + "' cannot assign a text column");
    }
    if (!rule.assign_from.empty()) {
      b.source = need(rule.assign_from);
      if (table.column(*b.source).kind() != table.column(b.target).kind()) {
        throw Error(ErrorKind::PlanSyntax, "rule '" + rule.id + "' copies between columns of different kinds");
      }
    } else if (!cleaning_detail::parse_real(rule.assign_value)) {
      throw Error(ErrorKind::PlanSyntax, "rule '" + rule.id + "' assigns non-numeric '" + rule.assign_value + "'");
    }
    bound.push_back(std::move(b));
    report.rule_cells.emplace_back(rule.id, 0);
  }

  bool changed = !bound.empty();
  while (changed) {
    changed = false;
    ++report.rule_passes;
    for (std::size_t k = 0; k < bound.size(); ++k) {
      const auto& b = bound[k];
      auto& target = table.mutable_column(b.target);
      for (std::size_t r = 0; r < table.n_rows(); ++r) {
        if (!target.is_missing_at(r)) continue;
        bool ok = true;
        for (std::size_t g = 0; g < b.guard_cols.size() && ok; ++g) {
          ok = cleaning_detail::condition_holds(table.column(b.guard_cols[g]), r, b.rule->guard[g]);
        }
        if (!ok) continue;
        double value;
        if (b.source) {
          const auto& src = table.column(*b.source);
          if (src.is_missing_at(r)) continue;
          value = src.as_double(r);
        } else {
          value = *cleaning_detail::parse_real(b.rule->assign_value);
        }
        if (target.kind() == FeatureKind::Nominal) {
          target.mutable_codes()[r] = static_cast<std::int32_t>(value);
        } else {
          target.mutable_values()[r] = value;
        }
        ++report.rule_cells[k].second;
        changed = true;
      }
    }
  }

  std::vector<std::size_t> required;
  for (const auto& name : plan.require_present) {
    auto i = table.find(name);
    if (!i) throw Error(ErrorKind::RuleColumnMissing, "require column '" + name + "'");
    required.push_back(*i);
  }
  std::vector<std::size_t> keep;
  keep.reserve(table.n_rows());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    bool ok = true;
    for (auto c : required) ok = ok && !table.column(c).is_missing_at(r);
    if (ok) keep.push_back(r);
  }
  if (keep.size() != table.n_rows()) table = table.take_rows(keep);
  report.rows_after = table.n_rows();
  report.rows_dropped = report.rows_before - report.rows_after;
  report.incomplete_rows_after = table.incomplete_rows();
  return {std::move(table), std::move(report)};
}

inline std::string format_cleaning_report(const CleaningReport& r) {
  std::ostringstream out;
  out << "item,name,count\n";
  for (const auto& d : r.dropped_columns) out << "drop," << d << ",1\n";
  for (const auto& d : r.absent_drop_columns) out << "drop_absent," << d << ",0\n";
  for (const auto& [name, n] : r.recoded_cells) out << "recode," << name << "," << n << "\n";
  for (const auto& [id, n] : r.rule_cells) out << "rule," << id << "," << n << "\n";
  out << "rows,before," << r.rows_before << "\n";
  out << "rows,dropped," << r.rows_dropped << "\n";
  out << "rows,after," << r.rows_after << "\n";
  out << "rows,incomplete," << r.incomplete_rows_after << "\n";
  return out.str();
}

/// Replaces Date (dd/mm/yyyy) and Time (HH:MM) by numerical Hour, Month, Year.
inline DataTable expand_time(const DataTable& table, const std::string& date_col = "Date",
                             const std::string& time_col = "Time") {
  const auto& date = table.column(date_col);
  const auto& time = table.column(time_col);
  if (date.kind() != FeatureKind::Text || time.kind() != FeatureKind::Text) {
    throw Error(ErrorKind::SchemaMismatch, "Date and Time must be text columns");
  }
  std::vector<double> hour(table.n_rows()), month(table.n_rows()), year(table.n_rows());
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    auto bad = [&] {
      return Error(ErrorKind::MalformedTimestamp, "row " + std::to_string(r + 1) + ": '" + date.text()[r] + "' '" +
                                                      time.text()[r] + "'");
    };
    auto minutes = cleaning_detail::parse_hhmm(time.text()[r]);
    if (!minutes) throw bad();
    const auto& d = date.text()[r];
    auto s1 = d.find('/');
    auto s2 = s1 == std::string::npos ? s1 : d.find('/', s1 + 1);
    if (s2 == std::string::npos) throw bad();
    auto day = cleaning_detail::parse_real(std::string_view(d).substr(0, s1));
    auto mon = cleaning_detail::parse_real(std::string_view(d).substr(s1 + 1, s2 - s1 - 1));
    auto yr = cleaning_detail::parse_real(std::string_view(d).substr(s2 + 1));
    if (!day || !mon || !yr || *day < 1 || *day > 31 || *mon < 1 || *mon > 12 || *yr < 1 ||
        *day != std::floor(*day) || *mon != std::floor(*mon) || *yr != std::floor(*yr)) {
      throw bad();
    }
    hour[r] = *minutes / 60;
    month[r] = *mon;
    year[r] = *yr;
  }
  std::vector<Column> cols;
  for (const auto& c : table.columns()) {
    if (c.name() != date_col && c.name() != time_col) cols.push_back(c);
  }
  cols.emplace_back(ColumnSchema{"Hour", FeatureKind::Numerical, ColumnRole::Feature}, std::move(hour));
  cols.emplace_back(ColumnSchema{"Month", FeatureKind::Numerical, ColumnRole::Feature}, std::move(month));
  cols.emplace_back(ColumnSchema{"Year", FeatureKind::Numerical, ColumnRole::Feature}, std::move(year));
  return DataTable(std::move(cols));
}

}  // namespace forge
