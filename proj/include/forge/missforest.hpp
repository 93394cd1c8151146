#pragma once

#include <algorithm>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "forge/csv.hpp"
#include "forge/forest.hpp"
#include "forge/table.hpp"

namespace forge {

struct ImputationPlan {
  std::vector<std::vector<std::string>> stages;
  std::map<std::string, std::size_t> trees;  // per-column override of forest.n_trees
  ForestConfig forest;                       // n_trees defaults to 100
  std::size_t max_iterations = 10;
  std::vector<std::string> exclude_predictors;
};

struct ColumnImputation {
  std::string column;
  std::size_t stage = 0;
  std::size_t missing = 0;
  std::size_t iterations = 0;
  double final_change = 0;  // this column's share of the last kept sweep's change
};

struct ImputationReport {
  std::vector<ColumnImputation> columns;
  std::vector<std::string> unplanned;  // columns still carrying missing cells, not in any stage
  std::vector<std::string> absent;     // plan columns not present in the table
};

/// Plan file:
///   stage <n>: <col> [trees=<k>], <col>, ...
///   trees <k> | max_iterations <k> | min_leaf <k> | max_depth <k> | mtry <k>
///   seed <k> | sample_fraction <x> | exclude <col>
inline ImputationPlan parse_imputation_plan(std::string_view text) {
  using csv_detail::trim;
  ImputationPlan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  std::map<long, std::vector<std::string>> staged;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto err = [&](const std::string& what) {
      return Error(ErrorKind::PlanSyntax, "line " + std::to_string(lineno) + ": " + what);
    };
    auto number = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw err("bad number '" + s + "'");
        return v;
      } catch (const std::logic_error&) {
        throw err("bad number '" + s + "'");
      }
    };
    if (t.starts_with("stage")) {
      auto colon = t.find(':');
      if (colon == std::string::npos) throw err("stage <n>: <cols>");
      long n = static_cast<long>(number(trim(t.substr(5, colon - 5))));
      auto& cols = staged[n];
      std::string rest = t.substr(colon + 1);
      std::size_t start = 0;
      while (start <= rest.size()) {
        auto comma = rest.find(',', start);
        auto item = trim(rest.substr(start, comma - start));
        if (!item.empty()) {
          std::string name = item;
          if (auto eq = item.find(" trees="); eq != std::string::npos) {
            name = trim(item.substr(0, eq));
            plan.trees[name] = static_cast<std::size_t>(number(trim(item.substr(eq + 7))));
          }
          if (!seen.insert(name).second) throw err("column '" + name + "' appears in more than one stage");
          cols.push_back(name);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      continue;
    }
    auto sp = t.find(' ');
    if (sp == std::string::npos) throw err("directive needs a value");
    auto key = t.substr(0, sp);
    auto val = trim(t.substr(sp + 1));
    if (key == "trees") {
      plan.forest.n_trees = static_cast<std::size_t>(number(val));
    } else if (key == "max_iterations") {
      plan.max_iterations = static_cast<std::size_t>(number(val));
    } else if (key == "min_leaf") {
      plan.forest.min_leaf = static_cast<std::size_t>(number(val));
    } else if (key == "max_depth") {
      plan.forest.max_depth = static_cast<std::size_t>(number(val));
    } else if (key == "mtry") {
      plan.forest.mtry = static_cast<std::size_t>(number(val));
    } else if (key == "seed") {
      plan.forest.seed = static_cast<std::uint64_t>(number(val));
    } else if (key == "sample_fraction") {
      plan.forest.sample_fraction = number(val);
    } else if (key == "exclude") {
      plan.exclude_predictors.push_back(val);
    } else {
      throw err("unknown directive '" + key + "'");
    }
  }
  for (auto& [n, cols] : staged) plan.stages.push_back(std::move(cols));
  if (plan.max_iterations < 1) throw Error(ErrorKind::PlanSyntax, "max_iterations must be >= 1");
  return plan;
}

inline ImputationPlan load_imputation_plan(const std::filesystem::path& path) {
  return parse_imputation_plan(read_file(path));
}

namespace missforest_detail {

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline void set_cell(Column& col, std::size_t r, double v) {
  if (col.kind() == FeatureKind::Nominal) {
    col.mutable_codes()[r] = static_cast<std::int32_t>(v);
  } else {
    col.mutable_values()[r] = v;
  }
}

}  // namespace missforest_detail

/// Iterative forest imputation, stage by stage. Within a stage: fill missing
/// cells with the mode/mean, then repeatedly refit each column (ascending
/// missing count) on the currently complete predictors and re-predict its
/// originally missing cells. A stage stops the first time the normalised change
/// grows for every variable kind present, keeping the previous sweep, or at
/// max_iterations. Originally observed cells are never written.
inline std::pair<DataTable, ImputationReport> missforest_impute(const DataTable& input, const ImputationPlan& plan) {
  using missforest_detail::set_cell;
  DataTable table = input;
  ImputationReport report;

  std::set<std::string> planned;
  for (const auto& st : plan.stages) {
    for (const auto& c : st) {
      if (!planned.insert(c).second) throw Error(ErrorKind::PlanSyntax, "column '" + c + "' in two stages");
      if (!table.has(c)) {
        report.absent.push_back(c);
        continue;
      }
      const auto& col = table.column(c);
      if (col.kind() == FeatureKind::Text) throw Error(ErrorKind::SchemaMismatch, "cannot impute text column '" + c + "'");
    }
  }
  for (const auto& col : table.columns()) {
    if (col.role() == ColumnRole::Feature && col.missing_count() > 0 && !planned.count(col.name())) {
      report.unplanned.push_back(col.name());
    }
  }

  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    struct Work {
      std::string name;
      std::size_t index;
      std::vector<std::size_t> missing_rows;
      std::vector<std::size_t> observed_rows;
    };
    std::vector<Work> work;
    for (const auto& name : plan.stages[s]) {
      if (!table.has(name)) continue;
      auto idx = table.index_of(name);
      const auto& col = table.column(idx);
      Work w{name, idx, {}, {}};
      for (std::size_t r = 0; r < table.n_rows(); ++r) {
        (col.is_missing_at(r) ? w.missing_rows : w.observed_rows).push_back(r);
      }
      ColumnImputation info{name, s + 1, w.missing_rows.size(), 0, 0.0};
      report.columns.push_back(info);
      if (w.missing_rows.empty()) continue;
      if (w.observed_rows.empty()) throw Error(ErrorKind::NoObservedValues, name);
      work.push_back(std::move(w));
    }
    if (work.empty()) continue;

    // Initial fill: mode (lowest code on ties) or mean of observed cells.
    for (const auto& w : work) {
      auto& col = table.mutable_column(w.index);
      double fill = 0;
      if (col.kind() == FeatureKind::Nominal) {
        std::map<std::int32_t, std::size_t> freq;
        for (auto r : w.observed_rows) freq[col.codes()[r]]++;
        std::size_t best = 0;
        for (const auto& [code, k] : freq) {
          if (k > best) {
            best = k;
            fill = code;
          }
        }
      } else {
        double sum = 0;
        for (auto r : w.observed_rows) sum += col.values()[r];
        fill = sum / static_cast<double>(w.observed_rows.size());
      }
      for (auto r : w.missing_rows) set_cell(col, r, fill);
    }
    std::stable_sort(work.begin(), work.end(),
                     [](const Work& a, const Work& b) { return a.missing_rows.size() < b.missing_rows.size(); });

    // Predictors: complete, non-text Feature columns (stage columns are complete now).
    std::vector<std::string> pool;
    for (const auto& col : table.columns()) {
      if (col.role() != ColumnRole::Feature || col.kind() == FeatureKind::Text) continue;
      if (std::find(plan.exclude_predictors.begin(), plan.exclude_predictors.end(), col.name()) !=
          plan.exclude_predictors.end())
        continue;
      if (col.missing_count() == 0) pool.push_back(col.name());
    }

    bool has_num = false, has_nom = false;
    double nom_total = 0;
    for (const auto& w : work) {
      if (table.column(w.index).kind() == FeatureKind::Numerical) {
        has_num = true;
      } else {
        has_nom = true;
        nom_total += static_cast<double>(w.missing_rows.size());
      }
    }

    const double inf = std::numeric_limits<double>::infinity();
    double prev_num = inf, prev_nom = inf;
    std::size_t iterations = 0;
    std::vector<double> last_col_change(work.size(), 0.0);
    while (true) {
      ++iterations;
      DataTable snapshot = table;
      std::vector<double> col_change(work.size(), 0.0);
      double num_diff = 0, num_norm = 0, nom_changed = 0;
      for (std::size_t k = 0; k < work.size(); ++k) {
        const auto& w = work[k];
        std::vector<std::string> predictors;
        for (const auto& p : pool) {
          if (p != w.name) predictors.push_back(p);
        }
        if (predictors.empty()) continue;
        ForestConfig cfg = plan.forest;
        if (auto it = plan.trees.find(w.name); it != plan.trees.end()) cfg.n_trees = it->second;
        cfg.seed = missforest_detail::mix(plan.forest.seed ^ missforest_detail::mix(s * 1000003u + k * 7919u + iterations));
        cfg.compute_oob = false;

        auto full = FeatureMatrix::from_table(table, predictors);
        FeatureMatrix train;
        train.names = full.names;
        train.kinds = full.kinds;
        train.rows = w.observed_rows.size();
        std::vector<double> y;
        const auto& col = table.column(w.index);
        for (auto r : w.observed_rows) {
          auto row = full.row(r);
          train.values.insert(train.values.end(), row.begin(), row.end());
          y.push_back(col.as_double(r));
        }
        auto forest = fit_forest(train, y, col.kind(), cfg);
        auto& mcol = table.mutable_column(w.index);
        for (auto r : w.missing_rows) {
          double old = mcol.as_double(r);
          double now = forest.predict_row(full.row(r));
          set_cell(mcol, r, now);
          if (mcol.kind() == FeatureKind::Numerical) {
            col_change[k] += (now - old) * (now - old);
          } else {
            col_change[k] += now != old ? 1.0 : 0.0;
          }
        }
      }
      for (std::size_t k = 0; k < work.size(); ++k) {
        const auto& mcol = table.column(work[k].index);
        if (mcol.kind() == FeatureKind::Numerical) {
          num_diff += col_change[k];
          for (auto r : work[k].missing_rows) num_norm += mcol.values()[r] * mcol.values()[r];
        } else {
          nom_changed += col_change[k];
        }
      }
      const double num = has_num ? (num_norm > 0 ? num_diff / num_norm : num_diff) : 0.0;
      const double nom = has_nom ? nom_changed / nom_total : 0.0;
      const bool grew = (!has_num || num > prev_num) && (!has_nom || nom > prev_nom);
      if (grew) {
        table = std::move(snapshot);
        break;
      }
      prev_num = num;
      prev_nom = nom;
      last_col_change = col_change;
      if (num == 0 && nom == 0) break;
      if (iterations >= plan.max_iterations) break;
    }

    for (std::size_t k = 0; k < work.size(); ++k) {
      for (auto& info : report.columns) {
        if (info.column == work[k].name) {
          info.iterations = iterations;
          const auto& mcol = table.column(work[k].index);
          info.final_change = mcol.kind() == FeatureKind::Nominal
                                  ? last_col_change[k] / static_cast<double>(work[k].missing_rows.size())
                                  : last_col_change[k];
        }
      }
    }
  }
  return {std::move(table), std::move(report)};
}

inline std::string format_imputation_report(const ImputationReport& report) {
  std::string out = "column,stage,missing,iterations,final_change\n";
  for (const auto& c : report.columns) {
    out += c.column + "," + std::to_string(c.stage) + "," + std::to_string(c.missing) + "," +
           std::to_string(c.iterations) + "," + format_number(c.final_change) + "\n";
  }
  for (const auto& u : report.unplanned) out += u + ",0,-1,0,0\n";
  for (const auto& a : report.absent) out += a + ",-1,0,0,0\n";
  return out;
}

}  // namespace forge
