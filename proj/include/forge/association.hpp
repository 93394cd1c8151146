#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "forge/csv.hpp"
#include "forge/table.hpp"

namespace forge::assoc {

/// Counts over the observed categories of two nominal columns (pairwise deletion
/// of missing cells). Categories are sorted ascending, so empty rows/columns
/// never appear.
struct ContingencyTable {
  std::vector<std::int32_t> row_levels;
  std::vector<std::int32_t> col_levels;
  std::vector<std::vector<double>> counts;
  double n = 0;

  std::size_t rows() const { return row_levels.size(); }
  std::size_t cols() const { return col_levels.size(); }

  static ContingencyTable from_columns(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "contingency columns differ in length");
    ContingencyTable t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == kMissingCode || y[i] == kMissingCode) continue;
      t.row_levels.push_back(x[i]);
      t.col_levels.push_back(y[i]);
    }
    auto uniq = [](std::vector<std::int32_t>& v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(t.row_levels);
    uniq(t.col_levels);
    t.counts.assign(t.rows(), std::vector<double>(t.cols(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == kMissingCode || y[i] == kMissingCode) continue;
      auto r = std::lower_bound(t.row_levels.begin(), t.row_levels.end(), x[i]) - t.row_levels.begin();
      auto c = std::lower_bound(t.col_levels.begin(), t.col_levels.end(), y[i]) - t.col_levels.begin();
      t.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] += 1.0;
      t.n += 1.0;
    }
    return t;
  }

  static ContingencyTable from_counts(std::vector<std::vector<double>> counts) {
    ContingencyTable t;
    for (std::size_t r = 0; r < counts.size(); ++r) t.row_levels.push_back(static_cast<std::int32_t>(r));
    if (!counts.empty()) {
      for (std::size_t c = 0; c < counts[0].size(); ++c) t.col_levels.push_back(static_cast<std::int32_t>(c));
    }
    for (const auto& row : counts) {
      if (row.size() != t.cols()) throw Error(ErrorKind::ShapeMismatch, "ragged contingency table");
      for (double v : row) t.n += v;
    }
    t.counts = std::move(counts);
    return t;
  }

  std::vector<double> row_sums() const {
    std::vector<double> s(rows(), 0.0);
    for (std::size_t r = 0; r < rows(); ++r)
      for (double v : counts[r]) s[r] += v;
    return s;
  }
  std::vector<double> col_sums() const {
    std::vector<double> s(cols(), 0.0);
    for (const auto& row : counts)
      for (std::size_t c = 0; c < cols(); ++c) s[c] += row[c];
    return s;
  }

  void require_non_degenerate() const {
    std::size_t nz_rows = 0, nz_cols = 0;
    for (double v : row_sums()) nz_rows += v > 0 ? 1 : 0;
    for (double v : col_sums()) nz_cols += v > 0 ? 1 : 0;
    if (nz_rows < 2 || nz_cols < 2) {
      throw Error(ErrorKind::DegenerateTable, "contingency table is " + std::to_string(nz_rows) + "x" +
                                                  std::to_string(nz_cols) + " after dropping empty categories");
    }
  }
};

struct ChiSquared {
  double statistic = 0;
  int dof = 0;
};

inline ChiSquared chi_squared(const ContingencyTable& t) {
  t.require_non_degenerate();
  auto rs = t.row_sums(), cs = t.col_sums();
  double stat = 0;
  int r_used = 0, c_used = 0;
  for (double v : rs) r_used += v > 0 ? 1 : 0;
  for (double v : cs) c_used += v > 0 ? 1 : 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (rs[r] == 0) continue;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (cs[c] == 0) continue;
      double e = rs[r] * cs[c] / t.n;
      double d = t.counts[r][c] - e;
      stat += d * d / e;
    }
  }
  return {stat, (r_used - 1) * (c_used - 1)};
}

inline ChiSquared chi_squared(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
  return chi_squared(ContingencyTable::from_columns(x, y));
}

namespace detail {
inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0;
  for (double c : counts) {
    if (c > 0) h -= (c / n) * std::log(c / n);
  }
  return h;
}
}  // namespace detail

/// Plug-in mutual information in nats.
inline double mutual_information(const ContingencyTable& t) {
  t.require_non_degenerate();
  auto rs = t.row_sums(), cs = t.col_sums();
  double mi = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      double o = t.counts[r][c];
      if (o > 0) mi += (o / t.n) * std::log(o * t.n / (rs[r] * cs[c]));
    }
  }
  return std::max(0.0, mi);
}

inline double mutual_information(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
  return mutual_information(ContingencyTable::from_columns(x, y));
}

inline double cramers_v(const ContingencyTable& t) {
  auto chi = chi_squared(t);
  std::size_t r = 0, c = 0;
  for (double v : t.row_sums()) r += v > 0 ? 1 : 0;
  for (double v : t.col_sums()) c += v > 0 ? 1 : 0;
  double denom = t.n * static_cast<double>(std::min(r, c) - 1);
  return std::min(1.0, std::sqrt(chi.statistic / denom));
}

inline double cramers_v(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
  return cramers_v(ContingencyTable::from_columns(x, y));
}

/// Uncertainty coefficient U(x|y): the share of H(x) explained by y. Rows of
/// the table are x.
inline double theils_u(const ContingencyTable& t) {
  double hx = detail::entropy(t.row_sums(), t.n);
  if (!(hx > 0)) throw Error(ErrorKind::ZeroEntropy, "H(x) is zero");
  auto cs = t.col_sums();
  double hx_given_y = 0;
  for (std::size_t c = 0; c < t.cols(); ++c) {
    if (cs[c] == 0) continue;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      double o = t.counts[r][c];
      if (o > 0) hx_given_y -= (o / t.n) * std::log(o / cs[c]);
    }
  }
  return std::clamp((hx - hx_given_y) / hx, 0.0, 1.0);
}

inline double theils_u(std::span<const std::int32_t> x, std::span<const std::int32_t> y) {
  return theils_u(ContingencyTable::from_columns(x, y));
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "pearson columns differ in length");
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    sx += x[i];
    sy += y[i];
    ++n;
  }
  if (n < 2) throw Error(ErrorKind::InsufficientData, "pearson needs at least two complete pairs");
  const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorKind::ZeroVariance, "pearson on a constant column");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Between/within/total sums of squares for a numerical column grouped by a
/// nominal one.
struct AnovaSums {
  double ssb = 0;
  double ssw = 0;
  double sst = 0;
  std::size_t groups = 0;
  std::size_t n = 0;
};

inline AnovaSums anova_sums(std::span<const std::int32_t> groups, std::span<const double> y) {
  if (groups.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "anova columns differ in length");
  std::map<std::int32_t, std::pair<double, std::size_t>> acc;
  double total = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (groups[i] == kMissingCode || is_missing(y[i])) continue;
    auto& [s, k] = acc[groups[i]];
    s += y[i];
    ++k;
    total += y[i];
    ++n;
  }
  AnovaSums out;
  out.groups = acc.size();
  out.n = n;
  if (n == 0) return out;
  const double grand = total / static_cast<double>(n);
  for (const auto& [g, sk] : acc) {
    double mean = sk.first / static_cast<double>(sk.second);
    out.ssb += static_cast<double>(sk.second) * (mean - grand) * (mean - grand);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (groups[i] == kMissingCode || is_missing(y[i])) continue;
    const auto& sk = acc[groups[i]];
    double mean = sk.first / static_cast<double>(sk.second);
    out.ssw += (y[i] - mean) * (y[i] - mean);
    out.sst += (y[i] - grand) * (y[i] - grand);
  }
  return out;
}

/// One-way F = (SSB / (k-1)) / (SSW / (n-k)).
inline double anova_f(std::span<const std::int32_t> groups, std::span<const double> y) {
  auto s = anova_sums(groups, y);
  if (s.groups < 2 || s.n <= s.groups || !(s.ssw > 0)) {
    throw Error(ErrorKind::DegenerateGroups, "need >= 2 groups and non-zero within-group variance");
  }
  const double k = static_cast<double>(s.groups), n = static_cast<double>(s.n);
  return (s.ssb / (k - 1)) / (s.ssw / (n - k));
}

/// eta = sqrt(SSB / SST).
inline double correlation_ratio(std::span<const std::int32_t> groups, std::span<const double> y) {
  auto s = anova_sums(groups, y);
  if (!(s.sst > 0)) throw Error(ErrorKind::ZeroTotalVariance, "numerical column is constant");
  return std::clamp(std::sqrt(s.ssb / s.sst), 0.0, 1.0);
}

}  // namespace forge::assoc

namespace forge {

struct AssociationConfig {
  double high_correlation_threshold = 0.7;
};

struct PairScore {
  std::string a;
  std::string b;
  std::string metric;
  double score = 0;
};

struct PruneDecision {
  std::string column;
  std::string justification;
};

struct MetricFailure {
  std::string a;
  std::string b;
  std::string metric;
  std::string message;
};

struct AssociationReport {
  using Key = std::tuple<std::string, std::string, std::string>;

  /// (a, b, metric) -> score. Symmetric metrics are stored under both orders;
  /// theils_u under (x, y) is U(x|y).
  std::map<Key, double> pairwise;
  /// (feature, metric) -> score against the target.
  std::map<std::pair<std::string, std::string>, double> target_importance;
  /// Single comparable importance per feature used to arbitrate pruning:
  /// Cramér's V with the target for nominal features, eta for numerical ones.
  std::map<std::string, double> importance;
  std::vector<PairScore> candidates;
  std::vector<PruneDecision> pruned;
  std::vector<MetricFailure> failures;
  std::vector<std::string> features;  // table order
  std::map<std::string, FeatureKind> kinds;
  std::string target;

  std::optional<double> score(const std::string& a, const std::string& b, const std::string& metric) const {
    auto it = pairwise.find({a, b, metric});
    if (it == pairwise.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::string> pruned_columns() const {
    std::vector<std::string> out;
    for (const auto& p : pruned) out.push_back(p.column);
    return out;
  }
};

namespace assoc_detail {

template <class F>
void record(AssociationReport& report, const std::string& a, const std::string& b, const std::string& metric,
            bool symmetric, F&& compute) {
  try {
    double v = compute();
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite score");
    report.pairwise[{a, b, metric}] = v;
    if (symmetric) report.pairwise[{b, a, metric}] = v;
  } catch (const Error& e) {
    report.failures.push_back({a, b, metric, e.what()});
  }
}

template <class F>
void record_target(AssociationReport& report, const std::string& a, const std::string& metric, F&& compute) {
  try {
    double v = compute();
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "non-finite score");
    report.target_importance[{a, metric}] = v;
  } catch (const Error& e) {
    report.failures.push_back({a, report.target, metric, e.what()});
  }
}

}  // namespace assoc_detail

/// Computes every applicable association between Feature columns and against
/// the target, then greedily prunes from the strongest correlated pair down:
/// of a pair at or above the threshold whose members are both still kept, the
/// less important member goes (ties: the lexicographically later name).
inline AssociationReport build_report(const DataTable& table, const AssociationConfig& config = {}) {
  using namespace assoc;
  using assoc_detail::record;
  using assoc_detail::record_target;
  if (!(config.high_correlation_threshold > 0 && config.high_correlation_threshold <= 1)) {
    throw Error(ErrorKind::InvalidArgument, "threshold must lie in (0, 1]");
  }
  AssociationReport report;
  const auto& target = table.target();
  report.target = target.name();

  std::vector<const Column*> feats;
  for (auto i : table.feature_indices()) {
    const auto& c = table.column(i);
    if (c.kind() == FeatureKind::Text) continue;
    feats.push_back(&c);
    report.features.push_back(c.name());
    report.kinds[c.name()] = c.kind();
  }

  for (const Column* f : feats) {
    const auto& name = f->name();
    if (f->kind() == FeatureKind::Nominal) {
      record_target(report, name, "chi_squared", [&] { return chi_squared(f->codes(), target.codes()).statistic; });
      record_target(report, name, "mutual_information", [&] { return mutual_information(f->codes(), target.codes()); });
      record_target(report, name, "cramers_v", [&] { return cramers_v(f->codes(), target.codes()); });
      auto it = report.target_importance.find({name, "cramers_v"});
      report.importance[name] = it == report.target_importance.end() ? 0.0 : it->second;
    } else {
      record_target(report, name, "anova_f", [&] { return anova_f(target.codes(), f->values()); });
      record_target(report, name, "correlation_ratio", [&] { return correlation_ratio(target.codes(), f->values()); });
      auto it = report.target_importance.find({name, "correlation_ratio"});
      report.importance[name] = it == report.target_importance.end() ? 0.0 : it->second;
    }
  }

  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = i + 1; j < feats.size(); ++j) {
      const Column& a = *feats[i];
      const Column& b = *feats[j];
      const bool an = a.kind() == FeatureKind::Nominal, bn = b.kind() == FeatureKind::Nominal;
      if (!an && !bn) {
        record(report, a.name(), b.name(), "pearson", true, [&] { return pearson(a.values(), b.values()); });
      } else if (an && bn) {
        auto table_ab = ContingencyTable::from_columns(a.codes(), b.codes());
        record(report, a.name(), b.name(), "cramers_v", true, [&] { return cramers_v(table_ab); });
        record(report, a.name(), b.name(), "theils_u", false, [&] { return theils_u(a.codes(), b.codes()); });
        record(report, b.name(), a.name(), "theils_u", false, [&] { return theils_u(b.codes(), a.codes()); });
      } else {
        const Column& g = an ? a : b;
        const Column& y = an ? b : a;
        record(report, a.name(), b.name(), "correlation_ratio", true,
               [&] { return correlation_ratio(g.codes(), y.values()); });
      }
    }
  }

  // Candidates: symmetric scores at or above the threshold, one entry per pair.
  const std::map<std::string, std::size_t> order = [&] {
    std::map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < report.features.size(); ++i) m[report.features[i]] = i;
    return m;
  }();
  for (const auto& [key, v] : report.pairwise) {
    const auto& [a, b, metric] = key;
    if (metric == "theils_u" || order.at(a) > order.at(b)) continue;
    if (std::fabs(v) >= config.high_correlation_threshold) report.candidates.push_back({a, b, metric, v});
  }
  std::sort(report.candidates.begin(), report.candidates.end(), [&](const PairScore& x, const PairScore& y) {
    if (std::fabs(x.score) != std::fabs(y.score)) return std::fabs(x.score) > std::fabs(y.score);
    return std::tie(x.a, x.b, x.metric) < std::tie(y.a, y.b, y.metric);
  });

  std::map<std::string, bool> gone;
  for (const auto& c : report.candidates) {
    if (gone[c.a] || gone[c.b]) continue;
    double ia = report.importance[c.a], ib = report.importance[c.b];
    bool drop_a = ia < ib || (ia == ib && c.a > c.b);
    const auto& loser = drop_a ? c.a : c.b;
    const auto& winner = drop_a ? c.b : c.a;
    gone[loser] = true;
    std::ostringstream why;
    why << loser << " ~ " << winner << " " << c.metric << "=" << format_number(c.score) << "; importance "
        << format_number(report.importance[loser]) << " vs " << format_number(report.importance[winner]);
    report.pruned.push_back({loser, why.str()});
  }
  return report;
}

/// CSV rows `a,b,metric,score`; target rows use the target name as `b`.
inline std::string format_association_csv(const AssociationReport& report) {
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < report.features.size(); ++i) order[report.features[i]] = i;
  std::string out = "a,b,metric,score\n";
  for (const auto& [key, v] : report.pairwise) {
    const auto& [a, b, metric] = key;
    if (metric != "theils_u" && order.at(a) > order.at(b)) continue;
    out += a + "," + b + "," + metric + "," + format_number(v) + "\n";
  }
  for (const auto& [key, v] : report.target_importance) {
    out += key.first + "," + report.target + "," + key.second + "," + format_number(v) + "\n";
  }
  return out;
}

inline std::string format_association_summary(const AssociationReport& report) {
  std::ostringstream out;
  auto ranked = [&](FeatureKind kind) {
    std::vector<std::pair<double, std::string>> v;
    for (const auto& f : report.features) {
      if (report.kinds.at(f) == kind) v.emplace_back(report.importance.at(f), f);
    }
    std::sort(v.begin(), v.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    return v;
  };
  out << "Target: " << report.target << "\n\n";
  out << "Nominal features by importance (Cramer's V with target; chi-squared, MI):\n";
  for (const auto& [imp, f] : ranked(FeatureKind::Nominal)) {
    out << "  " << f << "  V=" << format_number(imp);
    if (auto it = report.target_importance.find({f, "chi_squared"}); it != report.target_importance.end())
      out << "  chi2=" << format_number(it->second);
    if (auto it = report.target_importance.find({f, "mutual_information"}); it != report.target_importance.end())
      out << "  MI=" << format_number(it->second);
    out << "\n";
  }
  out << "\nNumerical features by importance (correlation ratio with target; ANOVA F):\n";
  for (const auto& [imp, f] : ranked(FeatureKind::Numerical)) {
    out << "  " << f << "  eta=" << format_number(imp);
    if (auto it = report.target_importance.find({f, "anova_f"}); it != report.target_importance.end())
      out << "  F=" << format_number(it->second);
    out << "\n";
  }
  out << "\nHighly correlated pairs: " << report.candidates.size() << "\n";
  for (const auto& c : report.candidates) {
    out << "  " << c.a << " / " << c.b << "  " << c.metric << "=" << format_number(c.score) << "\n";
  }
  out << "\nPruned:\n";
  for (const auto& p : report.pruned) out << "  " << p.column << "  (" << p.justification << ")\n";
  if (!report.failures.empty()) {
    out << "\nMetric failures: " << report.failures.size() << "\n";
    for (const auto& f : report.failures) out << "  " << f.a << " / " << f.b << " " << f.metric << ": " << f.message << "\n";
  }
  return out.str();
}

/// Reads back the pruned-column list written by the analyze stage.
inline std::vector<std::string> parse_prune_list(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    auto comma = line.find(',');
    auto name = csv_detail::trim(line.substr(0, comma));
    if (!name.empty()) out.push_back(name);
  }
  return out;
}

inline std::string format_prune_list(const AssociationReport& report) {
  std::string out = "column,justification\n";
  for (const auto& p : report.pruned) out += p.column + "," + csv_detail::quote_if_needed(p.justification) + "\n";
  return out;
}

}  // namespace forge
