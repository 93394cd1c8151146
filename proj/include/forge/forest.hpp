#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "forge/table.hpp"

namespace forge {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_leaf = 5;
  std::size_t mtry = 0;  // 0: ceil(sqrt(p)) for nominal targets, ceil(p/3) for numerical
  std::uint64_t seed = 0;
  double sample_fraction = 1.0;  // bootstrap draws as a fraction of the training rows
  bool compute_oob = true;
  std::size_t threads = 0;  // 0: hardware concurrency
};

/// Row-major predictor matrix. Nominal codes are stored as reals; missing is NaN.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  std::vector<double> values;
  std::size_t rows = 0;

  std::size_t cols() const { return names.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols(), cols()}; }

  static FeatureMatrix from_table(const DataTable& table, const std::vector<std::string>& names) {
    FeatureMatrix m;
    m.names = names;
    m.rows = table.n_rows();
    std::vector<const Column*> cols;
    for (const auto& n : names) {
      const auto& c = table.column(n);
      if (c.kind() == FeatureKind::Text) throw Error(ErrorKind::SchemaMismatch, "text predictor '" + n + "'");
      cols.push_back(&c);
      m.kinds.push_back(c.kind());
    }
    m.values.resize(m.rows * names.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      for (std::size_t r = 0; r < m.rows; ++r) m.values[r * names.size() + j] = cols[j]->as_double(r);
    }
    return m;
  }
};

struct TreeNode {
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::size_t feature = 0;
  bool nominal_split = false;
  double threshold = 0;                 // numerical: x <= threshold goes left
  std::vector<std::int32_t> left_set;   // nominal: sorted codes going left
  std::vector<double> histogram;        // classification leaves, indexed by class slot
  double mean = 0;                      // regression leaves
  std::size_t n = 0;

  bool is_leaf() const { return left < 0; }

  bool goes_left(std::span<const double> x) const {
    double v = x[feature];
    if (nominal_split) {
      if (is_missing(v)) return std::binary_search(left_set.begin(), left_set.end(), kMissingCode);
      return std::binary_search(left_set.begin(), left_set.end(), static_cast<std::int32_t>(v));
    }
    return !is_missing(v) && v <= threshold;
  }
};

class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const TreeNode& leaf(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      i = static_cast<std::size_t>(nodes_[i].goes_left(x) ? nodes_[i].left : nodes_[i].right);
    }
    return nodes_[i];
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

namespace forest_detail {

/// Index of the largest entry, lowest index on ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct Candidate {
  bool valid = false;
  double gain = -1;
  std::size_t feature = 0;
  bool nominal = false;
  double threshold = 0;
  std::vector<std::int32_t> left_set;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, std::span<const double> y, bool classification, std::size_t n_classes,
              const ForestConfig& cfg, std::size_t mtry, std::uint64_t seed)
      : x_(x), y_(y), cls_(classification), n_classes_(n_classes), cfg_(cfg), mtry_(mtry), rng_(seed) {}

  Tree grow(std::vector<std::size_t> sample) {
    idx_ = std::move(sample);
    nodes_.clear();
    build(0, idx_.size(), 0);
    return Tree(std::move(nodes_));
  }

 private:
  // Sum-form impurity: Gini n - sum(c^2)/n, or SSE sum(y^2) - (sum y)^2 / n.
  struct Stats {
    std::vector<double> counts;
    double sum = 0, sum2 = 0, n = 0;

    void add(double y, bool cls) {
      n += 1;
      if (cls) {
        counts[static_cast<std::size_t>(y)] += 1;
      } else {
        sum += y;
        sum2 += y * y;
      }
    }
    void remove(double y, bool cls) {
      n -= 1;
      if (cls) {
        counts[static_cast<std::size_t>(y)] -= 1;
      } else {
        sum -= y;
        sum2 -= y * y;
      }
    }
    double impurity(bool cls) const {
      if (n <= 0) return 0;
      if (cls) {
        double s = 0;
        for (double c : counts) s += c * c;
        return n - s / n;
      }
      return std::max(0.0, sum2 - sum * sum / n);
    }
  };

  Stats empty_stats() const {
    Stats s;
    if (cls_) s.counts.assign(n_classes_, 0.0);
    return s;
  }

  std::int32_t make_leaf(std::size_t begin, std::size_t end) {
    TreeNode node;
    node.n = end - begin;
    if (cls_) {
      node.histogram.assign(n_classes_, 0.0);
      for (std::size_t i = begin; i < end; ++i) node.histogram[static_cast<std::size_t>(y_[idx_[i]])] += 1;
    } else {
      double s = 0;
      for (std::size_t i = begin; i < end; ++i) s += y_[idx_[i]];
      node.mean = s / static_cast<double>(node.n);
    }
    nodes_.push_back(std::move(node));
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::int32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
    const std::size_t n = end - begin;
    Stats all = empty_stats();
    for (std::size_t i = begin; i < end; ++i) all.add(y_[idx_[i]], cls_);
    const double parent = all.impurity(cls_);
    const bool depth_ok = !cfg_.max_depth || depth < *cfg_.max_depth;
    if (n < 2 * cfg_.min_leaf || parent <= 1e-12 * std::max(1.0, all.n) || !depth_ok) return make_leaf(begin, end);

    Candidate best;
    const std::size_t p = x_.cols();
    std::vector<std::size_t> feats(p);
    std::iota(feats.begin(), feats.end(), std::size_t{0});
    for (std::size_t k = 0; k < mtry_ && k < p; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, p - 1);
      std::swap(feats[k], feats[pick(rng_)]);
      evaluate(feats[k], begin, end, parent, best);
    }
    if (!best.valid) return make_leaf(begin, end);

    TreeNode node;
    node.n = n;
    node.feature = best.feature;
    node.nominal_split = best.nominal;
    node.threshold = best.threshold;
    node.left_set = std::move(best.left_set);
    auto mid_it = std::stable_partition(idx_.begin() + static_cast<std::ptrdiff_t>(begin),
                                        idx_.begin() + static_cast<std::ptrdiff_t>(end),
                                        [&](std::size_t r) { return node.goes_left(x_.row(r)); });
    const auto mid = static_cast<std::size_t>(mid_it - idx_.begin());
    nodes_.push_back(std::move(node));
    const auto self = nodes_.size() - 1;
    auto l = build(begin, mid, depth + 1);
    auto r = build(mid, end, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return static_cast<std::int32_t>(self);
  }

  void consider(Candidate& best, double gain, std::size_t feature, bool nominal, double threshold,
                std::vector<std::int32_t> left_set) {
    if (gain < -1e-9) return;
    if (best.valid && gain <= best.gain) return;
    best.valid = true;
    best.gain = gain;
    best.feature = feature;
    best.nominal = nominal;
    best.threshold = threshold;
    best.left_set = std::move(left_set);
  }

  void evaluate(std::size_t f, std::size_t begin, std::size_t end, double parent, Candidate& best) {
    const double min_leaf = static_cast<double>(cfg_.min_leaf);
    if (x_.kinds[f] == FeatureKind::Numerical) {
      std::vector<std::pair<double, double>> pts;
      Stats right = empty_stats();
      pts.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        double v = x_.at(idx_[i], f);
        double yv = y_[idx_[i]];
        if (is_missing(v)) {
          right.add(yv, cls_);  // missing always routes right
        } else {
          pts.emplace_back(v, yv);
        }
      }
      if (pts.size() < 2) return;
      std::sort(pts.begin(), pts.end());
      if (pts.front().first == pts.back().first) return;
      for (const auto& [v, yv] : pts) right.add(yv, cls_);
      Stats left = empty_stats();
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        left.add(pts[i].second, cls_);
        right.remove(pts[i].second, cls_);
        if (pts[i].first == pts[i + 1].first) continue;
        if (left.n < min_leaf || right.n < min_leaf) continue;
        double gain = parent - left.impurity(cls_) - right.impurity(cls_);
        consider(best, gain, f, false, 0.5 * (pts[i].first + pts[i + 1].first), {});
      }
      return;
    }

    // Nominal predictor: per-category stats, missing treated as its own code.
    std::vector<std::int32_t> cats;
    for (std::size_t i = begin; i < end; ++i) {
      double v = x_.at(idx_[i], f);
      cats.push_back(is_missing(v) ? kMissingCode : static_cast<std::int32_t>(v));
    }
    std::vector<std::int32_t> levels = cats;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.size() < 2) return;
    std::vector<Stats> per(levels.size(), empty_stats());
    Stats total = empty_stats();
    for (std::size_t i = begin; i < end; ++i) {
      auto li = std::lower_bound(levels.begin(), levels.end(), cats[i - begin]) - levels.begin();
      per[static_cast<std::size_t>(li)].add(y_[idx_[i]], cls_);
      total.add(y_[idx_[i]], cls_);
    }

    auto try_subset = [&](const std::vector<std::size_t>& left_levels) {
      Stats left = empty_stats();
      for (auto li : left_levels) {
        const auto& s = per[li];
        left.n += s.n;
        left.sum += s.sum;
        left.sum2 += s.sum2;
        for (std::size_t c = 0; c < left.counts.size(); ++c) left.counts[c] += s.counts[c];
      }
      Stats right = total;
      right.n -= left.n;
      right.sum -= left.sum;
      right.sum2 -= left.sum2;
      for (std::size_t c = 0; c < right.counts.size(); ++c) right.counts[c] -= left.counts[c];
      if (left.n < min_leaf || right.n < min_leaf) return;
      double gain = parent - left.impurity(cls_) - right.impurity(cls_);
      std::vector<std::int32_t> codes;
      for (auto li : left_levels) codes.push_back(levels[li]);
      std::sort(codes.begin(), codes.end());
      consider(best, gain, f, true, 0, std::move(codes));
    };

    auto scan_ordered = [&](auto key) {
      std::vector<std::size_t> order(levels.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
      std::vector<std::size_t> prefix;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        prefix.push_back(order[i]);
        try_subset(prefix);
      }
    };

    if (!cls_) {
      scan_ordered([&](std::size_t li) { return per[li].sum / per[li].n; });
      return;
    }
    if (levels.size() <= 32) {
      for (std::size_t li = 0; li < levels.size(); ++li) try_subset({li});
    }
    for (std::size_t c = 0; c < n_classes_; ++c) {
      scan_ordered([&](std::size_t li) { return per[li].counts[c] / per[li].n; });
    }
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  bool cls_;
  std::size_t n_classes_;
  const ForestConfig& cfg_;
  std::size_t mtry_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> idx_;
  std::vector<TreeNode> nodes_;
};

/// Lexicographic total order on (row values..., target) with NaN last.
inline bool row_less(const FeatureMatrix& x, std::span<const double> y, std::size_t a, std::size_t b) {
  auto cmp = [](double u, double v) {
    const bool mu = is_missing(u), mv = is_missing(v);
    if (mu || mv) return mu == mv ? 0 : (mu ? 1 : -1);
    return u < v ? -1 : (u > v ? 1 : 0);
  };
  for (std::size_t j = 0; j < x.cols(); ++j) {
    int c = cmp(x.at(a, j), x.at(b, j));
    if (c) return c < 0;
  }
  return cmp(y[a], y[b]) < 0;
}

}  // namespace forest_detail

/// Random forest over mixed predictors: Gini splits for nominal targets,
/// variance reduction for numerical ones.
class Forest {
 public:
  Forest() = default;

  /// Classification forest from explicit trees; `classes` maps histogram slots to codes.
  static Forest classifier(std::vector<std::string> predictors, std::vector<FeatureKind> kinds,
                           std::vector<std::int32_t> classes, std::vector<Tree> trees) {
    Forest f;
    f.predictors_ = std::move(predictors);
    f.kinds_ = std::move(kinds);
    f.target_kind_ = FeatureKind::Nominal;
    f.classes_ = std::move(classes);
    f.trees_ = std::move(trees);
    return f;
  }

  static Forest regressor(std::vector<std::string> predictors, std::vector<FeatureKind> kinds,
                          std::vector<Tree> trees) {
    Forest f;
    f.predictors_ = std::move(predictors);
    f.kinds_ = std::move(kinds);
    f.target_kind_ = FeatureKind::Numerical;
    f.trees_ = std::move(trees);
    return f;
  }

  /// Majority vote (ties: lower class code) or mean of tree predictions.
  double predict_row(std::span<const double> x) const {
    if (single_class_) return constant_;
    if (target_kind_ == FeatureKind::Numerical) {
      double s = 0;
      for (const auto& t : trees_) s += t.leaf(x).mean;
      return s / static_cast<double>(trees_.size());
    }
    std::vector<double> votes(classes_.size(), 0.0);
    for (const auto& t : trees_) votes[forest_detail::argmax(t.leaf(x).histogram)] += 1;
    return classes_[forest_detail::argmax(votes)];
  }

  Column predict(const DataTable& rows) const {
    for (std::size_t j = 0; j < predictors_.size(); ++j) {
      auto i = rows.find(predictors_[j]);
      if (!i || rows.column(*i).kind() != kinds_[j]) {
        throw Error(ErrorKind::SchemaMismatch, "predictor '" + predictors_[j] + "' missing or of another kind");
      }
    }
    auto x = FeatureMatrix::from_table(rows, predictors_);
    ColumnSchema schema{"prediction", target_kind_, ColumnRole::Feature};
    if (target_kind_ == FeatureKind::Numerical) {
      std::vector<double> out(x.rows);
      for (std::size_t r = 0; r < x.rows; ++r) out[r] = predict_row(x.row(r));
      return Column(schema, std::move(out));
    }
    std::vector<std::int32_t> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) out[r] = static_cast<std::int32_t>(predict_row(x.row(r)));
    return Column(schema, std::move(out));
  }

  const std::vector<std::string>& predictors() const { return predictors_; }
  const std::vector<Tree>& trees() const { return trees_; }
  FeatureKind target_kind() const { return target_kind_; }
  bool single_class_degenerate() const { return single_class_; }
  /// Out-of-bag accuracy (nominal target) or RMSE (numerical target).
  std::optional<double> oob_score() const { return oob_score_; }

 private:
  friend Forest fit_forest(const FeatureMatrix&, std::span<const double>, FeatureKind, const ForestConfig&);

  std::vector<std::string> predictors_;
  std::vector<FeatureKind> kinds_;
  FeatureKind target_kind_ = FeatureKind::Nominal;
  std::vector<std::int32_t> classes_;
  std::vector<Tree> trees_;
  bool single_class_ = false;
  double constant_ = 0;
  std::optional<double> oob_score_;
};

/// Fits on a prepared matrix. `y` holds class codes (nominal) or values and must
/// be complete. Rows are first put in a canonical order so the forest does not
/// depend on input row order; tree t draws from a generator seeded by (seed, t).
inline Forest fit_forest(const FeatureMatrix& x, std::span<const double> y, FeatureKind target_kind,
                         const ForestConfig& cfg) {
  if (cfg.n_trees < 1) throw Error(ErrorKind::InvalidArgument, "n_trees must be >= 1");
  if (x.rows != y.size()) throw Error(ErrorKind::LengthMismatch, "predictor rows differ from target length");
  if (x.rows < 2) throw Error(ErrorKind::InsufficientData, "a forest needs at least two rows");
  if (x.cols() == 0) throw Error(ErrorKind::InvalidArgument, "a forest needs at least one predictor");
  const bool cls = target_kind == FeatureKind::Nominal;

  Forest forest;
  forest.predictors_ = x.names;
  forest.kinds_ = x.kinds;
  forest.target_kind_ = target_kind;

  std::vector<double> yv(y.begin(), y.end());
  if (cls) {
    std::vector<std::int32_t> classes;
    for (double v : yv) classes.push_back(static_cast<std::int32_t>(v));
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    forest.classes_ = classes;
    for (auto& v : yv) {
      v = static_cast<double>(std::lower_bound(classes.begin(), classes.end(), static_cast<std::int32_t>(v)) -
                              classes.begin());
    }
  }
  const bool constant = std::all_of(yv.begin(), yv.end(), [&](double v) { return v == yv.front(); });
  if (constant) {
    forest.single_class_ = true;
    forest.constant_ = cls ? forest.classes_.front() : y.front();
    return forest;
  }

  // Canonical row order.
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return forest_detail::row_less(x, y, a, b); });
  FeatureMatrix cx;
  cx.names = x.names;
  cx.kinds = x.kinds;
  cx.rows = x.rows;
  cx.values.reserve(x.values.size());
  std::vector<double> cy;
  cy.reserve(x.rows);
  for (auto r : order) {
    auto row = x.row(r);
    cx.values.insert(cx.values.end(), row.begin(), row.end());
    cy.push_back(yv[r]);
  }

  const std::size_t p = x.cols();
  std::size_t mtry = cfg.mtry;
  if (mtry == 0) {
    mtry = cls ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))))
               : static_cast<std::size_t>(std::ceil(static_cast<double>(p) / 3.0));
  }
  mtry = std::clamp<std::size_t>(mtry, 1, p);
  const std::size_t n_classes = cls ? forest.classes_.size() : 0;
  const auto draws = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.sample_fraction * static_cast<double>(x.rows))));

  std::vector<Tree> trees(cfg.n_trees);
  std::vector<std::vector<std::uint32_t>> in_bag(cfg.compute_oob ? cfg.n_trees : 0);
  forest_detail::parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(t), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
    std::vector<std::size_t> sample(draws);
    for (auto& s : sample) s = pick(rng);
    if (cfg.compute_oob) {
      in_bag[t].assign(x.rows, 0);
      for (auto s : sample) in_bag[t][s]++;
    }
    std::sort(sample.begin(), sample.end());
    forest_detail::TreeBuilder builder(cx, cy, cls, n_classes, cfg, mtry, rng());
    trees[t] = builder.grow(std::move(sample));
  });
  forest.trees_ = std::move(trees);

  if (cfg.compute_oob) {
    double hits = 0, sse = 0, counted = 0;
    for (std::size_t r = 0; r < cx.rows; ++r) {
      std::vector<double> votes(n_classes, 0.0);
      double sum = 0, k = 0;
      for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        if (in_bag[t][r]) continue;
        const auto& leaf = forest.trees_[t].leaf(cx.row(r));
        if (cls) {
          votes[forest_detail::argmax(leaf.histogram)] += 1;
        } else {
          sum += leaf.mean;
        }
        k += 1;
      }
      if (k == 0) continue;
      counted += 1;
      if (cls) {
        hits += static_cast<double>(forest_detail::argmax(votes)) == cy[r] ? 1 : 0;
      } else {
        double d = sum / k - cy[r];
        sse += d * d;
      }
    }
    if (counted > 0) forest.oob_score_ = cls ? hits / counted : std::sqrt(sse / counted);
  }
  return forest;
}

/// Table front end: predictors default to every non-text Feature column other
/// than the target; rows with a missing target are left out.
inline Forest fit_forest(const DataTable& table, const std::string& target, const ForestConfig& cfg,
                         std::optional<std::vector<std::string>> predictors = std::nullopt) {
  const auto& tcol = table.column(target);
  if (tcol.kind() == FeatureKind::Text) throw Error(ErrorKind::SchemaMismatch, "text target '" + target + "'");
  if (!predictors) {
    predictors.emplace();
    for (auto i : table.feature_indices()) {
      const auto& c = table.column(i);
      if (c.name() != target && c.kind() != FeatureKind::Text) predictors->push_back(c.name());
    }
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    if (!tcol.is_missing_at(r)) rows.push_back(r);
  }
  if (rows.empty()) throw Error(ErrorKind::AllMissingTarget, "target '" + target + "' has no observed values");
  auto sub = rows.size() == table.n_rows() ? table : table.take_rows(rows);
  auto x = FeatureMatrix::from_table(sub, *predictors);
  std::vector<double> y(sub.n_rows());
  for (std::size_t r = 0; r < y.size(); ++r) y[r] = sub.column(target).as_double(r);
  return fit_forest(x, y, tcol.kind(), cfg);
}

}  // namespace forge
