#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "forge/table.hpp"

namespace forge {

struct ClassWeights {
  std::array<double, kNumClasses> weights{1.0, 1.0, 1.0};

  double operator[](std::size_t c) const { return weights[c]; }
  double operator[](ClassLabel c) const { return weights[static_cast<std::size_t>(c)]; }

  static ClassWeights uniform() { return {}; }
  ClassWeights scaled(double k) const {
    ClassWeights w = *this;
    for (auto& v : w.weights) v *= k;
    return w;
  }
};

/// weight(c) = N / (K * n_c).
inline ClassWeights class_weights(const ClassCounts& counts) {
  double total = 0;
  for (auto c : counts) {
    if (c == 0) throw Error(ErrorKind::ZeroCount, "every class needs at least one sample");
    total += static_cast<double>(c);
  }
  ClassWeights w;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    w.weights[k] = total / (static_cast<double>(kNumClasses) * static_cast<double>(counts[k]));
  }
  return w;
}

struct SmoteConfig {
  std::size_t k_neighbors = 3;
  ClassCounts target_counts{};
  std::uint64_t seed = 0;

  /// Targets that bring every class up to the majority count.
  static SmoteConfig equalize(const ClassCounts& current, std::size_t k = 3, std::uint64_t seed = 0) {
    SmoteConfig cfg;
    cfg.k_neighbors = k;
    cfg.seed = seed;
    auto m = *std::max_element(current.begin(), current.end());
    cfg.target_counts = {m, m, m};
    return cfg;
  }
};

/// Synthetic rows appended after the originals, with the two parents of each.
struct SmoteResult {
  DataTable table;
  std::size_t original_rows = 0;
  std::vector<std::pair<std::size_t, std::size_t>> parents;  // (sample, neighbour) per synthetic row
  std::vector<double> gaps;                                    // interpolation factor u per synthetic row
};

/// SMOTE over the Feature columns: for each synthetic sample of class c pick a
/// random member x, one of its k nearest same-class neighbours z (Euclidean on
/// min-max scaled features) and emit x + u (z - x). Nominal and key cells take
/// the nearer parent's value, so codes stay valid.
inline SmoteResult smote_with_parents(const DataTable& table, const SmoteConfig& config) {
  if (config.k_neighbors < 1) throw Error(ErrorKind::InvalidArgument, "k_neighbors must be >= 1");
  const auto labels = target_labels(table);
  const auto current = class_counts(table);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (config.target_counts[c] < current[c]) {
      throw Error(ErrorKind::InvalidArgument, "target count below current count for class " +
                                                  std::string(to_string(static_cast<ClassLabel>(c))));
    }
  }

  std::vector<std::size_t> feats;
  for (auto i : table.feature_indices()) {
    if (table.column(i).kind() != FeatureKind::Text) feats.push_back(i);
  }
  const std::size_t n = table.n_rows(), p = feats.size();
  std::vector<double> scaled(n * p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto& col = table.column(feats[j]);
    double lo = 0, hi = 0;
    bool first = true;
    for (std::size_t r = 0; r < n; ++r) {
      double v = col.as_double(r);
      if (is_missing(v)) throw Error(ErrorKind::MissingValuesPresent, "SMOTE input has missing cells in '" + col.name() + "'");
      if (first || v < lo) lo = v;
      if (first || v > hi) hi = v;
      first = false;
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t r = 0; r < n; ++r) scaled[r * p + j] = (col.as_double(r) - lo) / span;
  }

  SmoteResult result;
  result.original_rows = n;
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> synth_sample, synth_neighbour;

  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::size_t need = config.target_counts[c] - current[c];
    if (need == 0) continue;
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < n; ++r) {
      if (static_cast<std::size_t>(labels[r]) == c) members.push_back(r);
    }
    if (members.size() <= config.k_neighbors) {
      throw Error(ErrorKind::TooFewMembers, std::string(to_string(static_cast<ClassLabel>(c))) + " has " +
                                                std::to_string(members.size()) + " members, needs > k");
    }
    // Exact k-NN within the class, computed lazily per chosen sample.
    std::vector<std::vector<std::size_t>> knn(members.size());
    auto neighbours = [&](std::size_t mi) -> const std::vector<std::size_t>& {
      if (!knn[mi].empty()) return knn[mi];
      std::vector<std::pair<double, std::size_t>> d;
      d.reserve(members.size() - 1);
      const double* a = &scaled[members[mi] * p];
      for (std::size_t o = 0; o < members.size(); ++o) {
        if (o == mi) continue;
        const double* b = &scaled[members[o] * p];
        double s = 0;
        for (std::size_t j = 0; j < p; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
        d.emplace_back(s, o);
      }
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(config.k_neighbors), d.end());
      for (std::size_t i = 0; i < config.k_neighbors; ++i) knn[mi].push_back(members[d[i].second]);
      return knn[mi];
    };
    std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_k(0, config.k_neighbors - 1);
    for (std::size_t s = 0; s < need; ++s) {
      const std::size_t mi = pick_member(rng);
      const std::size_t z = neighbours(mi)[pick_k(rng)];
      const double u = unit(rng);
      synth_sample.push_back(members[mi]);
      synth_neighbour.push_back(z);
      result.gaps.push_back(u);
      result.parents.emplace_back(members[mi], z);
    }
  }

  std::vector<Column> cols;
  for (const auto& col : table.columns()) {
    Column out = col;
    auto x_part = col.take(synth_sample);
    auto z_part = col.take(synth_neighbour);
    if (col.kind() == FeatureKind::Numerical && col.role() == ColumnRole::Feature) {
      auto& xv = x_part.mutable_values();
      const auto zv = z_part.values();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double u = result.gaps[i];
        xv[i] = xv[i] + u * (zv[i] - xv[i]);
      }
      out.append(x_part);
    } else if (col.role() == ColumnRole::Target) {
      out.append(x_part);
    } else {
      // Nearest parent: x when u < 0.5, else z.
      Column mixed = x_part;
      std::vector<std::size_t> pick(synth_sample.size());
      for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = result.gaps[i] < 0.5 ? synth_sample[i] : synth_neighbour[i];
      mixed = col.take(pick);
      out.append(mixed);
    }
    cols.push_back(std::move(out));
  }
  result.table = DataTable(std::move(cols));
  return result;
}

inline DataTable smote(const DataTable& table, const SmoteConfig& config) {
  return smote_with_parents(table, config).table;
}

}  // namespace forge
