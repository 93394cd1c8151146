#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "forge/error.hpp"

namespace forge {

enum class FeatureKind { Nominal, Numerical, Text };
enum class ColumnRole { Feature, Target, Key, Dropped };

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Nominal: return "nominal";
    case FeatureKind::Numerical: return "numerical";
    case FeatureKind::Text: return "text";
  }
  return "?";
}

inline std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Feature: return "feature";
    case ColumnRole::Target: return "target";
    case ColumnRole::Key: return "key";
    case ColumnRole::Dropped: return "dropped";
  }
  return "?";
}

struct ColumnSchema {
  std::string name;
  FeatureKind kind = FeatureKind::Nominal;
  ColumnRole role = ColumnRole::Feature;

  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

/// Nominal missing marker. Numerical cells use NaN, text cells the empty string;
/// all three render as "-1" (text: empty) on export.
inline constexpr std::int32_t kMissingCode = -1;
inline constexpr double kMissingValue = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

/// Severity classes. Codes are fixed: 0 slight, 1 serious, 2 fatal.
enum class ClassLabel : std::int32_t { Slight = 0, Serious = 1, Fatal = 2 };
inline constexpr std::size_t kNumClasses = 3;
using ClassCounts = std::array<std::size_t, kNumClasses>;

inline std::string_view to_string(ClassLabel c) {
  switch (c) {
    case ClassLabel::Slight: return "slight";
    case ClassLabel::Serious: return "serious";
    case ClassLabel::Fatal: return "fatal";
  }
  return "?";
}

inline ClassLabel label_from_code(std::int32_t code) {
  if (code < 0 || code >= static_cast<std::int32_t>(kNumClasses)) {
    throw Error(ErrorKind::LabelOutOfRange, "class code " + std::to_string(code));
  }
  return static_cast<ClassLabel>(code);
}

class Column {
 public:
  using Storage = std::variant<std::vector<std::int32_t>, std::vector<double>,
                               std::vector<std::string>>;

  Column(ColumnSchema schema, std::vector<std::int32_t> codes)
      : schema_(std::move(schema)), data_(std::move(codes)) {
    check();
  }
  Column(ColumnSchema schema, std::vector<double> values)
      : schema_(std::move(schema)), data_(std::move(values)) {
    check();
  }
  Column(ColumnSchema schema, std::vector<std::string> text)
      : schema_(std::move(schema)), data_(std::move(text)) {
    check();
  }

  /// An all-missing column of the given kind.
  static Column missing(ColumnSchema schema, std::size_t n) {
    switch (schema.kind) {
      case FeatureKind::Nominal:
        return Column(std::move(schema), std::vector<std::int32_t>(n, kMissingCode));
      case FeatureKind::Numerical:
        return Column(std::move(schema), std::vector<double>(n, kMissingValue));
      case FeatureKind::Text:
        break;
    }
    return Column(std::move(schema), std::vector<std::string>(n));
  }

  const ColumnSchema& schema() const noexcept { return schema_; }
  const std::string& name() const noexcept { return schema_.name; }
  FeatureKind kind() const noexcept { return schema_.kind; }
  ColumnRole role() const noexcept { return schema_.role; }
  void set_role(ColumnRole role) noexcept { schema_.role = role; }
  void set_name(std::string name) { schema_.name = std::move(name); }

  std::size_t size() const noexcept {
    return std::visit([](const auto& v) { return v.size(); }, data_);
  }

  std::span<const std::int32_t> codes() const { return std::get<0>(data_); }
  std::span<const double> values() const { return std::get<1>(data_); }
  std::span<const std::string> text() const { return std::get<2>(data_); }
  std::vector<std::int32_t>& mutable_codes() { return std::get<0>(data_); }
  std::vector<double>& mutable_values() { return std::get<1>(data_); }
  std::vector<std::string>& mutable_text() { return std::get<2>(data_); }

  bool is_missing_at(std::size_t r) const {
    switch (kind()) {
      case FeatureKind::Nominal: return codes()[r] == kMissingCode;
      case FeatureKind::Numerical: return forge::is_missing(values()[r]);
      case FeatureKind::Text: return text()[r].empty();
    }
    return false;
  }

  std::size_t missing_count() const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < size(); ++r) n += is_missing_at(r) ? 1 : 0;
    return n;
  }

  /// Numeric view of a cell: nominal codes as reals, missing as NaN.
  double as_double(std::size_t r) const {
    switch (kind()) {
      case FeatureKind::Nominal: {
        auto c = codes()[r];
        return c == kMissingCode ? kMissingValue : static_cast<double>(c);
      }
      case FeatureKind::Numerical: return values()[r];
      case FeatureKind::Text: break;
    }
    throw Error(ErrorKind::SchemaMismatch, "text column '" + name() + "' has no numeric view");
  }

  Column take(std::span<const std::size_t> rows) const {
    return std::visit(
        [&](const auto& v) {
          std::remove_cvref_t<decltype(v)> out;
          out.reserve(rows.size());
          for (auto r : rows) out.push_back(v[r]);
          return Column(schema_, std::move(out));
        },
        data_);
  }

  void append(const Column& other) {
    if (other.kind() != kind()) throw Error(ErrorKind::SchemaMismatch, "append kind mismatch on " + name());
    std::visit(
        [&](auto& v) {
          const auto& o = std::get<std::remove_cvref_t<decltype(v)>>(other.data_);
          v.insert(v.end(), o.begin(), o.end());
        },
        data_);
  }

  const Storage& storage() const noexcept { return data_; }

  friend bool operator==(const Column& a, const Column& b) {
    if (a.schema_ != b.schema_ || a.size() != b.size()) return false;
    if (a.kind() != FeatureKind::Numerical) return a.data_ == b.data_;
    auto x = a.values(), y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (forge::is_missing(x[i]) != forge::is_missing(y[i])) return false;
      if (!forge::is_missing(x[i]) && x[i] != y[i]) return false;
    }
    return true;
  }

 private:
  void check() const {
    const bool ok = (kind() == FeatureKind::Nominal && data_.index() == 0) ||
                    (kind() == FeatureKind::Numerical && data_.index() == 1) ||
                    (kind() == FeatureKind::Text && data_.index() == 2);
    if (!ok) throw Error(ErrorKind::SchemaMismatch, "storage does not match kind for column '" + name() + "'");
    if (data_.index() == 0) {
      for (auto c : std::get<0>(data_)) {
        if (c < kMissingCode) throw Error(ErrorKind::InvalidArgument, "nominal code < -1 in '" + name() + "'");
      }
    } else if (data_.index() == 1) {
      for (auto v : std::get<1>(data_)) {
        if (std::isinf(v)) throw Error(ErrorKind::InvalidArgument, "non-finite value in '" + name() + "'");
      }
    }
  }

  ColumnSchema schema_;
  Storage data_;
};

/// Columnar mixed-type table. Value type: every transformation returns a copy.
class DataTable {
 public:
  DataTable() = default;

  explicit DataTable(std::vector<Column> columns) : columns_(std::move(columns)) {
    n_rows_ = columns_.empty() ? 0 : columns_.front().size();
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].size() != n_rows_) {
        throw Error(ErrorKind::SchemaMismatch, "column '" + columns_[i].name() + "' has length " +
                                                   std::to_string(columns_[i].size()) + ", expected " +
                                                   std::to_string(n_rows_));
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (columns_[j].name() == columns_[i].name()) {
          throw Error(ErrorKind::DuplicateColumn, columns_[i].name());
        }
      }
    }
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].name() == name) return i;
    }
    return std::nullopt;
  }
  bool has(std::string_view name) const { return find(name).has_value(); }

  std::size_t index_of(std::string_view name) const {
    auto i = find(name);
    if (!i) throw Error(ErrorKind::UnknownColumn, std::string(name));
    return *i;
  }
  const Column& column(std::string_view name) const { return columns_[index_of(name)]; }

  std::vector<ColumnSchema> schema() const {
    std::vector<ColumnSchema> out;
    for (const auto& c : columns_) out.push_back(c.schema());
    return out;
  }

  std::optional<std::size_t> target_index() const {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].role() == ColumnRole::Target) {
        if (found) throw Error(ErrorKind::SchemaMismatch, "more than one target column");
        found = i;
      }
    }
    return found;
  }

  const Column& target() const {
    auto i = target_index();
    if (!i) throw Error(ErrorKind::SchemaMismatch, "table has no target column");
    return columns_[*i];
  }

  /// Indices of Feature-role columns in table order.
  std::vector<std::size_t> feature_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].role() == ColumnRole::Feature) out.push_back(i);
    }
    return out;
  }

  DataTable take_rows(std::span<const std::size_t> rows) const {
    std::vector<Column> cols;
    cols.reserve(columns_.size());
    for (const auto& c : columns_) cols.push_back(c.take(rows));
    DataTable t(std::move(cols));
    t.n_rows_ = rows.size();
    return t;
  }

  DataTable without(std::span<const std::string> names) const {
    std::vector<Column> cols;
    for (const auto& c : columns_) {
      if (std::find(names.begin(), names.end(), c.name()) == names.end()) cols.push_back(c);
    }
    DataTable t(std::move(cols));
    t.n_rows_ = n_rows_;
    return t;
  }

  DataTable with_column(Column col) const {
    if (col.size() != n_rows_ && !columns_.empty()) {
      throw Error(ErrorKind::SchemaMismatch, "column '" + col.name() + "' length mismatch");
    }
    auto cols = columns_;
    if (auto i = find(col.name())) {
      cols[*i] = std::move(col);
    } else {
      cols.push_back(std::move(col));
    }
    return DataTable(std::move(cols));
  }

  /// Mutable access for builders; callers keep column lengths consistent.
  Column& mutable_column(std::size_t i) { return columns_.at(i); }

  std::size_t incomplete_rows(bool features_only = false) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < n_rows_; ++r) {
      for (const auto& c : columns_) {
        if (features_only && c.role() != ColumnRole::Feature && c.role() != ColumnRole::Target) continue;
        if (c.is_missing_at(r)) {
          ++n;
          break;
        }
      }
    }
    return n;
  }

  std::size_t missing_cells() const {
    std::size_t n = 0;
    for (const auto& c : columns_) n += c.missing_count();
    return n;
  }

  friend bool operator==(const DataTable& a, const DataTable& b) {
    return a.n_rows_ == b.n_rows_ && a.columns_ == b.columns_;
  }

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

/// Class histogram of the target column; fails on missing or out-of-range labels.
inline ClassCounts class_counts(const DataTable& table) {
  const auto& t = table.target();
  if (t.kind() != FeatureKind::Nominal) throw Error(ErrorKind::SchemaMismatch, "target must be nominal");
  ClassCounts counts{};
  for (auto c : t.codes()) counts[static_cast<std::size_t>(label_from_code(c))]++;
  return counts;
}

inline std::vector<std::int32_t> target_labels(const DataTable& table) {
  const auto& t = table.target();
  std::vector<std::int32_t> out(t.codes().begin(), t.codes().end());
  for (auto c : out) label_from_code(c);
  return out;
}

/// Deterministic shuffled split: the first floor(n * fraction) shuffled rows train.
inline std::pair<DataTable, DataTable> split(const DataTable& table, double train_fraction,
                                             std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
  if (table.n_rows() == 0) throw Error(ErrorKind::EmptyTable, "cannot split an empty table");
  std::vector<std::size_t> order(table.n_rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(table.n_rows()) * train_fraction));
  std::span<const std::size_t> all(order);
  return {table.take_rows(all.first(n_train)), table.take_rows(all.subspan(n_train))};
}

}  // namespace forge
