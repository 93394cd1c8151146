#pragma once

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forge/error.hpp"
#include "forge/table.hpp"

namespace forge {

namespace csv_detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

/// RFC 4180 record reader: comma separated, double-quote escaping, LF or CRLF.
class RecordReader {
 public:
  explicit RecordReader(std::string text) : text_(std::move(text)) {
    if (text_.starts_with("\xEF\xBB\xBF")) pos_ = 3;
  }

  bool next(std::vector<std::string>& fields) {
    fields.clear();
    if (pos_ >= text_.size()) return false;
    std::string field;
    bool quoted = false;
    while (pos_ < text_.size()) {
      char ch = text_[pos_];
      if (quoted) {
        if (ch == '"') {
          if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
            field.push_back('"');
            pos_ += 2;
            continue;
          }
          quoted = false;
          ++pos_;
          continue;
        }
        field.push_back(ch);
        ++pos_;
        continue;
      }
      if (ch == '"') {
        quoted = true;
        ++pos_;
      } else if (ch == ',') {
        fields.push_back(std::move(field));
        field.clear();
        ++pos_;
      } else if (ch == '\r' || ch == '\n') {
        if (ch == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') ++pos_;
        ++pos_;
        break;
      } else {
        field.push_back(ch);
        ++pos_;
      }
    }
    fields.push_back(std::move(field));
    return true;
  }

 private:
  std::string text_;
  std::size_t pos_ = 0;
};

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv_detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::string render_cell(const Column& col, std::size_t r) {
  if (col.is_missing_at(r)) return "-1";
  switch (col.kind()) {
    case FeatureKind::Nominal: return std::to_string(col.codes()[r]);
    case FeatureKind::Numerical: return format_number(col.values()[r]);
    case FeatureKind::Text: return csv_detail::quote_if_needed(col.text()[r]);
  }
  return {};
}

// ---- schema files: one `name,kind,role` line per column, '#' comments ----

inline FeatureKind parse_kind(const std::string& s) {
  auto k = csv_detail::lower(s);
  if (k == "nominal") return FeatureKind::Nominal;
  if (k == "numerical") return FeatureKind::Numerical;
  if (k == "text") return FeatureKind::Text;
  throw Error(ErrorKind::PlanSyntax, "unknown feature kind '" + s + "'");
}

inline ColumnRole parse_role(const std::string& s) {
  auto k = csv_detail::lower(s);
  if (k == "feature") return ColumnRole::Feature;
  if (k == "target") return ColumnRole::Target;
  if (k == "key") return ColumnRole::Key;
  if (k == "dropped") return ColumnRole::Dropped;
  throw Error(ErrorKind::PlanSyntax, "unknown column role '" + s + "'");
}

inline std::vector<ColumnSchema> parse_schema(std::string_view text) {
  std::vector<ColumnSchema> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = csv_detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto c1 = t.rfind(',');
    auto c0 = c1 == std::string::npos ? std::string::npos : t.rfind(',', c1 - 1);
    if (c0 == std::string::npos) {
      throw Error(ErrorKind::PlanSyntax, "schema line " + std::to_string(lineno) + ": expected name,kind,role");
    }
    ColumnSchema s{csv_detail::trim(t.substr(0, c0)), parse_kind(csv_detail::trim(t.substr(c0 + 1, c1 - c0 - 1))),
                   parse_role(csv_detail::trim(t.substr(c1 + 1)))};
    if (s.kind != FeatureKind::Nominal && s.role == ColumnRole::Target) {
      throw Error(ErrorKind::PlanSyntax, "target column '" + s.name + "' must be nominal");
    }
    if (s.kind == FeatureKind::Numerical && s.role == ColumnRole::Key) {
      throw Error(ErrorKind::PlanSyntax, "key column '" + s.name + "' must be nominal or text");
    }
    for (const auto& prev : out) {
      if (prev.name == s.name) throw Error(ErrorKind::DuplicateColumn, s.name);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<ColumnSchema> read_schema(const std::filesystem::path& path) {
  return parse_schema(read_file(path));
}

inline std::string format_schema(const std::vector<ColumnSchema>& schema) {
  std::string out;
  for (const auto& s : schema) {
    out += s.name + "," + std::string(to_string(s.kind)) + "," + std::string(to_string(s.role)) + "\n";
  }
  return out;
}

inline void write_schema(const std::filesystem::path& path, const std::vector<ColumnSchema>& schema) {
  write_file(path, format_schema(schema));
}

// ---- tables ----

inline DataTable parse_csv(std::string text, const std::vector<ColumnSchema>& schema) {
  csv_detail::RecordReader reader(std::move(text));
  std::vector<std::string> header;
  if (!reader.next(header)) throw Error(ErrorKind::EmptyTable, "CSV has no header row");

  std::unordered_map<std::string, const ColumnSchema*> by_name;
  for (const auto& s : schema) by_name.emplace(s.name, &s);

  std::vector<const ColumnSchema*> layout;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto name = csv_detail::trim(header[i]);
    for (std::size_t j = 0; j < i; ++j) {
      if (layout[j]->name == name) throw Error(ErrorKind::DuplicateColumn, name);
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::UnknownColumn, "header column '" + name + "' is not in the schema");
    layout.push_back(it->second);
  }
  for (const auto& s : schema) {
    bool present = false;
    for (auto* l : layout) present = present || l->name == s.name;
    if (!present) throw Error(ErrorKind::MissingColumn, "schema column '" + s.name + "' absent from header");
  }

  std::vector<std::vector<std::int32_t>> codes(layout.size());
  std::vector<std::vector<double>> values(layout.size());
  std::vector<std::vector<std::string>> texts(layout.size());

  std::vector<std::string> fields;
  std::size_t row = 0;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++row;
    if (fields.size() != layout.size()) {
      throw Error(ErrorKind::TypeParseError, "row " + std::to_string(row) + ": expected " +
                                                 std::to_string(layout.size()) + " fields, got " +
                                                 std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < layout.size(); ++c) {
      const auto& s = *layout[c];
      const std::string& raw = fields[c];
      std::string cell = s.kind == FeatureKind::Text ? raw : csv_detail::trim(raw);
      const bool missing = cell.empty() || cell == "-1";
      auto fail = [&] {
        return Error(ErrorKind::TypeParseError,
                     "row " + std::to_string(row) + ", column '" + s.name + "': cannot parse '" + cell + "'");
      };
      switch (s.kind) {
        case FeatureKind::Nominal: {
          if (missing) {
            codes[c].push_back(kMissingCode);
            break;
          }
          std::int32_t v = 0;
          auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
          if (ec != std::errc{} || p != cell.data() + cell.size() || v < kMissingCode) throw fail();
          codes[c].push_back(v);
          break;
        }
        case FeatureKind::Numerical: {
          if (missing) {
            values[c].push_back(kMissingValue);
            break;
          }
          double v = 0;
          auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
          if (ec != std::errc{} || p != cell.data() + cell.size() || !std::isfinite(v)) throw fail();
          values[c].push_back(v);
          break;
        }
        case FeatureKind::Text:
          texts[c].push_back(missing ? std::string{} : cell);
          break;
      }
    }
  }

  std::vector<Column> cols;
  for (std::size_t c = 0; c < layout.size(); ++c) {
    switch (layout[c]->kind) {
      case FeatureKind::Nominal: cols.emplace_back(*layout[c], std::move(codes[c])); break;
      case FeatureKind::Numerical: cols.emplace_back(*layout[c], std::move(values[c])); break;
      case FeatureKind::Text: cols.emplace_back(*layout[c], std::move(texts[c])); break;
    }
  }
  return DataTable(std::move(cols));
}

/// Loads a CSV whose header matches `schema` in any order. Empty cells and the
/// literal "-1" both load as missing.
inline DataTable load_csv(const std::filesystem::path& path, const std::vector<ColumnSchema>& schema) {
  return parse_csv(read_file(path), schema);
}

inline std::string format_csv(const DataTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.n_cols(); ++c) {
    if (c) out.push_back(',');
    out += csv_detail::quote_if_needed(table.column(c).name());
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < table.n_cols(); ++c) {
      if (c) out.push_back(',');
      out += render_cell(table.column(c), r);
    }
    out.push_back('\n');
  }
  return out;
}

inline void save_csv(const std::filesystem::path& path, const DataTable& table) {
  write_file(path, format_csv(table));
}

/// Table plus its `<stem>.schema` sidecar, the form every pipeline stage exchanges.
inline void save_table(const std::filesystem::path& csv_path, const DataTable& table) {
  save_csv(csv_path, table);
  auto schema_path = csv_path;
  schema_path.replace_extension(".schema");
  write_schema(schema_path, table.schema());
}

inline DataTable load_table(const std::filesystem::path& csv_path) {
  auto schema_path = csv_path;
  schema_path.replace_extension(".schema");
  return load_csv(csv_path, read_schema(schema_path));
}

}  // namespace forge
