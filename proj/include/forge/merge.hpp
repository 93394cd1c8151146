#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "forge/csv.hpp"
#include "forge/table.hpp"

namespace forge {

struct MergeKeys {
  std::string accident = "Accident_Index";
  std::string vehicle = "Vehicle_Reference";
};

struct OrphanCasualty {
  std::size_t casualty_row = 0;  // 0-based row in the casualties table
  std::string accident_key;
  std::string vehicle_key;
  bool missing_vehicle = false;
  bool missing_accident = false;
};

struct MergeReport {
  std::size_t casualties = 0;
  std::size_t merged = 0;
  std::vector<OrphanCasualty> orphans;
};

struct MergeResult {
  DataTable table;
  MergeReport report;
};

namespace merge_detail {

inline std::string key_text(const Column& col, std::size_t r) {
  if (col.is_missing_at(r)) return {};
  if (col.kind() == FeatureKind::Text) return col.text()[r];
  return render_cell(col, r);
}

inline std::string composite(const std::string& a, const std::string& b) { return a + '\x1f' + b; }

}  // namespace merge_detail

/// Joins casualties to vehicles on (accident, vehicle) and then to accidents on
/// the accident key. One output row per resolvable casualty, in casualty order;
/// columns are accident columns, vehicle columns, then casualty columns, with
/// the duplicated key copies removed. Pedestrians join through whichever
/// vehicle reference their casualty row carries.
inline MergeResult merge_datasets(const DataTable& accidents, const DataTable& vehicles,
                                  const DataTable& casualties, const MergeKeys& keys = {}) {
  using merge_detail::composite;
  using merge_detail::key_text;

  const auto& a_key = accidents.column(keys.accident);
  const auto& v_acc = vehicles.column(keys.accident);
  const auto& v_ref = vehicles.column(keys.vehicle);
  const auto& c_acc = casualties.column(keys.accident);
  const auto& c_ref = casualties.column(keys.vehicle);

  std::unordered_map<std::string, std::size_t> accident_rows;
  accident_rows.reserve(accidents.n_rows());
  for (std::size_t r = 0; r < accidents.n_rows(); ++r) {
    auto k = key_text(a_key, r);
    if (k.empty()) continue;
    if (!accident_rows.emplace(k, r).second) {
      throw Error(ErrorKind::DuplicateKey, "accident key '" + k + "' repeated at row " + std::to_string(r + 1));
    }
  }
  std::unordered_map<std::string, std::size_t> vehicle_rows;
  vehicle_rows.reserve(vehicles.n_rows());
  for (std::size_t r = 0; r < vehicles.n_rows(); ++r) {
    auto a = key_text(v_acc, r), v = key_text(v_ref, r);
    if (a.empty() || v.empty()) continue;
    if (!vehicle_rows.emplace(composite(a, v), r).second) {
      throw Error(ErrorKind::DuplicateKey,
                  "vehicle key (" + a + ", " + v + ") repeated at row " + std::to_string(r + 1));
    }
  }

  MergeResult result;
  result.report.casualties = casualties.n_rows();
  std::vector<std::size_t> a_idx, v_idx, c_idx;
  for (std::size_t r = 0; r < casualties.n_rows(); ++r) {
    auto a = key_text(c_acc, r), v = key_text(c_ref, r);
    auto vit = vehicle_rows.find(composite(a, v));
    auto ait = accident_rows.find(a);
    if (a.empty() || v.empty() || vit == vehicle_rows.end() || ait == accident_rows.end()) {
      result.report.orphans.push_back({r, a, v, vit == vehicle_rows.end(), ait == accident_rows.end()});
      continue;
    }
    a_idx.push_back(ait->second);
    v_idx.push_back(vit->second);
    c_idx.push_back(r);
  }

  std::vector<Column> cols;
  for (const auto& c : accidents.columns()) cols.push_back(c.take(a_idx));
  for (const auto& c : vehicles.columns()) {
    if (c.name() != keys.accident) cols.push_back(c.take(v_idx));
  }
  for (const auto& c : casualties.columns()) {
    if (c.name() == keys.accident || c.name() == keys.vehicle) continue;
    cols.push_back(c.take(c_idx));
  }
  result.table = DataTable(std::move(cols));
  result.report.merged = c_idx.size();
  return result;
}

inline std::string format_merge_report(const MergeReport& report) {
  std::string out = "casualties,merged,orphans\n";
  out += std::to_string(report.casualties) + "," + std::to_string(report.merged) + "," +
         std::to_string(report.orphans.size()) + "\n";
  if (!report.orphans.empty()) {
    out += "\ncasualty_row,accident_key,vehicle_key,missing_vehicle,missing_accident\n";
    for (const auto& o : report.orphans) {
      out += std::to_string(o.casualty_row + 1) + "," + o.accident_key + "," + o.vehicle_key + "," +
             (o.missing_vehicle ? "1" : "0") + "," + (o.missing_accident ? "1" : "0") + "\n";
    }
  }
  return out;
}

}  // namespace forge
