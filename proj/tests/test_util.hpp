#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "forge/table.hpp"

namespace forge::test {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("forge_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Column nominal(const std::string& name, std::vector<std::int32_t> v, ColumnRole role = ColumnRole::Feature) {
  return Column({name, FeatureKind::Nominal, role}, std::move(v));
}

inline Column numerical(const std::string& name, std::vector<double> v, ColumnRole role = ColumnRole::Feature) {
  return Column({name, FeatureKind::Numerical, role}, std::move(v));
}

inline Column text(const std::string& name, std::vector<std::string> v, ColumnRole role = ColumnRole::Feature) {
  return Column({name, FeatureKind::Text, role}, std::move(v));
}

inline Column target(std::vector<std::int32_t> v) { return nominal("Target", std::move(v), ColumnRole::Target); }

}  // namespace forge::test
