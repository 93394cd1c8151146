#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "forge/csv.hpp"
#include "forge/table.hpp"

namespace forge {

/// Class counts for n rows by largest remainder: floor(p_c n) plus one for the
/// largest fractional parts, ties toward the lower class code.
inline ClassCounts apportion(const std::array<double, kNumClasses>& proportions, std::size_t n) {
  double sum = 0;
  for (double p : proportions) {
    if (!(p >= 0) || !std::isfinite(p)) throw Error(ErrorKind::InvalidProportions, "proportions must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(ErrorKind::InvalidProportions, "proportions must sum to 1");
  ClassCounts counts{};
  std::array<double, kNumClasses> frac{};
  std::size_t used = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double exact = proportions[c] / sum * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    frac[c] = exact - std::floor(exact);
    used += counts[c];
  }
  std::array<std::size_t, kNumClasses> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; used < n; ++i, ++used) ++counts[order[i % kNumClasses]];
  return counts;
}

/// Labels with exact class counts, shuffled.
inline std::vector<std::int32_t> shuffled_labels(const ClassCounts& counts, std::mt19937_64& rng) {
  std::vector<std::int32_t> y;
  for (std::size_t c = 0; c < kNumClasses; ++c) y.insert(y.end(), counts[c], static_cast<std::int32_t>(c));
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

// ---- Gaussian blobs ----

struct BlobSpec {
  std::array<double, kNumClasses> proportions{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::size_t n = 3000;
  std::size_t dims = 2;
  double separation = 4.0;  // distance of each class centre from the origin, in noise standard deviations
  std::uint64_t seed = 0;
};

/// Numerical features x1..xd with unit Gaussian noise and a nominal Target.
/// Class centres sit on a circle of radius `separation` in the (x1, x2) plane;
/// the remaining dimensions are pure noise.
inline DataTable make_blobs(const BlobSpec& spec) {
  if (spec.dims < 2) throw Error(ErrorKind::InvalidArgument, "blobs need at least two dimensions");
  std::mt19937_64 rng(spec.seed);
  auto counts = apportion(spec.proportions, spec.n);
  auto y = shuffled_labels(counts, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> x(spec.dims, std::vector<double>(spec.n));
  const double pi = std::acos(-1.0);
  for (std::size_t r = 0; r < spec.n; ++r) {
    const double angle = 2.0 * pi * static_cast<double>(y[r]) / static_cast<double>(kNumClasses);
    for (std::size_t d = 0; d < spec.dims; ++d) {
      double centre = 0;
      if (d == 0) centre = spec.separation * std::cos(angle);
      if (d == 1) centre = spec.separation * std::sin(angle);
      x[d][r] = centre + noise(rng);
    }
  }
  std::vector<Column> cols;
  for (std::size_t d = 0; d < spec.dims; ++d) {
    cols.emplace_back(ColumnSchema{"x" + std::to_string(d + 1), FeatureKind::Numerical, ColumnRole::Feature}, std::move(x[d]));
  }
  cols.emplace_back(ColumnSchema{"Target", FeatureKind::Nominal, ColumnRole::Target}, std::move(y));
  return DataTable(std::move(cols));
}

// ---- mask-and-recover tables ----

struct MaskedTable {
  DataTable complete;
  DataTable masked;
  std::vector<std::size_t> masked_rows_y;  // rows where y was masked
  std::vector<std::size_t> masked_rows_c;  // rows where c was masked
};

/// x1, x2 ~ U(1, 10); y = 2 x1 (numerical); c = [x1 > 5.5] + 2 [x2 > 5.5]
/// (nominal, a deterministic function of x1 and x2); a noise nominal column and
/// a Target. y is masked at `y_rate`, c at `c_rate`.
inline MaskedTable mask_and_recover_table(std::size_t n, double y_rate, double c_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  std::uniform_int_distribution<std::int32_t> noise_code(0, 3);
  std::uniform_int_distribution<std::int32_t> label(0, 2);
  std::vector<double> x1(n), x2(n), y(n);
  std::vector<std::int32_t> c(n), z(n), t(n);
  for (std::size_t r = 0; r < n; ++r) {
    x1[r] = u(rng);
    x2[r] = u(rng);
    y[r] = 2.0 * x1[r];
    c[r] = (x1[r] > 5.5 ? 1 : 0) + (x2[r] > 5.5 ? 2 : 0);
    z[r] = noise_code(rng);
    t[r] = label(rng);
  }
  auto build = [&](std::vector<double> yy, std::vector<std::int32_t> cc) {
    std::vector<Column> cols;
    cols.emplace_back(ColumnSchema{"x1", FeatureKind::Numerical, ColumnRole::Feature}, x1);
    cols.emplace_back(ColumnSchema{"x2", FeatureKind::Numerical, ColumnRole::Feature}, x2);
    cols.emplace_back(ColumnSchema{"y", FeatureKind::Numerical, ColumnRole::Feature}, std::move(yy));
    cols.emplace_back(ColumnSchema{"c", FeatureKind::Nominal, ColumnRole::Feature}, std::move(cc));
    cols.emplace_back(ColumnSchema{"z", FeatureKind::Nominal, ColumnRole::Feature}, z);
    cols.emplace_back(ColumnSchema{"Target", FeatureKind::Nominal, ColumnRole::Target}, t);
    return DataTable(std::move(cols));
  };
  MaskedTable out{build(y, c), DataTable{}, {}, {}};
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::shuffle(rows.begin(), rows.end(), rng);
  out.masked_rows_y.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::round(y_rate * static_cast<double>(n))));
  std::shuffle(rows.begin(), rows.end(), rng);
  out.masked_rows_c.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::round(c_rate * static_cast<double>(n))));
  std::sort(out.masked_rows_y.begin(), out.masked_rows_y.end());
  std::sort(out.masked_rows_c.begin(), out.masked_rows_c.end());
  for (auto r : out.masked_rows_y) y[r] = kMissingValue;
  for (auto r : out.masked_rows_c) c[r] = kMissingCode;
  out.masked = build(std::move(y), std::move(c));
  return out;
}

// ---- accident / vehicle / casualty triple ----

struct FixtureSpec {
  std::array<double, kNumClasses> proportions{0.871, 0.1187, 0.0103};  // slight, serious, fatal
  std::size_t n = 10000;                                               // casualties
  double separation = 1.0;  // 0: labels carry no signal
  double missingness = 0.0;
  std::uint64_t seed = 0;
};

struct Fixture {
  DataTable accidents;
  DataTable vehicles;
  DataTable casualties;
  DataTable ground_truth;  // casualty keys, severity code and class label before any missingness
  ClassCounts counts{};
};

namespace fixture_detail {

/// Column-by-column table assembly.
class Builder {
 public:
  void nominal(const std::string& name, ColumnRole role = ColumnRole::Feature) { add(name, FeatureKind::Nominal, role); }
  void numerical(const std::string& name) { add(name, FeatureKind::Numerical, ColumnRole::Feature); }
  void text(const std::string& name, ColumnRole role = ColumnRole::Feature) { add(name, FeatureKind::Text, role); }

  void set(const std::string& name, std::int32_t v) { codes_.at(name).push_back(v); }
  void set(const std::string& name, double v) { values_.at(name).push_back(v); }
  void set(const std::string& name, std::string v) { text_.at(name).push_back(std::move(v)); }

  DataTable build() {
    std::vector<Column> cols;
    for (const auto& s : schema_) {
      switch (s.kind) {
        case FeatureKind::Nominal: cols.emplace_back(s, std::move(codes_.at(s.name))); break;
        case FeatureKind::Numerical: cols.emplace_back(s, std::move(values_.at(s.name))); break;
        case FeatureKind::Text: cols.emplace_back(s, std::move(text_.at(s.name))); break;
      }
    }
    return DataTable(std::move(cols));
  }

 private:
  void add(const std::string& name, FeatureKind kind, ColumnRole role) {
    schema_.push_back({name, kind, role});
    if (kind == FeatureKind::Nominal) codes_[name];
    if (kind == FeatureKind::Numerical) values_[name];
    if (kind == FeatureKind::Text) text_[name];
  }

  std::vector<ColumnSchema> schema_;
  std::map<std::string, std::vector<std::int32_t>> codes_;
  std::map<std::string, std::vector<double>> values_;
  std::map<std::string, std::vector<std::string>> text_;
};

inline std::string two_digits(int v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

template <class T>
T pick(std::mt19937_64& rng, std::initializer_list<T> options) {
  std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
  return *(options.begin() + static_cast<std::ptrdiff_t>(d(rng)));
}

}  // namespace fixture_detail

/// Severity codes in the casualty table follow the DfT convention
/// (1 fatal, 2 serious, 3 slight).
inline std::int32_t dft_severity(std::int32_t label) { return 3 - label; }

/// Three linked tables shaped like the DfT road-safety files, with exact class
/// counts, label-dependent structure scaled by `separation`, and missing cells.
/// Some missing cells are structural (the kind the default cleaning rules
/// repair); the rest are injected at random with probability `missingness`.
inline Fixture generate_fixture(const FixtureSpec& spec) {
  using fixture_detail::pick;
  using fixture_detail::two_digits;
  if (spec.n == 0) throw Error(ErrorKind::InvalidArgument, "fixture needs at least one row");
  if (!(spec.missingness >= 0 && spec.missingness < 1)) throw Error(ErrorKind::InvalidArgument, "missingness must be in [0, 1)");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto chance = [&](double p) { return unit(rng) < p; };
  const double s = spec.separation;
  const bool structural = spec.missingness > 0;

  Fixture fx;
  fx.counts = apportion(spec.proportions, spec.n);
  const auto labels = shuffled_labels(fx.counts, rng);

  fixture_detail::Builder acc, veh, cas, truth;
  acc.text("Accident_Index", ColumnRole::Key);
  for (auto n : {"Location_Easting_OSGR", "Location_Northing_OSGR", "Longitude", "Latitude"}) acc.numerical(n);
  acc.nominal("Police_Force");
  acc.nominal("Accident_Severity");
  acc.numerical("Number_of_Vehicles");
  acc.numerical("Number_of_Casualties");
  acc.text("Date");
  acc.nominal("Day_of_Week");
  acc.text("Time");
  for (auto n : {"1st_Road_Class", "Road_Type"}) acc.nominal(n);
  acc.numerical("Speed_limit");
  for (auto n : {"Junction_Detail", "Junction_Control", "2nd_Road_Class", "Light_Conditions", "Weather_Conditions",
                 "Road_Surface_Conditions", "Urban_or_Rural_Area"}) {
    acc.nominal(n);
  }

  veh.text("Accident_Index", ColumnRole::Key);
  veh.nominal("Vehicle_Reference", ColumnRole::Key);
  for (auto n : {"Vehicle_Type", "Towing_and_Articulation", "Vehicle_Manoeuvre", "Junction_Location",
                 "Was_Vehicle_Left_Hand_Drive?", "Sex_of_Driver"}) {
    veh.nominal(n);
  }
  veh.numerical("Age_of_Driver");
  veh.nominal("Age_Band_of_Driver");
  veh.numerical("Engine_Capacity_(CC)");
  veh.numerical("Age_of_Vehicle");
  veh.nominal("Driver_Home_Area_Type");
  veh.nominal("Driver_IMD_Decile");

  cas.text("Accident_Index", ColumnRole::Key);
  cas.nominal("Vehicle_Reference", ColumnRole::Key);
  cas.nominal("Casualty_Reference", ColumnRole::Key);
  cas.nominal("Casualty_Class");
  cas.nominal("Sex_of_Casualty");
  cas.numerical("Age_of_Casualty");
  cas.nominal("Age_Band_of_Casualty");
  cas.nominal("Casualty_Severity");
  for (auto n : {"Pedestrian_Location", "Pedestrian_Movement", "Car_Passenger", "Casualty_Type", "Casualty_Home_Area_Type"}) {
    cas.nominal(n);
  }

  truth.text("Accident_Index", ColumnRole::Key);
  truth.nominal("Vehicle_Reference", ColumnRole::Key);
  truth.nominal("Casualty_Reference", ColumnRole::Key);
  truth.nominal("Casualty_Severity");
  truth.nominal("Target", ColumnRole::Target);

  auto age_band = [](double age) -> std::int32_t {
    if (age <= 5) return 1;
    if (age <= 10) return 2;
    if (age <= 15) return 3;
    if (age <= 20) return 4;
    if (age <= 25) return 5;
    if (age <= 35) return 6;
    if (age <= 45) return 7;
    if (age <= 55) return 8;
    if (age <= 65) return 9;
    if (age <= 75) return 10;
    return 11;
  };
  // Randomly blank a cell of an observed value.
  auto drop_code = [&](std::int32_t v) { return chance(spec.missingness) ? kMissingCode : v; };
  auto drop_value = [&](double v) { return chance(spec.missingness) ? kMissingValue : v; };

  std::size_t next = 0;
  std::size_t accident_no = 0;
  while (next < spec.n) {
    ++accident_no;
    char idx[32];
    std::snprintf(idx, sizeof idx, "FX%08zu", accident_no);
    const std::string aid = idx;
    const std::size_t n_vehicles = chance(0.55) ? 2 : 1;
    std::vector<std::size_t> per_vehicle(n_vehicles, 1);
    if (chance(0.25)) per_vehicle[0] += 1;
    std::size_t total = 0;
    for (auto k : per_vehicle) total += k;
    total = std::min(total, spec.n - next);
    std::int32_t worst = 0;
    for (std::size_t i = 0; i < total; ++i) worst = std::max(worst, labels[next + i]);
    const double danger = s * worst + 0.6 * gauss(rng);

    // Accident row.
    const bool rural = unit(rng) < 0.3 + 0.12 * danger;
    double speed = rural ? pick(rng, {50.0, 60.0, 60.0, 70.0}) : pick(rng, {20.0, 30.0, 30.0, 30.0, 40.0});
    if (danger > 1.5 && speed < 60) speed += 10;
    const int hour = std::clamp(static_cast<int>(std::lround(14 + 5 * gauss(rng) + (danger > 1.2 ? 6 : 0))) % 24, 0, 23);
    const int minute = static_cast<int>(unit(rng) * 60) % 60;
    const int year = 2005 + static_cast<int>(unit(rng) * 14) % 14;
    const int month = 1 + static_cast<int>(unit(rng) * 12) % 12;
    const int day = 1 + static_cast<int>(unit(rng) * 28) % 28;
    const bool daylight = hour >= 6 && hour < 18;
    std::int32_t light = daylight ? 1 : pick<std::int32_t>(rng, {4, 5, 6});
    if (!daylight && chance(0.05)) light = 7;  // darkness, lighting unknown
    const std::int32_t junction = chance(0.4) ? 0 : pick<std::int32_t>(rng, {1, 3, 6, 9});
    const double easting = 300000 + 200000 * unit(rng);
    const double northing = 100000 + 600000 * unit(rng);

    acc.set("Accident_Index", aid);
    acc.set("Location_Easting_OSGR", chance(spec.missingness / 10) ? kMissingValue : std::round(easting));
    acc.set("Location_Northing_OSGR", chance(spec.missingness / 10) ? kMissingValue : std::round(northing));
    acc.set("Longitude", std::round((easting / 100000.0 - 6.0) * 1e5) / 1e5);
    acc.set("Latitude", std::round((49.0 + northing / 110000.0) * 1e5) / 1e5);
    acc.set("Police_Force", static_cast<std::int32_t>(1 + (easting - 300000) / 20000));
    acc.set("Accident_Severity", static_cast<std::int32_t>(3 - worst));
    acc.set("Number_of_Vehicles", static_cast<double>(n_vehicles));
    acc.set("Number_of_Casualties", static_cast<double>(total));
    acc.set("Date", two_digits(day) + "/" + two_digits(month) + "/" + std::to_string(year));
    acc.set("Day_of_Week", static_cast<std::int32_t>(1 + (day + month * 3 + year) % 7));
    acc.set("Time", chance(spec.missingness / 10) ? std::string{} : two_digits(hour) + ":" + two_digits(minute));
    acc.set("1st_Road_Class", drop_code(rural ? pick<std::int32_t>(rng, {1, 2, 3, 4}) : pick<std::int32_t>(rng, {3, 4, 5, 6, 6})));
    acc.set("Road_Type", drop_code(pick<std::int32_t>(rng, {1, 2, 3, 6, 6, 6, 7})));
    acc.set("Speed_limit", drop_value(speed));
    acc.set("Junction_Detail", drop_code(junction));
    if (junction == 0) {
      acc.set("Junction_Control", structural && chance(0.7) ? kMissingCode : 0);
      acc.set("2nd_Road_Class", structural && chance(0.7) ? kMissingCode : 0);
    } else {
      acc.set("Junction_Control", drop_code(pick<std::int32_t>(rng, {1, 2, 4, 4})));
      acc.set("2nd_Road_Class", drop_code(pick<std::int32_t>(rng, {1, 3, 4, 6, 6})));
    }
    acc.set("Light_Conditions", daylight && structural && chance(0.1) ? kMissingCode : light);
    acc.set("Weather_Conditions", drop_code(pick<std::int32_t>(rng, {1, 1, 1, 1, 2, 2, 3, 5, 8, 9})));
    acc.set("Road_Surface_Conditions", drop_code(pick<std::int32_t>(rng, {1, 1, 1, 2, 2, 3, 4})));
    acc.set("Urban_or_Rural_Area", chance(0.01) ? 3 : (rural ? 2 : 1));

    std::size_t placed = 0;
    for (std::size_t v = 0; v < n_vehicles && placed < total; ++v) {
      const std::size_t here = std::min(per_vehicle[v], total - placed);
      std::int32_t vworst = 0;
      for (std::size_t i = 0; i < here; ++i) vworst = std::max(vworst, labels[next + placed + i]);
      const double vdanger = s * vworst + 0.6 * gauss(rng);
      std::int32_t vtype;
      const double roll = unit(rng);
      if (roll < 0.04 + 0.08 * std::max(0.0, vdanger)) vtype = pick<std::int32_t>(rng, {3, 5, 5});
      else if (roll < 0.16 + 0.05 * std::max(0.0, vdanger)) vtype = 1;
      else if (roll < 0.18) vtype = 22;
      else if (roll < 0.24) vtype = 11;
      else if (roll < 0.34) vtype = 19;
      else vtype = 9;
      const bool two_wheel = vtype == 1 || vtype == 3 || vtype == 5 || vtype == 22;
      const double driver_age = std::clamp(std::round(40 + 14 * gauss(rng) + 4 * vdanger), 17.0, 95.0);
      const std::int32_t home = pick<std::int32_t>(rng, {1, 1, 1, 2, 3});
      const std::int32_t driver_sex = chance(0.02) ? 3 : pick<std::int32_t>(rng, {1, 1, 2});

      veh.set("Accident_Index", aid);
      veh.set("Vehicle_Reference", static_cast<std::int32_t>(v + 1));
      veh.set("Vehicle_Type", vtype);
      veh.set("Towing_and_Articulation", two_wheel && structural && chance(0.5) ? kMissingCode : (vtype == 19 && chance(0.1) ? 1 : 0));
      veh.set("Vehicle_Manoeuvre", drop_code(vdanger > 1.0 ? pick<std::int32_t>(rng, {4, 5, 18, 18}) : pick<std::int32_t>(rng, {2, 3, 9, 18})));
      veh.set("Junction_Location", junction == 0 ? 0 : drop_code(pick<std::int32_t>(rng, {1, 2, 5, 8})));
      veh.set("Was_Vehicle_Left_Hand_Drive?", two_wheel && structural && chance(0.6) ? kMissingCode : (chance(0.02) ? 2 : 1));
      veh.set("Sex_of_Driver", drop_code(driver_sex));
      veh.set("Age_of_Driver", drop_value(driver_age));
      veh.set("Age_Band_of_Driver", age_band(driver_age));
      veh.set("Engine_Capacity_(CC)", vtype == 1 ? 0.0 : std::round(900 + 600 * unit(rng) + (vtype == 19 ? 1200 : 0)));
      veh.set("Age_of_Vehicle", drop_value(std::max(0.0, std::round(7 + 4 * gauss(rng)))));
      veh.set("Driver_Home_Area_Type", drop_code(home));
      veh.set("Driver_IMD_Decile", drop_code(1 + static_cast<std::int32_t>(unit(rng) * 10) % 10));

      for (std::size_t i = 0; i < here; ++i) {
        const std::size_t row = next + placed + i;
        const auto label = labels[row];
        const double cdanger = s * label + 0.6 * gauss(rng);
        std::int32_t cls = i == 0 ? 1 : 2;
        if (i == 0 && unit(rng) < 0.08 + 0.1 * std::max(0.0, cdanger)) cls = 3;
        if (cls == 2 && two_wheel) cls = 1;
        const double age = cls == 1 ? driver_age
                                    : std::clamp(std::round(36 + 18 * gauss(rng) + 8 * cdanger), 1.0, 99.0);
        std::int32_t ctype;
        if (cls == 3) ctype = 0;
        else if (vtype == 9) ctype = 9;
        else ctype = vtype;
        std::int32_t car_passenger = 0;
        if (cls == 2 && vtype == 9) car_passenger = pick<std::int32_t>(rng, {1, 2});
        const bool bus_or_van = vtype == 11 || vtype == 19;

        cas.set("Accident_Index", aid);
        cas.set("Vehicle_Reference", static_cast<std::int32_t>(v + 1));
        cas.set("Casualty_Reference", static_cast<std::int32_t>(i + 1));
        cas.set("Casualty_Class", cls);
        cas.set("Sex_of_Casualty", chance(0.01) ? 9 : drop_code(pick<std::int32_t>(rng, {1, 1, 2})));
        // A driver's age is sometimes recorded on only one of the two rows.
        double age_cell = age;
        if (structural && cls == 1 && chance(0.1)) age_cell = kMissingValue;
        else age_cell = drop_value(age_cell);
        cas.set("Age_of_Casualty", age_cell);
        cas.set("Age_Band_of_Casualty", age_band(age));
        cas.set("Casualty_Severity", dft_severity(label));
        cas.set("Pedestrian_Location", cls == 3 ? drop_code(chance(0.03) ? 10 : pick<std::int32_t>(rng, {1, 5, 6, 9})) : 0);
        cas.set("Pedestrian_Movement", cls == 3 ? drop_code(chance(0.03) ? 9 : pick<std::int32_t>(rng, {1, 2, 3, 8})) : 0);
        cas.set("Car_Passenger", bus_or_van && structural && chance(0.5) ? kMissingCode : car_passenger);
        cas.set("Casualty_Type", ctype);
        cas.set("Casualty_Home_Area_Type", cls == 1 ? (structural && chance(0.1) ? kMissingCode : home)
                                                    : drop_code(pick<std::int32_t>(rng, {1, 1, 2, 3})));

        truth.set("Accident_Index", aid);
        truth.set("Vehicle_Reference", static_cast<std::int32_t>(v + 1));
        truth.set("Casualty_Reference", static_cast<std::int32_t>(i + 1));
        truth.set("Casualty_Severity", dft_severity(label));
        truth.set("Target", label);
      }
      placed += here;
    }
    next += total;
  }
  fx.accidents = acc.build();
  fx.vehicles = veh.build();
  fx.casualties = cas.build();
  fx.ground_truth = truth.build();
  return fx;
}

/// accidents.csv, vehicles.csv, casualties.csv and ground_truth.csv, each with
/// a .schema sidecar.
inline void write_fixture(const std::filesystem::path& dir, const Fixture& fx) {
  save_table(dir / "accidents.csv", fx.accidents);
  save_table(dir / "vehicles.csv", fx.vehicles);
  save_table(dir / "casualties.csv", fx.casualties);
  save_table(dir / "ground_truth.csv", fx.ground_truth);
}

}  // namespace forge
