#pragma once

#include <array>
#include <cstdio>
#include <cstdint>
#include <span>
#include <string>

#include "forge/csv.hpp"
#include "forge/table.hpp"

namespace forge {

struct EvaluationReport {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};  // [truth][prediction]
  double overall_accuracy = 0;
  std::array<double, kNumClasses> per_class_accuracy{};
  double average_class_accuracy = 0;
};

/// Classes absent from `truth` score 0 accuracy and still count in the average.
inline EvaluationReport evaluate(std::span<const std::int32_t> predictions, std::span<const std::int32_t> truth) {
  if (predictions.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                               std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw Error(ErrorKind::EmptyInput, "nothing to evaluate");
  EvaluationReport r;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(label_from_code(truth[i]));
    const auto p = static_cast<std::size_t>(label_from_code(predictions[i]));
    ++r.confusion[t][p];
    if (t == p) ++hits;
  }
  r.overall_accuracy = static_cast<double>(hits) / static_cast<double>(truth.size());
  double sum = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    r.per_class_accuracy[c] = row ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(row) : 0.0;
    sum += r.per_class_accuracy[c];
  }
  r.average_class_accuracy = sum / static_cast<double>(kNumClasses);
  return r;
}

inline std::string format_evaluation_csv(const EvaluationReport& r) {
  std::string out = "metric,value\n";
  out += "overall_accuracy," + format_number(r.overall_accuracy) + "\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out += "accuracy_" + std::string(to_string(static_cast<ClassLabel>(c))) + "," + format_number(r.per_class_accuracy[c]) + "\n";
  }
  out += "average_class_accuracy," + format_number(r.average_class_accuracy) + "\n";
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      out += "confusion_" + std::string(to_string(static_cast<ClassLabel>(t))) + "_as_" +
             std::string(to_string(static_cast<ClassLabel>(p))) + "," + std::to_string(r.confusion[t][p]) + "\n";
    }
  }
  return out;
}

inline std::string format_evaluation_summary(const EvaluationReport& r) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return std::string(buf);
  };
  std::string out = "overall accuracy: " + pct(r.overall_accuracy) + "\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out += std::string(to_string(static_cast<ClassLabel>(c))) + ": " + pct(r.per_class_accuracy[c]) + "\n";
  }
  out += "average per class: " + pct(r.average_class_accuracy) + "\n";
  out += "confusion (rows truth, columns prediction):\n";
  for (const auto& row : r.confusion) {
    out += " ";
    for (auto v : row) out += " " + std::to_string(v);
    out += "\n";
  }
  return out;
}

}  // namespace forge
