#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "json.hpp"

namespace n2i {

/// Positive class = 1 ("the provision exists").
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  [[nodiscard]] std::size_t total() const noexcept { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) noexcept;

/// Ratios with a zero denominator are absent rather than 0.
struct MetricReport {
  ConfusionCounts counts;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> f1;
  std::optional<double> balanced_accuracy;
  std::optional<double> fpr;
  std::optional<double> fnr;
};

/// Throws LengthMismatch on unequal lengths, InvalidArgument on empty input
/// or a label outside {0, 1}.
ConfusionCounts count_outcomes(std::span<const int> predictions, std::span<const int> gold);
MetricReport metrics_from_counts(const ConfusionCounts& counts);
MetricReport compute_metrics(std::span<const int> predictions, std::span<const int> gold);

/// Harmonic mean; absent when either input is absent or both are 0.
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);
std::optional<double> balanced_accuracy(std::optional<double> recall, std::optional<double> specificity);

void to_json(nlohmann::json& j, const ConfusionCounts& c);
void to_json(nlohmann::json& j, const MetricReport& m);

}  // namespace n2i
