#include "n2i/metrics.hpp"

#include <fmt/format.h>

#include "n2i/error.hpp"

namespace n2i {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) noexcept { return a += b; }

ConfusionCounts count_outcomes(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size()) {
    throw Error(ErrorCode::LengthMismatch,
                fmt::format("{} predictions against {} gold labels", predictions.size(), gold.size()));
  }
  if (predictions.empty()) throw Error(ErrorCode::InvalidArgument, "no labels to compare");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i];
    const int g = gold[i];
    if ((p != 0 && p != 1) || (g != 0 && g != 1)) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("non-binary label at position {}", i));
    }
    if (p == 1) {
      (g == 1 ? c.tp : c.fp)++;
    } else {
      (g == 0 ? c.tn : c.fn)++;
    }
  }
  return c;
}

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall) {
  if (!precision || !recall || *precision + *recall == 0.0) return std::nullopt;
  return 2.0 * *precision * *recall / (*precision + *recall);
}

std::optional<double> balanced_accuracy(std::optional<double> recall, std::optional<double> specificity) {
  if (!recall || !specificity) return std::nullopt;
  return (*recall + *specificity) / 2.0;
}

MetricReport metrics_from_counts(const ConfusionCounts& c) {
  MetricReport m;
  m.counts = c;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.f1 = f1_score(m.precision, m.recall);
  m.balanced_accuracy = balanced_accuracy(m.recall, m.specificity);
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.fnr = ratio(c.fn, c.fn + c.tp);
  return m;
}

MetricReport compute_metrics(std::span<const int> predictions, std::span<const int> gold) {
  return metrics_from_counts(count_outcomes(predictions, gold));
}

void to_json(nlohmann::json& j, const ConfusionCounts& c) {
  j = nlohmann::json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

void to_json(nlohmann::json& j, const MetricReport& m) {
  j = nlohmann::json{{"counts", m.counts},
                     {"accuracy", optional_json(m.accuracy)},
                     {"precision", optional_json(m.precision)},
                     {"recall", optional_json(m.recall)},
                     {"specificity", optional_json(m.specificity)},
                     {"f1", optional_json(m.f1)},
                     {"balanced_accuracy", optional_json(m.balanced_accuracy)},
                     {"fpr", optional_json(m.fpr)},
                     {"fnr", optional_json(m.fnr)}};
}

}  // namespace n2i
