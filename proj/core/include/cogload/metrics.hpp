#pragma once

#include "cogload/types.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cogload::eval {

using Probabilities = std::array<double, kNumClasses>;
using ConfusionMatrix = std::array<std::array<std::size_t, kNumClasses>, kNumClasses>;  // [true][predicted]

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct ClassificationReport {
  std::size_t n = 0;
  ConfusionMatrix confusion{};
  std::array<std::array<double, kNumClasses>, kNumClasses> row_percent{};
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  // Undefined (nullopt) when a class has no positives or no negatives.
  std::array<std::optional<double>, kNumClasses> roc_auc{};
  std::array<std::optional<double>, kNumClasses> auprc{};
  std::optional<double> macro_roc_auc;
  std::optional<double> macro_auprc;
  std::array<std::vector<CurvePoint>, kNumClasses> roc_curves{};  // (FPR, TPR)
  double severe_misclassification_rate = 0.0;
  std::vector<std::string> notes;
  bool operator==(const ClassificationReport&) const = default;
};

ClassificationReport classification_report(std::span<const Probabilities> probabilities,
                                            std::span<const LoadLabel> labels);

/// One-vs-rest ROC points from a descending threshold sweep; tied scores
/// move together. Returns nullopt when positives or negatives are absent.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const bool> positive,
                              std::vector<CurvePoint>* curve = nullptr);

/// Trapezoidal area under precision-recall; the curve starts at recall 0 with
/// the first achievable precision.
std::optional<double> average_precision_trapezoid(std::span<const double> scores, std::span<const bool> positive);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  bool operator==(const MetricSummary&) const = default;
};

/// Summary over the finite entries of `values`.
MetricSummary summarize(std::span<const double> values);

}  // namespace cogload::eval
