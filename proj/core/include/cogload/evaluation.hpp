#pragma once

#include "cogload/controller.hpp"
#include "cogload/metrics.hpp"
#include "cogload/model_io.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cogload::eval {

using Predictor = std::function<std::vector<Probabilities>(const Dataset&)>;
using Metric = std::function<double(std::span<const Probabilities>, std::span<const LoadLabel>)>;

double accuracy_metric(std::span<const Probabilities> probabilities, std::span<const LoadLabel> labels);
double macro_f1_metric(std::span<const Probabilities> probabilities, std::span<const LoadLabel> labels);

/// Predictor over raw features: the bundle's normalizer, then the network.
/// The bundle must outlive the predictor.
Predictor bundle_predictor(const model::ModelBundle& bundle);

struct ImportanceReport {
  double baseline = 0.0;
  int repeats = 0;
  std::uint64_t seed = 0;
  std::array<double, kFeatureCount> mean{};  // baseline minus permuted metric
  std::array<double, kFeatureCount> std{};   // population std over repeats
  bool operator==(const ImportanceReport&) const = default;
};

/// Each repeat shuffles one feature across sequences, moving all four windows
/// of a sequence together. Throws LengthMismatch for unlabelled sequences.
ImportanceReport permutation_importance(const Predictor& predict, const Dataset& data,
                                        const Metric& metric = accuracy_metric, int repeats = 10,
                                        std::uint64_t seed = 42);

struct ConditionSummary {
  std::size_t sessions = 0;
  MetricSummary final_difficulty;
  MetricSummary weighted_score;  // per-session mean weighted score
  bool operator==(const ConditionSummary&) const = default;
};

struct ConvergenceReport {
  std::map<std::string, ConditionSummary> conditions;  // "model/single", "self/dual", ...
  // "model-self/<task>" and "dual-single/<control>": differences of mean final difficulty.
  std::map<std::string, double> deltas;
  bool operator==(const ConvergenceReport&) const = default;
};

std::string condition_key(control::ControlType control, control::TaskType task);

/// Throws EmptyCondition when there are no logs or a `required` condition has none.
ConvergenceReport convergence_analysis(std::span<const control::SessionLog> logs,
                                       std::span<const std::string> required = {});

}  // namespace cogload::eval
