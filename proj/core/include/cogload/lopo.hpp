#pragma once

#include "cogload/metrics.hpp"
#include "cogload/training.hpp"
#include "cogload/windowing.hpp"

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cogload::model {

struct LopoConfig {
  TrainingConfig training;
  windowing::NormalizationScope scope = windowing::NormalizationScope::Global;
};

struct FoldResult {
  std::string participant;
  std::set<std::string> train_participants;
  std::size_t train_size = 0;  // before augmentation
  std::vector<LoadLabel> labels;
  std::vector<eval::Probabilities> probabilities;
  eval::ClassificationReport report;
  int best_epoch = 0;
};

/// Metric names in summary-table row order.
inline const std::vector<std::string> kTableMetrics = {"Accuracy", "F1", "Precision", "Recall", "AUC-ROC", "AUPRC"};

struct LopoResult {
  std::vector<FoldResult> folds;
  std::map<std::string, eval::MetricSummary> aggregate;  // keyed by kTableMetrics
};

/// Value of a summary-table metric for one report (NaN when undefined).
double table_metric(const eval::ClassificationReport& report, const std::string& name);

std::map<std::string, eval::MetricSummary> aggregate_folds(const std::vector<eval::ClassificationReport>& reports);

/// One fold per participant on raw (unnormalized) features. Normalization and
/// augmentation are fitted on each fold's training participants only.
LopoResult lopo_cross_validate(const Dataset& data, const LopoConfig& config,
                               const std::function<void(const FoldResult&)>& on_fold = {});

}  // namespace cogload::model
