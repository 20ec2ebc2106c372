#include "cogload/lopo.hpp"

#include "cogload/error.hpp"

#include <cmath>
#include <limits>

namespace cogload::model {

double table_metric(const eval::ClassificationReport& r, const std::string& name) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (name == "Accuracy") return r.accuracy;
  if (name == "F1") return r.macro_f1;
  if (name == "Precision") return r.macro_precision;
  if (name == "Recall") return r.macro_recall;
  if (name == "AUC-ROC") return r.macro_roc_auc.value_or(nan);
  if (name == "AUPRC") return r.macro_auprc.value_or(nan);
  throw std::invalid_argument("unknown metric " + name);
}

std::map<std::string, eval::MetricSummary> aggregate_folds(const std::vector<eval::ClassificationReport>& reports) {
  std::map<std::string, eval::MetricSummary> out;
  for (const std::string& name : kTableMetrics) {
    std::vector<double> values;
    for (const auto& r : reports) {
      values.push_back(table_metric(r, name));
    }
    out[name] = eval::summarize(values);
  }
  return out;
}

LopoResult lopo_cross_validate(const Dataset& data, const LopoConfig& config,
                               const std::function<void(const FoldResult&)>& on_fold) {
  std::vector<std::string> participants;
  for (const FeatureSequence& s : data) {
    if (std::find(participants.begin(), participants.end(), s.participant_id) == participants.end()) {
      participants.push_back(s.participant_id);
    }
  }
  if (participants.size() < 3) {
    throw Error(ErrorCode::TooFewParticipants,
                "load-classifier: LOPO needs at least 3 participants, got " + std::to_string(participants.size()));
  }
  LopoResult result;
  std::vector<eval::ClassificationReport> reports;
  for (std::size_t fold = 0; fold < participants.size(); ++fold) {
    const std::string& held_out = participants[fold];
    Dataset train_raw;
    Dataset test_raw;
    for (const FeatureSequence& s : data) {
      (s.participant_id == held_out ? test_raw : train_raw).push_back(s);
    }
    const std::vector<std::string> excluded{held_out};
    windowing::Normalizer norm = windowing::fit_normalizer(train_raw, config.scope, excluded);
    if (config.scope == windowing::NormalizationScope::PerParticipant) {
      norm.per_participant[held_out] = windowing::calibrate_participant(test_raw);
    }
    const Dataset train_set = norm.apply(train_raw);
    const Dataset test_set = norm.apply(test_raw);

    TrainingConfig tc = config.training;
    tc.seed = config.training.seed + fold;
    const TrainingResult trained = train(train_set, tc);

    FoldResult fr;
    fr.participant = held_out;
    for (const FeatureSequence& s : train_raw) {
      fr.train_participants.insert(s.participant_id);
    }
    if (fr.train_participants.contains(held_out)) {
      throw std::logic_error("LOPO fold leaked its test participant into training");
    }
    fr.train_size = train_raw.size();
    fr.best_epoch = trained.best_epoch;
    fr.probabilities = predict_proba(trained.params, test_set);
    for (const FeatureSequence& s : test_set) {
      fr.labels.push_back(s.label.value_or(LoadLabel::JustRight));
    }
    fr.report = eval::classification_report(fr.probabilities, fr.labels);
    reports.push_back(fr.report);
    if (on_fold) {
      on_fold(fr);
    }
    result.folds.push_back(std::move(fr));
  }
  result.aggregate = aggregate_folds(reports);
  return result;
}

}  // namespace cogload::model
