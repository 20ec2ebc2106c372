#include "cogload/evaluation.hpp"

#include "cogload/error.hpp"
#include "cogload/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cogload::eval {

double accuracy_metric(std::span<const Probabilities> probabilities, std::span<const LoadLabel> labels) {
  return classification_report(probabilities, labels).accuracy;
}

double macro_f1_metric(std::span<const Probabilities> probabilities, std::span<const LoadLabel> labels) {
  return classification_report(probabilities, labels).macro_f1;
}

Predictor bundle_predictor(const model::ModelBundle& bundle) {
  return [&bundle](const Dataset& data) {
    const Dataset normalized = bundle.normalizer.apply(data);
    return model::predict_proba(bundle.params, normalized);
  };
}

ImportanceReport permutation_importance(const Predictor& predict, const Dataset& data, const Metric& metric,
                                        int repeats, std::uint64_t seed) {
  if (repeats < 1) {
    throw std::invalid_argument("permutation importance needs at least one repeat");
  }
  std::vector<LoadLabel> labels;
  for (const FeatureSequence& s : data) {
    if (!s.label) {
      throw Error(ErrorCode::LengthMismatch, "evaluation: importance needs a label for every sequence");
    }
    labels.push_back(*s.label);
  }
  ImportanceReport report;
  report.repeats = repeats;
  report.seed = seed;
  report.baseline = metric(predict(data), labels);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(data.size());
  Dataset permuted = data;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    std::vector<double> drops;
    for (int r = 0; r < repeats; ++r) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t w = 0; w < kWindowsPerLevel; ++w) {
          permuted[i].windows[w].features[f] = data[order[i]].windows[w].features[f];
        }
      }
      drops.push_back(report.baseline - metric(predict(permuted), labels));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t w = 0; w < kWindowsPerLevel; ++w) {
        permuted[i].windows[w].features[f] = data[i].windows[w].features[f];
      }
    }
    const MetricSummary s = summarize(drops);
    report.mean[f] = s.mean;
    report.std[f] = s.std;
  }
  return report;
}

std::string condition_key(control::ControlType control, control::TaskType task) {
  return std::string(control::to_string(control)) + "/" + std::string(control::to_string(task));
}

ConvergenceReport convergence_analysis(std::span<const control::SessionLog> logs,
                                       std::span<const std::string> required) {
  if (logs.empty()) {
    throw Error(ErrorCode::EmptyCondition, "evaluation: no session logs");
  }
  std::map<std::string, std::vector<double>> finals;
  std::map<std::string, std::vector<double>> weighted;
  for (const control::SessionLog& log : logs) {
    const std::string key = condition_key(log.config.control, log.config.task);
    finals[key].push_back(log.final_difficulty());
    double w = 0.0;
    for (const control::LevelResult& r : log.levels) {
      w += r.weighted_score;
    }
    weighted[key].push_back(log.levels.empty() ? 0.0 : w / static_cast<double>(log.levels.size()));
  }
  for (const std::string& key : required) {
    if (!finals.contains(key)) {
      throw Error(ErrorCode::EmptyCondition, "evaluation: no sessions for condition '" + key + "'");
    }
  }
  ConvergenceReport report;
  for (const auto& [key, values] : finals) {
    report.conditions[key] = {values.size(), summarize(values), summarize(weighted[key])};
  }
  auto delta = [&](const std::string& name, const std::string& a, const std::string& b) {
    const auto ia = report.conditions.find(a);
    const auto ib = report.conditions.find(b);
    if (ia != report.conditions.end() && ib != report.conditions.end()) {
      report.deltas[name] = ia->second.final_difficulty.mean - ib->second.final_difficulty.mean;
    }
  };
  for (const char* task : {"single", "dual"}) {
    delta(std::string("model-self/") + task, std::string("model/") + task, std::string("self/") + task);
  }
  for (const char* control : {"model", "self"}) {
    delta(std::string("dual-single/") + control, std::string(control) + "/dual", std::string(control) + "/single");
  }
  return report;
}

}  // namespace cogload::eval
