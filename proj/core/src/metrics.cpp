#include "cogload/metrics.hpp"

#include "cogload/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace cogload::eval {
namespace {

struct Sweep {
  std::vector<double> tp;  // cumulative after each distinct threshold
  std::vector<double> fp;
  double positives = 0.0;
  double negatives = 0.0;
};

Sweep sweep(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) {
    throw Error(ErrorCode::LengthMismatch, "evaluation: scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Sweep s;
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (positive[order[k]]) {
      tp += 1.0;
    } else {
      fp += 1.0;
    }
    const bool group_end = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (group_end) {
      s.tp.push_back(tp);
      s.fp.push_back(fp);
    }
  }
  s.positives = tp;
  s.negatives = fp;
  return s;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

std::optional<double> roc_auc(std::span<const double> scores, std::span<const bool> positive,
                              std::vector<CurvePoint>* curve) {
  const Sweep s = sweep(scores, positive);
  if (s.positives == 0.0 || s.negatives == 0.0) {
    return std::nullopt;
  }
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  for (std::size_t k = 0; k < s.tp.size(); ++k) {
    pts.push_back({s.fp[k] / s.negatives, s.tp[k] / s.positives});
  }
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    area += (pts[k].x - pts[k - 1].x) * 0.5 * (pts[k].y + pts[k - 1].y);
  }
  if (curve) {
    *curve = std::move(pts);
  }
  return area;
}

std::optional<double> average_precision_trapezoid(std::span<const double> scores, std::span<const bool> positive) {
  const Sweep s = sweep(scores, positive);
  if (s.positives == 0.0 || s.negatives == 0.0) {
    return std::nullopt;
  }
  std::vector<CurvePoint> pts;  // (recall, precision)
  for (std::size_t k = 0; k < s.tp.size(); ++k) {
    pts.push_back({s.tp[k] / s.positives, s.tp[k] / (s.tp[k] + s.fp[k])});
  }
  pts.insert(pts.begin(), CurvePoint{0.0, pts.front().y});
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    area += (pts[k].x - pts[k - 1].x) * 0.5 * (pts[k].y + pts[k - 1].y);
  }
  return area;
}

ClassificationReport classification_report(std::span<const Probabilities> probabilities,
                                            std::span<const LoadLabel> labels) {
  if (probabilities.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "evaluation: " + std::to_string(probabilities.size()) +
                                               " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) {
    throw Error(ErrorCode::LengthMismatch, "evaluation: no predictions to score");
  }
  ClassificationReport r;
  r.n = labels.size();
  for (std::size_t i = 0; i < r.n; ++i) {
    const auto& p = probabilities[i];
    const auto pred = static_cast<std::size_t>(std::distance(p.begin(), std::max_element(p.begin(), p.end())));
    ++r.confusion[static_cast<std::size_t>(to_int(labels[i]))][pred];
  }
  const double n = static_cast<double>(r.n);
  std::size_t diag = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    double row = 0.0;
    double col = 0.0;
    for (int k = 0; k < kNumClasses; ++k) {
      row += static_cast<double>(r.confusion[c][k]);
      col += static_cast<double>(r.confusion[k][c]);
    }
    for (int k = 0; k < kNumClasses; ++k) {
      r.row_percent[c][k] = 100.0 * safe_ratio(static_cast<double>(r.confusion[c][k]), row);
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    diag += r.confusion[c][c];
    r.precision[c] = safe_ratio(tp, col);
    r.recall[c] = safe_ratio(tp, row);
    r.f1[c] = safe_ratio(2.0 * r.precision[c] * r.recall[c], r.precision[c] + r.recall[c]);
  }
  r.accuracy = static_cast<double>(diag) / n;
  r.macro_precision = (r.precision[0] + r.precision[1] + r.precision[2]) / kNumClasses;
  r.macro_recall = (r.recall[0] + r.recall[1] + r.recall[2]) / kNumClasses;
  r.macro_f1 = (r.f1[0] + r.f1[1] + r.f1[2]) / kNumClasses;
  r.severe_misclassification_rate = static_cast<double>(r.confusion[0][2] + r.confusion[2][0]) / n;

  double auc_sum = 0.0;
  double ap_sum = 0.0;
  int defined = 0;
  std::vector<double> scores(r.n);
  std::unique_ptr<bool[]> positive(new bool[r.n]);
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < r.n; ++i) {
      scores[i] = probabilities[i][c];
      positive[i] = to_int(labels[i]) == c;
    }
    const std::span<const bool> pos(positive.get(), r.n);
    r.roc_auc[c] = roc_auc(scores, pos, &r.roc_curves[c]);
    r.auprc[c] = average_precision_trapezoid(scores, pos);
    if (r.roc_auc[c]) {
      auc_sum += *r.roc_auc[c];
      ap_sum += *r.auprc[c];
      ++defined;
    } else {
      r.notes.push_back(std::string(to_string(ErrorCode::ClassAbsent)) + ": AUC undefined for " +
                        std::string(label_name(static_cast<LoadLabel>(c))) + ", excluded from macro average");
    }
  }
  if (defined > 0) {
    r.macro_roc_auc = auc_sum / defined;
    r.macro_auprc = ap_sum / defined;
  }
  return r;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  std::vector<double> v;
  for (double x : values) {
    if (std::isfinite(x)) {
      v.push_back(x);
    }
  }
  s.count = v.size();
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean = s.std = s.min = s.max = nan;
    return s;
  }
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) {
    sq += (x - s.mean) * (x - s.mean);
  }
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

}  // namespace cogload::eval
