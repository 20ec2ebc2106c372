#include "cogload/error.hpp"
#include "cogload/metrics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace cogload;
using namespace cogload::eval;

namespace {

constexpr LoadLabel E = LoadLabel::TooEasy;
constexpr LoadLabel J = LoadLabel::JustRight;
constexpr LoadLabel D = LoadLabel::TooDifficult;

Probabilities vote(LoadLabel predicted, double top = 0.6) {
  Probabilities p;
  p.fill((1.0 - top) / 2.0);
  p[static_cast<std::size_t>(to_int(predicted))] = top;
  return p;
}

// Mann-Whitney statistic: share of (positive, negative) pairs ranked correctly, ties counting half.
double pairwise_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        pairs += 1.0;
        good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return good / pairs;
}

struct Fixture {
  std::vector<Probabilities> probs;
  std::vector<LoadLabel> labels;
  void add(LoadLabel truth, LoadLabel predicted, double top = 0.6) {
    labels.push_back(truth);
    probs.push_back(vote(predicted, top));
  }
};

}  // namespace

TEST(Report, PerfectPredictions) {
  Fixture f;
  for (LoadLabel l : {E, J, D, E, J, D, J}) f.add(l, l);
  const auto r = classification_report(f.probs, f.labels);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  for (const auto& auc : r.roc_auc) EXPECT_EQ(auc, std::optional<double>(1.0));
  for (const auto& ap : r.auprc) EXPECT_EQ(ap, std::optional<double>(1.0));
  EXPECT_EQ(r.severe_misclassification_rate, 0.0);
  EXPECT_TRUE(r.notes.empty());
}

TEST(Report, TwelveItemHandFixture) {
  Fixture f;
  f.add(E, E); f.add(E, E); f.add(E, J); f.add(E, E);
  f.add(J, J); f.add(J, J); f.add(J, E); f.add(J, J);
  f.add(D, D); f.add(D, D); f.add(D, J); f.add(D, D);
  const auto r = classification_report(f.probs, f.labels);
  const ConfusionMatrix want{{{3, 1, 0}, {1, 3, 0}, {0, 1, 3}}};
  EXPECT_EQ(r.confusion, want);
  EXPECT_EQ(r.n, 12u);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  // Columns: E 4 predicted, J 5, D 3.
  EXPECT_DOUBLE_EQ(r.precision[0], 0.75);
  EXPECT_DOUBLE_EQ(r.precision[1], 0.6);
  EXPECT_DOUBLE_EQ(r.precision[2], 1.0);
  for (double rec : r.recall) EXPECT_DOUBLE_EQ(rec, 0.75);
  EXPECT_NEAR(r.f1[0], 0.75, 1e-15);
  EXPECT_NEAR(r.f1[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.f1[2], 6.0 / 7.0, 1e-15);
  EXPECT_NEAR(r.macro_precision, 2.35 / 3.0, 1e-15);
  EXPECT_NEAR(r.macro_recall, 0.75, 1e-15);
  EXPECT_NEAR(r.macro_f1, (0.75 + 2.0 / 3.0 + 6.0 / 7.0) / 3.0, 1e-15);
  EXPECT_EQ(r.severe_misclassification_rate, 0.0);
  EXPECT_NEAR(r.row_percent[1][0], 25.0, 1e-12);
  // Accuracy equals the confusion trace over N.
  EXPECT_EQ(r.accuracy, static_cast<double>(want[0][0] + want[1][1] + want[2][2]) / 12.0);
}

TEST(Report, MacroF1InvariantUnderRelabelling) {
  Fixture f, swapped;
  const std::vector<std::pair<LoadLabel, LoadLabel>> items{{E, E}, {E, J}, {J, J}, {J, D}, {D, D},
                                                           {D, E}, {J, J}, {E, E}, {D, J}};
  auto swap = [](LoadLabel l) { return l == E ? D : (l == D ? E : J); };
  for (auto [t, p] : items) {
    f.add(t, p);
    swapped.add(swap(t), swap(p));
  }
  EXPECT_NEAR(classification_report(f.probs, f.labels).macro_f1,
              classification_report(swapped.probs, swapped.labels).macro_f1, 1e-15);
}

TEST(Report, SevereRateTwentyItems) {
  Fixture f;
  for (int i = 0; i < 6; ++i) f.add(E, E);
  for (int i = 0; i < 6; ++i) f.add(J, J);
  for (int i = 0; i < 5; ++i) f.add(D, D);
  f.add(E, D);
  f.add(D, E);
  f.add(J, E);  // adjacent confusion, not severe
  ASSERT_EQ(f.labels.size(), 20u);
  EXPECT_DOUBLE_EQ(classification_report(f.probs, f.labels).severe_misclassification_rate, 0.10);
}

TEST(Report, AbsentClassLeavesAucUndefined) {
  Fixture f;
  for (LoadLabel l : {E, J, E, J, E}) f.add(l, l);
  f.add(J, D);
  const auto r = classification_report(f.probs, f.labels);
  EXPECT_FALSE(r.roc_auc[2].has_value());
  EXPECT_FALSE(r.auprc[2].has_value());
  ASSERT_TRUE(r.macro_roc_auc.has_value());
  EXPECT_DOUBLE_EQ(*r.macro_roc_auc, (*r.roc_auc[0] + *r.roc_auc[1]) / 2.0);
  ASSERT_EQ(r.notes.size(), 1u);
  EXPECT_EQ(r.notes[0].rfind("ClassAbsent", 0), 0u);
  EXPECT_EQ(testutil::code_of([&] { classification_report(f.probs, std::span(f.labels).first(3)); }),
            ErrorCode::LengthMismatch);
}

TEST(Auc, OrderedAndReversed) {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.2};
  const bool pos[] = {true, true, false, false};
  const bool neg[] = {false, false, true, true};
  EXPECT_EQ(roc_auc(s, pos), std::optional<double>(1.0));
  EXPECT_EQ(roc_auc(s, neg), std::optional<double>(0.0));
  const bool none[] = {false, false, false, false};
  EXPECT_FALSE(roc_auc(s, none).has_value());
  EXPECT_EQ(testutil::code_of([&] { roc_auc(s, std::span(pos, 3)); }), ErrorCode::LengthMismatch);
}

TEST(Auc, MatchesPairCountingOracle) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> level(0, 9);  // coarse scores force ties
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30);
    std::vector<bool> pos(30);
    bool buf[30];
    for (std::size_t i = 0; i < 30; ++i) {
      pos[i] = coin(rng);
      buf[i] = pos[i];
      s[i] = level(rng) / 10.0 + (pos[i] ? 0.15 : 0.0);
    }
    pos[0] = buf[0] = true;
    pos[1] = buf[1] = false;
    std::vector<CurvePoint> curve;
    const auto auc = roc_auc(s, std::span<const bool>(buf, 30), &curve);
    ASSERT_TRUE(auc.has_value());
    EXPECT_NEAR(*auc, pairwise_auc(s, pos), 1e-12);
    EXPECT_EQ(curve.front(), (CurvePoint{0.0, 0.0}));
    EXPECT_EQ(curve.back(), (CurvePoint{1.0, 1.0}));
  }
}

TEST(Auprc, HandComputedTrapezoid) {
  // (recall, precision): (0, 1) (0.5, 1) (0.5, 0.5) (1, 2/3) (1, 0.5).
  const std::vector<double> s{0.9, 0.8, 0.7, 0.1};
  const bool pos[] = {true, false, true, false};
  EXPECT_NEAR(*average_precision_trapezoid(s, pos), 19.0 / 24.0, 1e-15);
  EXPECT_NEAR(*roc_auc(s, pos), 0.75, 1e-15);
  const bool all_pos[] = {true, true, true, true};
  EXPECT_FALSE(average_precision_trapezoid(s, all_pos).has_value());
}

TEST(Summary, FiniteEntriesOnly) {
  const std::vector<double> v{1.0, 3.0, std::numeric_limits<double>::quiet_NaN(), 5.0};
  const auto m = summarize(v);
  EXPECT_EQ(m.count, 3u);
  EXPECT_DOUBLE_EQ(m.mean, 3.0);
  EXPECT_DOUBLE_EQ(m.std, std::sqrt(8.0 / 3.0));
  EXPECT_EQ(m.min, 1.0);
  EXPECT_EQ(m.max, 5.0);
}
