#include "augment_props.hpp"
#include "cogload/error.hpp"
#include "cogload/lopo.hpp"
#include "cogload/training.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <set>

using namespace cogload;
using namespace cogload::model;

namespace {

// Three classes separated along every feature.
Dataset separable(std::mt19937_64& rng, int per_class, int participants = 4) {
  Dataset out;
  for (int c = 0; c < kNumClasses; ++c)
    for (int k = 0; k < per_class; ++k)
      out.push_back(testutil::random_sequence(rng, *label_from_int(c), "P" + std::to_string(k % participants),
                                              1.5 * (c - 1), 1.0));
  return out;
}

TrainingConfig small_config(int hidden, int epochs) {
  TrainingConfig cfg;
  cfg.model.hidden = hidden;
  cfg.model.head_hidden = hidden;
  cfg.max_epochs = epochs;
  cfg.patience = epochs;
  cfg.learning_rate = 3e-3;
  cfg.augmentation.jitter_per_class = 10;
  cfg.augmentation.mix_per_class = 10;
  cfg.augmentation.interpolation_count = 10;
  cfg.augmentation.structured_count = 10;
  return cfg;
}

}  // namespace

TEST(Augmentation, PropertiesHoldOverThousandCases) {
  props::AugmentStats stats;
  std::size_t failures = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::string why = props::check_case(seed, stats);
    if (!why.empty() && ++failures <= 5) ADD_FAILURE() << "seed " << seed << ": " << why;
  }
  EXPECT_EQ(failures, 0u);
  EXPECT_EQ(stats.cases, 1000u);
  // E|N(0, s^2)| = s * sqrt(2 / pi).
  const double n = static_cast<double>(stats.perturbations);
  EXPECT_NEAR(stats.abs_perturbation_sum / n, 0.05 * std::sqrt(2.0 / std::numbers::pi), 5e-4);
  EXPECT_NEAR(stats.perturbation_sum / n, 0.0, 5e-4);
}

TEST(Augmentation, CapLimitsEveryClass) {
  std::mt19937_64 rng(1);
  const Dataset data = separable(rng, 6);
  AugmentConfig cfg;
  cfg.cap_per_class = 5;
  const auto out = augment(data, cfg, 3);
  for (std::size_t c : out.synthetic_per_class) EXPECT_EQ(c, 5u);
}

TEST(Augmentation, MissingDonorsAreLoggedNotFatal) {
  std::mt19937_64 rng(2);
  Dataset data;
  for (int k = 0; k < 5; ++k) {
    data.push_back(testutil::random_sequence(rng, LoadLabel::TooEasy));
    data.push_back(testutil::random_sequence(rng, LoadLabel::JustRight));
  }
  const auto out = augment(data, AugmentConfig{}, 4);
  EXPECT_EQ(out.synthetic_per_class[2], 0u);
  bool interpolation = false, structured = false;
  for (const auto& line : out.log) {
    EXPECT_EQ(line.rfind("InsufficientDonors", 0), 0u) << line;
    interpolation |= line.find("interpolation") != std::string::npos;
    structured |= line.find("structured") != std::string::npos;
  }
  EXPECT_TRUE(interpolation);
  EXPECT_TRUE(structured);
  Dataset unlabelled = data;
  unlabelled[0].label.reset();
  EXPECT_EQ(testutil::code_of([&] { augment(unlabelled, AugmentConfig{}, 4); }), ErrorCode::ShapeMismatch);
}

TEST(Split, StratifiedWithinOne) {
  std::mt19937_64 rng(3);
  Dataset data;
  const std::array<int, 3> sizes{37, 52, 11};
  for (int c = 0; c < kNumClasses; ++c)
    for (int k = 0; k < sizes[static_cast<std::size_t>(c)]; ++k)
      data.push_back(testutil::random_sequence(rng, *label_from_int(c)));
  const auto split = stratified_split(data, 0.10, 9);
  std::set<std::size_t> all(split.train.begin(), split.train.end());
  for (std::size_t i : split.validation) EXPECT_TRUE(all.insert(i).second) << "index in both parts";
  EXPECT_EQ(all.size(), data.size());
  std::array<int, 3> val{};
  for (std::size_t i : split.validation) ++val[static_cast<std::size_t>(to_int(*data[i].label))];
  for (int c = 0; c < kNumClasses; ++c)
    EXPECT_LE(std::abs(val[static_cast<std::size_t>(c)] - 0.1 * sizes[static_cast<std::size_t>(c)]), 1.0);
  EXPECT_EQ(stratified_split(data, 0.10, 9).validation, split.validation);
}

TEST(Fit, SeparableDataIsLearned) {
  std::mt19937_64 rng(4);
  const Dataset train_set = separable(rng, 67);
  const Dataset test_set = separable(rng, 50);
  const auto result = train(train_set, small_config(16, 30));
  const auto probs = predict_proba(result.params, test_set);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) correct += argmax_label(probs[i]) == *test_set[i].label;
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(test_set.size()), 0.98);
  EXPECT_GE(result.best_epoch, 1);
  EXPECT_LE(static_cast<std::size_t>(result.best_epoch), result.log.size());
}

TEST(Fit, EarlyStoppingHonoursPatience) {
  std::mt19937_64 rng(5);
  const Dataset data = separable(rng, 10);
  TrainingConfig cfg = small_config(4, 50);
  cfg.learning_rate = 0.0;  // nothing ever improves
  cfg.patience = 3;
  const auto r = fit(data, data, cfg);
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.best_epoch, 1);
  EXPECT_EQ(r.log.size(), 4u);
  EXPECT_EQ(r.params.values(), ModelParams::initialize(cfg.model, cfg.seed).values());
}

TEST(Fit, BitwiseDeterministic) {
  std::mt19937_64 rng(6);
  const Dataset data = separable(rng, 20);
  const auto a = train(data, small_config(8, 5));
  const auto b = train(data, small_config(8, 5));
  ASSERT_EQ(a.params.values().size(), b.params.values().size());
  EXPECT_EQ(std::memcmp(a.params.values().data(), b.params.values().data(),
                        sizeof(double) * static_cast<std::size_t>(a.params.values().size())),
            0);
  auto other = small_config(8, 5);
  other.seed = 43;
  EXPECT_NE(train(data, other).params.values(), a.params.values());
}

TEST(Fit, Guards) {
  EXPECT_EQ(testutil::code_of([] { fit({}, {}, TrainingConfig{}); }), ErrorCode::EmptyClass);
  std::mt19937_64 rng(7);
  Dataset two;
  two.push_back(testutil::random_sequence(rng, LoadLabel::TooEasy));
  two.push_back(testutil::random_sequence(rng, LoadLabel::JustRight));
  EXPECT_EQ(testutil::code_of([&] { fit(two, {}, small_config(4, 1)); }), ErrorCode::EmptyClass);
}

TEST(Lopo, FoldsAreDisjointAndCoverEveryone) {
  std::mt19937_64 rng(8);
  Dataset data;
  for (int p = 0; p < 74; ++p)
    for (int c = 0; c < kNumClasses; ++c)
      data.push_back(testutil::random_sequence(rng, *label_from_int(c), "S" + std::to_string(p), c, 1.0));
  LopoConfig cfg;
  cfg.training = small_config(2, 1);
  cfg.training.augment = false;
  std::size_t callbacks = 0;
  const auto result = lopo_cross_validate(data, cfg, [&](const FoldResult&) { ++callbacks; });
  ASSERT_EQ(result.folds.size(), 74u);
  EXPECT_EQ(callbacks, 74u);
  std::set<std::string> tested;
  for (const auto& fold : result.folds) {
    EXPECT_FALSE(fold.train_participants.contains(fold.participant));
    EXPECT_EQ(fold.train_participants.size(), 73u);
    EXPECT_EQ(fold.labels.size(), 3u);
    EXPECT_EQ(fold.train_size, data.size() - 3);
    tested.insert(fold.participant);
  }
  EXPECT_EQ(tested.size(), 74u);
  for (const auto& name : kTableMetrics) EXPECT_EQ(result.aggregate.count(name), 1u) << name;

  Dataset few(data.begin(), data.begin() + 6);
  EXPECT_EQ(testutil::code_of([&] { lopo_cross_validate(few, cfg); }), ErrorCode::TooFewParticipants);
}
