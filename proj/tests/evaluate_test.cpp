#include "segkey/evaluate.hpp"

#include <numeric>

#include <gtest/gtest.h>

#include "segkey/dataset.hpp"
#include "segkey/errors.hpp"

namespace segkey {
namespace {

std::vector<SegSample> samples(std::size_t n) {
  std::vector<SegSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_sample(9, Split::kTest, i, 16));
  return out;
}

Checkpoint untrained(const std::string& protection) {
  Checkpoint ck;
  ck.config.widths = {4, 6, 8, 8};
  ck.config.input_size = 16;
  ck.protection = parse_protection(protection);
  ck.model_id = default_model_id(ck.protection);
  ck.params = ModelParams::initialize(ck.config, 21);
  return ck;
}

SecretKey test_key() {
  SplitMix64 s(22);
  return random_key(s);
}

HookPlan identity_plan(const Checkpoint& ck) {
  ZeroStream zeros;
  return make_hook_plan(ck.config, ck.protection.hooks, zeros);
}

TEST(ConditionTest, NamesRoundTrip) {
  for (auto k : {ConditionKind::kCorrect, ConditionKind::kNoPerm, ConditionKind::kIncorrect,
                 ConditionKind::kPlain}) {
    EXPECT_EQ(parse_condition(condition_name(k)), k);
  }
  EXPECT_THROW(parse_condition("wrong"), InvalidArgument);
}

TEST(DatasetMeanIouTest, PerfectSegmenterScoresOne) {
  const auto data = samples(5);
  std::size_t next = 0;
  std::vector<LabelMap> truth;
  for (const auto& s : data) truth.push_back(s.labels);
  const Segmenter oracle = [&](const ImageU8& img) {
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data[i].image == img) return truth[i];
    ++next;
    return LabelMap(16, 16);
  };
  EXPECT_EQ(dataset_mean_iou(oracle, data, 4).mean_iou, 1.0);
  EXPECT_EQ(next, 0u);
}

TEST(DatasetMeanIouTest, AveragesImages) {
  SegSample a{ImageU8(3, 1, 2, 0), LabelMap(1, 2)};
  a.labels.data = {0, 1};
  SegSample b{ImageU8(3, 1, 2, 9), LabelMap(1, 2)};
  b.labels.data = {1, 1};
  // Right on a, wrong everywhere on b.
  const Segmenter seg = [](const ImageU8& img) {
    LabelMap m(1, 2);
    m.data = img.data[0] == 0 ? std::vector<std::uint8_t>{0, 1} : std::vector<std::uint8_t>{0, 0};
    return m;
  };
  EXPECT_NEAR(dataset_mean_iou(seg, {a, b}, 2).mean_iou, 0.5, 1e-15);
  EXPECT_NEAR(dataset_mean_iou(seg, {b, a}, 2).mean_iou, 0.5, 1e-15);
  EXPECT_THROW(dataset_mean_iou(seg, {}, 2), InvalidArgument);
}

TEST(DatasetMeanIouTest, ThreadCountDoesNotMatter) {
  const auto ck = untrained("none");
  const auto data = samples(9);
  const auto seg = make_segmenter(ck, HookPlan{});
  EXPECT_EQ(dataset_mean_iou(seg, data, 4, 1).mean_iou,
            dataset_mean_iou(seg, data, 4, 4).mean_iou);
}

TEST(EvaluateTest, IdentityStubMakesConditionsAgree) {
  const auto ck = untrained("hooks=2,6");
  const auto data = samples(4);
  EvalOptions opt;
  opt.plan_factory = [&](const SecretKey&) { return identity_plan(ck); };
  const auto reports = evaluate_conditions(
      ck, test_key(), data,
      {{ConditionKind::kCorrect}, {ConditionKind::kNoPerm}, {ConditionKind::kIncorrect, 1}},
      opt);
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0].mean_iou, reports[1].mean_iou);
  EXPECT_EQ(reports[2].mean_iou, reports[1].mean_iou);
  EXPECT_EQ(reports[2].n_keys, 1u);
  for (const auto& r : reports) {
    EXPECT_EQ(r.model, "model-2+6");
    EXPECT_EQ(r.config_digest, ck.config_digest());
  }
}

TEST(EvaluateTest, IncorrectIsMeanOfPerKeyScores) {
  const auto ck = untrained("hooks=5");
  const auto data = samples(3);
  const auto reports =
      evaluate_conditions(ck, test_key(), data, {{ConditionKind::kIncorrect, 6}});
  ASSERT_EQ(reports.size(), 1u);
  const auto& r = reports[0];
  ASSERT_EQ(r.per_key.size(), 6u);
  const double mean = std::accumulate(r.per_key.begin(), r.per_key.end(), 0.0) / 6.0;
  EXPECT_NEAR(r.mean_iou, mean, 1e-15);
  EXPECT_EQ(r.seed, 2023u);
  EXPECT_GE(r.mean_iou, 0.0);
  EXPECT_LE(r.mean_iou, 1.0);
  // Same seed, same result.
  EXPECT_EQ(evaluate_conditions(ck, test_key(), data, {{ConditionKind::kIncorrect, 6}})[0].per_key,
            r.per_key);
}

TEST(EvaluateTest, CorrectMatchesKeyedSegmenter) {
  const auto ck = untrained("hooks=1");
  const auto data = samples(3);
  const auto key = test_key();
  const double direct =
      dataset_mean_iou(make_segmenter(ck, make_hook_plan(ck.config, {{1}, key})), data, 4)
          .mean_iou;
  EXPECT_EQ(evaluate_conditions(ck, key, data, {{ConditionKind::kCorrect}})[0].mean_iou, direct);
}

TEST(EvaluateTest, ConditionsCheckedAgainstModel) {
  const auto data = samples(2);
  const auto key = test_key();
  EXPECT_THROW(evaluate_conditions(untrained("hooks=6"), std::nullopt, data,
                                   {{ConditionKind::kCorrect}}),
               KeyError);
  EXPECT_THROW(evaluate_conditions(untrained("hooks=6"), key, data, {{ConditionKind::kPlain}}),
               InvalidArgument);
  EXPECT_THROW(evaluate_conditions(untrained("shf=4"), key, data, {{ConditionKind::kNoPerm}}),
               InvalidArgument);
  EXPECT_THROW(evaluate_conditions(untrained("hooks=6"), key, data,
                                   {{ConditionKind::kIncorrect, 0}}),
               InvalidArgument);
  EXPECT_NO_THROW(evaluate_conditions(untrained("none"), std::nullopt, data,
                                      {{ConditionKind::kCorrect}, {ConditionKind::kNoPerm}}));
}

TEST(EvaluateTest, BlockModelConditions) {
  const auto ck = untrained("np=4");
  const auto data = samples(3);
  const auto reports = evaluate_conditions(
      ck, test_key(), data,
      {{ConditionKind::kCorrect}, {ConditionKind::kPlain}, {ConditionKind::kIncorrect, 2}});
  ASSERT_EQ(reports.size(), 3u);
  const double plain = dataset_mean_iou(make_segmenter(ck, HookPlan{}), data, 4).mean_iou;
  EXPECT_EQ(reports[1].mean_iou, plain);
  EXPECT_EQ(reports[1].condition, ConditionKind::kPlain);
}

TEST(AttackTest, SingleTrialMatchesIncorrectWithSameSeed) {
  const auto ck = untrained("hooks=3");
  const auto data = samples(3);
  const auto key = test_key();
  const auto attack = key_estimation_attack(ck, {3}, data, 1, 2023);
  const auto incorrect =
      evaluate_conditions(ck, key, data, {{ConditionKind::kIncorrect, 1}})[0];
  ASSERT_EQ(attack.scores.size(), 1u);
  EXPECT_EQ(attack.best_score, incorrect.mean_iou);
  EXPECT_EQ(attack.best_key, attack.keys[0]);
}

TEST(AttackTest, BestIsMaximumOfTrials) {
  const auto ck = untrained("hooks=4");
  const auto data = samples(2);
  const auto a = key_estimation_attack(ck, {4}, data, 5, 99);
  ASSERT_EQ(a.scores.size(), 5u);
  const double mean = std::accumulate(a.scores.begin(), a.scores.end(), 0.0) / 5.0;
  EXPECT_GE(a.best_score, mean);
  EXPECT_EQ(a.best_score, *std::max_element(a.scores.begin(), a.scores.end()));
  const auto again = key_estimation_attack(ck, {4}, data, 5, 99);
  EXPECT_EQ(a.scores, again.scores);
  EXPECT_EQ(a.best_key, again.best_key);
}

}  // namespace
}  // namespace segkey
