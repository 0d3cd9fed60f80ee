#include "segkey/metrics.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "segkey/errors.hpp"
#include "segkey/key.hpp"

namespace segkey {
namespace {

LabelMap from(std::size_t h, std::size_t w, std::vector<std::uint8_t> v) {
  LabelMap m(h, w);
  m.data = std::move(v);
  return m;
}

LabelMap random_labels(RandomStream& rng, std::size_t side, std::size_t classes) {
  LabelMap m(side, side);
  for (auto& v : m.data) v = static_cast<std::uint8_t>(rng.uniform_below(classes));
  return m;
}

// Full C x C confusion matrix, then IoU read off rows and columns.
double oracle_mean_iou(const LabelMap& pred, const LabelMap& gt, std::size_t classes) {
  std::vector<std::vector<long>> m(classes, std::vector<long>(classes, 0));
  for (std::size_t y = 0; y < gt.height; ++y)
    for (std::size_t x = 0; x < gt.width; ++x) m[gt.at(y, x)][pred.at(y, x)]++;
  double sum = 0;
  int present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    long row = 0, col = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      row += m[c][k];
      col += m[k][c];
    }
    const long uni = row + col - m[c][c];
    if (uni == 0) continue;
    sum += static_cast<double>(m[c][c]) / static_cast<double>(uni);
    ++present;
  }
  return sum / present;
}

TEST(MeanIouTest, HandCountedTwoByTwo) {
  const auto gt = from(2, 2, {0, 0, 1, 1});
  const auto pred = from(2, 2, {0, 1, 1, 1});
  const auto conf = class_confusion(pred, gt, 2);
  EXPECT_EQ(conf.tp, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(conf.fp, (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(conf.fn, (std::vector<std::uint64_t>{1, 0}));
  EXPECT_NEAR(mean_iou(pred, gt, 2), 7.0 / 12.0, 1e-15);
}

TEST(MeanIouTest, IdenticalMapsScoreOne) {
  SplitMix64 rng(1);
  const auto gt = random_labels(rng, 8, 4);
  EXPECT_EQ(mean_iou(gt, gt, 4), 1.0);
}

TEST(MeanIouTest, DisjointMapsScoreZero) {
  const auto gt = from(1, 4, {0, 0, 1, 1});
  const auto pred = from(1, 4, {1, 1, 0, 0});
  EXPECT_EQ(mean_iou(pred, gt, 2), 0.0);
}

TEST(MeanIouTest, AbsentClassesAreExcluded) {
  const auto gt = from(1, 2, {0, 0});
  const auto pred = from(1, 2, {0, 0});
  const auto ious = iou_per_class(pred, gt, 4);
  EXPECT_EQ(ious[0], 1.0);
  for (std::size_t c = 1; c < 4; ++c) EXPECT_FALSE(ious[c].has_value());
  EXPECT_EQ(mean_iou(pred, gt, 4), 1.0);
}

TEST(MeanIouTest, MatchesConfusionMatrixOracle) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const auto gt = random_labels(rng, 8, 4);
    // Mix of random, near-copy and collapsed predictions.
    LabelMap pred = random_labels(rng, 8, 4);
    if (trial % 3 == 1) {
      pred = gt;
      for (int k = 0; k < 10; ++k) pred.data[rng.uniform_below(64)] = rng.uniform_below(4);
    } else if (trial % 3 == 2) {
      std::fill(pred.data.begin(), pred.data.end(), rng.uniform_below(4));
    }
    ASSERT_NEAR(mean_iou(pred, gt, 4), oracle_mean_iou(pred, gt, 4), 1e-12) << trial;
  }
}

TEST(MeanIouTest, SymmetricInArguments) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_labels(rng, 8, 4);
    const auto b = random_labels(rng, 8, 4);
    EXPECT_NEAR(mean_iou(a, b, 4), mean_iou(b, a, 4), 1e-15);
  }
}

// Fixing one wrong pixel never lowers that class's IoU.
TEST(MeanIouTest, CorrectingAPixelDoesNotHurtItsClass) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = random_labels(rng, 8, 4);
    auto pred = random_labels(rng, 8, 4);
    const std::size_t i = rng.uniform_below(64);
    const auto before = iou_per_class(pred, gt, 4);
    pred.data[i] = gt.data[i];
    const auto after = iou_per_class(pred, gt, 4);
    const auto c = gt.data[i];
    EXPECT_GE(*after[c], *before[c]);
  }
}

TEST(MeanIouTest, InRange) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const double m = mean_iou(random_labels(rng, 4, 3), random_labels(rng, 4, 3), 3);
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
}

TEST(MeanIouTest, IgnoredPixelsSkipped) {
  const auto gt = from(1, 3, {0, 255, 1});
  const auto pred = from(1, 3, {0, 1, 1});
  EXPECT_EQ(mean_iou(pred, gt, 2, 255), 1.0);
  const auto all_ignored = from(1, 2, {255, 255});
  EXPECT_THROW(mean_iou(from(1, 2, {0, 0}), all_ignored, 2, 255), InvalidArgument);
}

TEST(MeanIouTest, BadInputRejected) {
  EXPECT_THROW(mean_iou(from(1, 2, {0, 0}), from(2, 1, {0, 0}), 2), InvalidArgument);
  EXPECT_THROW(mean_iou(from(1, 2, {0, 2}), from(1, 2, {0, 0}), 2), InvalidArgument);
  EXPECT_THROW(mean_iou(from(1, 2, {0, 0}), from(1, 2, {0, 5}), 2), InvalidArgument);
}

}  // namespace
}  // namespace segkey
