#include "rapt/geometry.hpp"

#include <gtest/gtest.h>

#include <random>

#include "rapt/rng.hpp"

using namespace rapt;

namespace {

BoundingBox random_box(std::mt19937_64& eng) {
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_real_distribution<double> size(0.5, 50.0);
  const double x = u(eng), y = u(eng);
  return {x, y, x + size(eng), y + size(eng)};
}

}  // namespace

TEST(Iou, IdenticalBoxes) {
  const BoundingBox b{0, 0, 10, 20};
  EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(Iou, DisjointBoxes) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
}

TEST(Iou, PartialOverlapHandComputed) {
  // Intersection 1x2 = 2, union 4 + 4 - 2 = 6.
  EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 0, 3, 2}), 2.0 / 6.0, 1e-12);
}

TEST(Iou, SymmetricAndBounded) {
  auto eng = make_engine(42);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox a = random_box(eng);
    const BoundingBox b = random_box(eng);
    const double ab = iou(a, b);
    EXPECT_DOUBLE_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  }
}

TEST(RasterizeVisibility, FullVisibleBoxIsAllOnes) {
  const BoundingBox box{0, 0, 10, 10};
  const auto m = rasterize_visibility(box, box, 4, 4);
  EXPECT_EQ(m.visible_count(), 16);
}

TEST(RasterizeVisibility, AbsentVisibleBoxIsAllOnes) {
  const auto m = rasterize_visibility({0, 0, 10, 10}, std::nullopt, 3, 5);
  EXPECT_EQ(m.visible_count(), 15);
  EXPECT_EQ(m.h, 3);
  EXPECT_EQ(m.w, 5);
}

TEST(RasterizeVisibility, LeftColumnVisible) {
  // 2x2 grid over (0,0,2,2); cell centers at x in {0.5, 1.5}. Visible box
  // (0,0,1,2) contains only the x=0.5 column.
  const auto m = rasterize_visibility({0, 0, 2, 2}, BoundingBox{0, 0, 1, 2}, 2, 2);
  EXPECT_EQ(m.at(0, 0), 1);
  EXPECT_EQ(m.at(1, 0), 1);
  EXPECT_EQ(m.at(0, 1), 0);
  EXPECT_EQ(m.at(1, 1), 0);
}

TEST(RasterizeVisibility, NeverAllZero) {
  auto eng = make_engine(7);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox box = random_box(eng);
    // Tiny visible slivers frequently miss every cell center.
    const double x = u(eng), y = u(eng);
    const BoundingBox sliver{x, y, x + 1e-6, y + 1e-6};
    const auto m = rasterize_visibility(box, sliver, 7, 7);
    EXPECT_GE(m.visible_count(), 1);
  }
}

TEST(SpatialPool, ConstantRoi) {
  RoIFeature roi = RoIFeature::zeros(3, 2, 2);
  std::fill(roi.data.begin(), roi.data.end(), 2.5f);
  VisibilityMask m = VisibilityMask::all_ones(2, 2);
  m.grid = {1, 0, 0, 1};
  const auto pooled = spatial_pool(roi, m);
  ASSERT_EQ(pooled.size(), 3u);
  for (double v : pooled) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(SpatialPool, AllOnesMaskIsGlobalAverage) {
  auto eng = make_engine(3);
  std::normal_distribution<double> gauss;
  RoIFeature roi = RoIFeature::zeros(4, 3, 3);
  for (auto& v : roi.data) v = static_cast<float>(gauss(eng));
  const auto pooled = spatial_pool(roi, VisibilityMask::all_ones(3, 3));
  for (int c = 0; c < 4; ++c) {
    double mean = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) mean += roi.at(c, i, j);
    mean /= 9.0;
    EXPECT_NEAR(pooled[c], mean, 1e-12);
  }
}

TEST(SpatialPool, HandComputedMaskedMean) {
  RoIFeature roi = RoIFeature::zeros(1, 2, 2);
  roi.data = {1.0f, 2.0f, 3.0f, 4.0f};
  VisibilityMask m{2, 2, {1, 1, 0, 0}};
  const auto pooled = spatial_pool(roi, m);
  EXPECT_DOUBLE_EQ(pooled[0], 1.5);
}

TEST(SpatialPool, InvariantToMaskedOutBins) {
  auto eng = make_engine(11);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    RoIFeature roi = RoIFeature::zeros(5, 4, 4);
    for (auto& v : roi.data) v = static_cast<float>(gauss(eng));
    VisibilityMask m{4, 4, std::vector<std::uint8_t>(16, 0)};
    for (auto& g : m.grid) g = static_cast<std::uint8_t>(coin(eng));
    if (m.visible_count() == 0) m.grid[0] = 1;

    const auto before = spatial_pool(roi, m);
    RoIFeature perturbed = roi;
    for (int c = 0; c < 5; ++c)
      for (int k = 0; k < 16; ++k)
        if (!m.grid[k]) perturbed.data[c * 16 + k] += static_cast<float>(gauss(eng));
    const auto after = spatial_pool(perturbed, m);
    for (int c = 0; c < 5; ++c) EXPECT_DOUBLE_EQ(before[c], after[c]);
  }
}

TEST(BoxDeltas, RoundTrip) {
  auto eng = make_engine(19);
  // Size ratios stay inside the +-4 log-delta clamp.
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::uniform_real_distribution<double> size(2.0, 40.0);
  auto sized_box = [&] {
    const double x = u(eng), y = u(eng);
    return BoundingBox{x, y, x + size(eng), y + size(eng)};
  };
  for (int i = 0; i < 200; ++i) {
    const BoundingBox a = sized_box();
    const BoundingBox b = sized_box();
    const auto d = encode_box_deltas(a, b);
    const BoundingBox back = apply_box_deltas(a, d);
    EXPECT_NEAR(back.x1, b.x1, 1e-9);
    EXPECT_NEAR(back.y1, b.y1, 1e-9);
    EXPECT_NEAR(back.x2, b.x2, 1e-9);
    EXPECT_NEAR(back.y2, b.y2, 1e-9);
  }
}

TEST(BoxDeltas, IdentityIsZero) {
  const BoundingBox b{3, 4, 10, 20};
  const auto d = encode_box_deltas(b, b);
  for (double v : d) EXPECT_NEAR(v, 0.0, 1e-12);
}
