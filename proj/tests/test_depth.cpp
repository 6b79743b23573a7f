#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dynstereo/depth.hpp"
#include "oracles.hpp"

using namespace dynstereo;

namespace {

StereoFlowField uniform_flow(int w, int h, double fx) {
  return {ImageGrid(w, h, fx), ImageGrid(w, h, 0.0), ImageGrid(w, h, 0.0), 0};
}

DepthMap plane_depth(int w, int h, double z) {
  DepthMap d;
  d.depth = ImageGrid(w, h, z);
  d.valid = Mask(w, h, 1);
  d.baseline_m = 0.063;
  d.focal_px = 1000.0;
  return d;
}

}  // namespace

TEST(FlowToDisparity, EachRuleInvalidatesOnlyItsPixel) {
  StereoFlowField f = uniform_flow(8, 4, 10.0);
  f.flow_y(1, 0) = 1.5;          // vertical flow
  f.flow_y(2, 0) = -1.0;         // at the limit: kept
  f.cycle_error(3, 1) = 1.01;    // cycle error
  f.cycle_error(4, 1) = 1.0;     // at the limit: kept
  f.flow_x(5, 2) = -3.0;         // negative flow
  f.flow_x(6, 2) = 0.0;          // zero flow
  f.flow_x(7, 3) = NAN;          // non-finite
  f.cycle_error(0, 3) = NAN;     // non-finite check input
  const DisparityMap d = flow_to_disparity(f);
  Mask expected(8, 4, 1);
  for (auto [x, y] : {std::pair{1, 0}, {3, 1}, {5, 2}, {6, 2}, {7, 3}, {0, 3}}) expected(x, y) = 0;
  EXPECT_EQ(d.valid, expected);
  EXPECT_EQ(d.valid_count(), 32u - 6u);
  EXPECT_DOUBLE_EQ(d.disparity(2, 0), 10.0);
}

TEST(FlowToDisparity, ShapeMismatchThrows) {
  StereoFlowField f = uniform_flow(4, 4, 1.0);
  f.cycle_error = ImageGrid(3, 4);
  EXPECT_THROW(flow_to_disparity(f), std::invalid_argument);
}

TEST(DisparityToDepth, HandValue) {
  DisparityMap d{ImageGrid(1, 1, 63.0), Mask(1, 1, 1), 0};
  const DepthMap z = disparity_to_depth(d, 0.063, 1000.0);
  EXPECT_DOUBLE_EQ(z.depth(0, 0), 1.0);
  EXPECT_EQ(z.baseline_m, 0.063);
  EXPECT_EQ(z.focal_px, 1000.0);
}

TEST(DisparityToDepth, RangeCutoff) {
  // b f = 63: d = 3.15 gives exactly 20 m (kept), d = 3.0 gives 21 m.
  DisparityMap d{ImageGrid(3, 1, 0.0), Mask(3, 1, 1), 0};
  d.disparity(0, 0) = 3.15;
  d.disparity(1, 0) = 3.0;
  d.disparity(2, 0) = 63.0;
  const DepthMap z = disparity_to_depth(d, 0.063, 1000.0, 20.0);
  EXPECT_EQ(z.valid(0, 0), 1);
  EXPECT_EQ(z.valid(1, 0), 0);
  EXPECT_EQ(z.valid(2, 0), 1);
}

TEST(DisparityToDepth, RoundTripRelativeError) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 200.0);
  DisparityMap d{ImageGrid(64, 64), Mask(64, 64, 1), 0};
  for (double& v : d.disparity.data()) v = u(rng);
  const DepthMap z = disparity_to_depth(d, 0.063, 512.0, 1e9);
  for (std::size_t i = 0; i < z.depth.size(); ++i) {
    const double back = 0.063 * 512.0 / z.depth.data()[i];
    EXPECT_LT(std::abs(back - d.disparity.data()[i]) / d.disparity.data()[i], 1e-9);
  }
}

TEST(DisparityToDepth, RejectsBadCalibration) {
  DisparityMap d{ImageGrid(1, 1, 1.0), Mask(1, 1, 1), 0};
  EXPECT_THROW(disparity_to_depth(d, 0.0, 1000.0), std::invalid_argument);
  EXPECT_THROW(disparity_to_depth(d, 0.063, -1.0), std::invalid_argument);
}

TEST(OcclusionRejection, StepEdgeRejectsEdgeBand) {
  DepthMap d = plane_depth(8, 3, 1.0);
  for (int y = 0; y < 3; ++y) {
    for (int x = 4; x < 8; ++x) d.depth(x, y) = 2.0;
  }
  const DepthMap out = reject_occlusion_boundaries(d, 0.3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 8; ++x) {
      // x = 3: |2 - 1| = 1 > 0.3 m. x = 4: 1 > 0.6 m. x = 5: 0 m.
      EXPECT_EQ(out.valid(x, y), (x == 3 || x == 4) ? 0 : 1) << x << "," << y;
    }
  }
}

TEST(OcclusionRejection, MatchesRuleOracleOnRandomMaps) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> z(1.0, 3.0);
  std::bernoulli_distribution hole(0.1);
  for (int trial = 0; trial < 20; ++trial) {
    DepthMap d = plane_depth(32, 24, 1.0);
    for (std::size_t i = 0; i < d.depth.size(); ++i) {
      d.depth.data()[i] = z(rng);
      d.valid.data()[i] = hole(rng) ? 0 : 1;
    }
    EXPECT_EQ(reject_occlusion_boundaries(d, 0.3).valid, oracle::gradient_rule(d, 0.3));
  }
}

TEST(OcclusionRejection, SkipsAxisWithInvalidNeighbor) {
  DepthMap d = plane_depth(3, 1, 1.0);
  d.depth(2, 0) = 10.0;
  d.valid(0, 0) = 0;
  // Pixel 1 has an invalid left neighbor, so its x test is skipped.
  EXPECT_EQ(reject_occlusion_boundaries(d, 0.3).valid(1, 0), 1);
}

TEST(DepthFromFlow, StagesCompose) {
  StereoFlowField f = uniform_flow(6, 6, 63.0);
  f.flow_x(0, 0) = 3.0;  // 21 m
  f.flow_y(5, 5) = 2.0;
  const DepthMap z = depth_from_flow(f, 0.063, 1000.0);
  EXPECT_EQ(z.valid(0, 0), 0);
  EXPECT_EQ(z.valid(5, 5), 0);
  EXPECT_EQ(z.valid(2, 2), 1);
  EXPECT_DOUBLE_EQ(z.depth(2, 2), 1.0);
}

TEST(SampleDepth, BilinearOnAPlane) {
  DepthMap d = plane_depth(8, 8, 0.0);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) d.depth(x, y) = 1.0 + 0.1 * x + 0.2 * y;
  }
  const auto v = sample_depth(d, Vec2(2.25, 3.5));
  ASSERT_TRUE(v);
  EXPECT_NEAR(*v, 1.0 + 0.225 + 0.7, 1e-12);
}

TEST(SampleDepth, InvalidContributingNeighborInvalidates) {
  DepthMap d = plane_depth(4, 4, 2.0);
  d.valid(2, 1) = 0;
  EXPECT_FALSE(sample_depth(d, Vec2(1.5, 1.0)));
  // Zero-weight neighbor does not matter.
  EXPECT_TRUE(sample_depth(d, Vec2(1.0, 1.0)));
  EXPECT_FALSE(sample_depth(d, Vec2(-0.1, 1.0)));
  EXPECT_FALSE(sample_depth(d, Vec2(3.5, 1.0)));
  EXPECT_FALSE(sample_depth(d, Vec2(NAN, 1.0)));
  EXPECT_TRUE(sample_depth(d, Vec2(3.0, 3.0)));
}
