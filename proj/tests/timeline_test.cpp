// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "aen/rng.hpp"
#include "aen/timeline.hpp"

namespace aen {
namespace {

TEST(BuildGrid, CountsAndCenters) {
  const auto grid = build_grid(VideoMeta::make("v", 160, 16.0, 16));
  ASSERT_EQ(grid.size(), 10u);
  EXPECT_DOUBLE_EQ(grid.center(0), 0.5);
  EXPECT_DOUBLE_EQ(grid.center(9), 9.5);
}

TEST(BuildGrid, SingleSnippet) {
  EXPECT_EQ(build_grid(VideoMeta::make("v", 16, 16.0, 16)).size(), 1u);
}

TEST(BuildGrid, DropsTrailingFrames) {
  const auto grid = build_grid(VideoMeta::make("v", 170, 16.0, 16));
  EXPECT_EQ(grid.size(), 10u);
  EXPECT_DOUBLE_EQ(grid.edge(grid.size()), 10.0);
}

TEST(BuildGrid, RejectsEmptyGrid) {
  EXPECT_THROW(build_grid(VideoMeta::make("v", 8, 16.0, 16)), Error);
  try {
    build_grid(VideoMeta::make("v", 8, 16.0, 16));
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
}

TEST(VideoMeta, ValidateChecksDuration) {
  auto m = VideoMeta::make("v", 100, 25.0, 8);
  EXPECT_NO_THROW(validate(m));
  m.duration_seconds += 1e-3;
  EXPECT_THROW(validate(m), Error);
  EXPECT_THROW(validate(VideoMeta::make("v", 4, 25.0, 8)), Error);
}

TEST(BuildGrid, RandomizedFloorProperty) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto delta = rng.uniform_int(1, 32);
    const auto frames = rng.uniform_int(delta, 5000);
    const double fps = rng.uniform(5.0, 60.0);
    const auto grid = build_grid(VideoMeta::make("v", frames, fps, delta));
    const auto t = static_cast<std::int64_t>(grid.size());
    EXPECT_LE(t * delta, frames);
    EXPECT_LT(frames, (t + 1) * delta);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_NEAR(grid.center(i), static_cast<double>(delta) * (static_cast<double>(i) + 0.5) / fps, 1e-9);
      if (i > 0) {
        EXPECT_LT(grid.center(i - 1), grid.center(i));
      }
    }
  }
}

TEST(TemporalIou, HandValues) {
  EXPECT_DOUBLE_EQ(temporal_iou({0, 2}, {1, 3}), 1.0 / 3.0);
  EXPECT_EQ(temporal_iou({0, 2}, {0, 2}), 1.0);
  EXPECT_EQ(temporal_iou({0, 1}, {2, 3}), 0.0);
}

TEST(TemporalIou, RejectsZeroLength) {
  EXPECT_THROW(temporal_iou({1, 1}, {0, 2}), Error);
  EXPECT_THROW(temporal_iou({0, 2}, {3, 2}), Error);
}

TEST(TemporalIou, SymmetricAndReflexive) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const double s1 = rng.uniform(0, 100), s2 = rng.uniform(0, 100);
    const Interval a{s1, s1 + rng.uniform(1e-3, 50)};
    const Interval b{s2, s2 + rng.uniform(1e-3, 50)};
    const double ab = temporal_iou(a, b);
    EXPECT_EQ(ab, temporal_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(temporal_iou(a, a), 1.0);
  }
}

}  // namespace
}  // namespace aen
