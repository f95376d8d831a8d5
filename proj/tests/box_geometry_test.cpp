/* Copyright 2026 The conf3d Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "conf3d/box_geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"

namespace conf3d {
namespace {

constexpr double kPi = std::numbers::pi;

Box3D make_box(double x, double y, double z, double h, double w, double l, double yaw) {
  return Box3D{{x, y, z}, {h, w, l}, yaw};
}

TEST(WrapAngle, IntoRange) {
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(-3 * kPi / 2), kPi / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(0.3), 0.3, 1e-15);
}

TEST(BevCorners, HeadingAlongLength) {
  // yaw 0: length along +x.
  const auto p = bev_corners(make_box(1, 0, 2, 1, 2, 4, 0));
  double max_x = -1e9, max_z = -1e9;
  for (const auto& v : p.vertices()) {
    max_x = std::max(max_x, v.x);
    max_z = std::max(max_z, v.z);
  }
  EXPECT_NEAR(max_x, 3.0, 1e-12);
  EXPECT_NEAR(max_z, 3.0, 1e-12);
  EXPECT_NEAR(p.area(), 8.0, 1e-12);
  EXPECT_GT(oracle::shoelace(p.vertices()), 0.0);
}

TEST(IouBev, IdentityIsExactlyOne) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto b = make_box(20 * u(rng), u(rng), 30 + 20 * u(rng), 1.5 + u(rng) * 0.5,
                            1.6 + u(rng) * 0.3, 4 + u(rng), kPi * u(rng));
    EXPECT_EQ(iou_bev(b, b), 1.0);
    EXPECT_EQ(iou_3d(b, b), 1.0);
  }
}

TEST(IouBev, DisjointIsZero) {
  const auto a = make_box(0, 0, 10, 1, 2, 4, 0.4);
  const auto b = make_box(10, 0, 10, 1, 2, 4, -0.2);
  EXPECT_EQ(iou_bev(a, b), 0.0);
  EXPECT_EQ(iou_3d(a, b), 0.0);
}

TEST(IouBev, AxisAlignedClosedForm) {
  // Shifted by 1 along length 4: intersection 2*3, union 2*4*2-6.
  const auto a = make_box(0, 0, 10, 1, 2, 4, 0);
  const auto b = make_box(1, 0, 10, 1, 2, 4, 0);
  EXPECT_NEAR(iou_bev(a, b), 6.0 / 10.0, 1e-12);
}

TEST(Iou3d, VerticalOffsetOnly) {
  const auto a = make_box(0, 1.0, 10, 2, 2, 4, 0.3);
  const auto b = make_box(0, 1.5, 10, 2, 2, 4, 0.3);
  EXPECT_NEAR(vertical_overlap(a, b), 1.5, 1e-12);
  EXPECT_NEAR(iou_3d(a, b), 1.5 / 2.5, 1e-12);
  EXPECT_NEAR(iou_bev(a, b), 1.0, 1e-12);
}

TEST(IouBev, RotatedSquareIsSymmetric) {
  // Square rotated 45 degrees against itself: octagon intersection.
  const auto a = make_box(0, 0, 0, 1, 2, 2, 0);
  const auto b = make_box(0, 0, 0, 1, 2, 2, kPi / 4);
  const double inter = 8.0 * (std::sqrt(2.0) - 1.0);
  EXPECT_NEAR(iou_bev(a, b), inter / (8.0 - inter), 1e-12);
  EXPECT_NEAR(iou_bev(a, b), iou_bev(b, a), 1e-15);
}

TEST(IouBev, AgreesWithMonteCarlo) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const auto a = make_box(0, 1.0, 20, 1.5, 1.7, 4.0, kPi * u(rng));
    const auto b = make_box(0.8 * u(rng), 1.0 + 0.3 * u(rng), 20 + u(rng), 1.5, 1.6, 3.8,
                            kPi * u(rng));
    EXPECT_NEAR(iou_bev(a, b), oracle::mc_iou_bev(a, b, 300, i), 5e-3);
    EXPECT_NEAR(iou_3d(a, b), oracle::mc_iou_3d(a, b, 60, i), 1e-2);
  }
}

TEST(IouBev, ContainedBox) {
  const auto a = make_box(0, 0, 0, 1, 4, 4, 0.2);
  const auto b = make_box(0, 0, 0, 1, 1, 1, 0.7);
  EXPECT_NEAR(iou_bev(a, b), 1.0 / 16.0, 1e-12);
}

TEST(Iou2d, Basics) {
  const BBox2D a{0, 0, 10, 10};
  const BBox2D b{5, 0, 15, 10};
  EXPECT_NEAR(iou_2d(a, b), 50.0 / 150.0, 1e-12);
  EXPECT_NEAR(overlap_2d(a, b), 0.5, 1e-12);
  EXPECT_EQ(iou_2d(a, BBox2D{20, 20, 30, 30}), 0.0);
}

TEST(Haversine, KnownDistances) {
  EXPECT_EQ(haversine_m({49.0, 8.4}, {49.0, 8.4}), 0.0);
  // One degree of latitude along a meridian.
  EXPECT_NEAR(haversine_m({0.0, 0.0}, {1.0, 0.0}), kEarthRadiusM * kPi / 180.0, 1e-6);
  EXPECT_NEAR(haversine_m({49.0, 8.4}, {49.01, 8.41}), haversine_m({49.01, 8.41}, {49.0, 8.4}),
              1e-9);
}

}  // namespace
}  // namespace conf3d
