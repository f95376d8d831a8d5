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

#include "conf3d/scorer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "conf3d/errors.hpp"

namespace conf3d {
namespace {

TEST(Scorer, ShapesAndHeads) {
  const Scorer s(4, {8, 6}, {0, 1}, 3);
  EXPECT_EQ(s.widths(), (std::vector<std::size_t>{4, 8, 6, 1}));
  EXPECT_EQ(s.parameter_count(), 4u * 8 + 8 + 8 * 6 + 6 + 6 * 2 + 2);
  EXPECT_EQ(s.head_index(1), 1u);
  EXPECT_THROW(s.head_index(5), InputError);
}

TEST(Scorer, SameSeedSameParameters) {
  const Scorer a(4, {16}, {0}, 42);
  const Scorer b(4, {16}, {0}, 42);
  const Scorer c(4, {16}, {0}, 43);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
}

TEST(Scorer, PredictionInUnitInterval) {
  Scorer s(3, {5}, {0}, 1);
  for (double& p : s.mutable_parameters()) p *= 100.0;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> x{n(rng), n(rng), n(rng)};
    const double p = s.predict(x, 0);
    EXPECT_GE(p, kPredictionEps);
    EXPECT_LE(p, 1.0 - kPredictionEps);
  }
}

TEST(Scorer, JsonRoundTrip) {
  Scorer s(3, {4, 4}, {0, 2}, 9);
  s.set_input_normalization({1.0, 2.0, 3.0}, {0.5, 1.5, 2.5});
  const Scorer back = Scorer::from_json(s.to_json());
  EXPECT_EQ(back, s);
  const std::vector<double> x{0.3, -0.2, 1.1};
  EXPECT_EQ(back.predict(x, 2), s.predict(x, 2));
  EXPECT_EQ(back.to_json(), s.to_json());
}

TEST(Scorer, FromJsonRejectsBadDocuments) {
  EXPECT_THROW(Scorer::from_json("not json"), InputError);
  EXPECT_THROW(Scorer::from_json("{\"format\":\"conf3d-scorer\",\"version\":99}"), InputError);
  Scorer s(2, {3}, {0}, 1);
  std::string text = s.to_json();
  const auto pos = text.find("\"weights\"");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 9, "\"weightz\"");
  EXPECT_THROW(Scorer::from_json(text), InputError);
}

TEST(Scorer, ConstantScorer) {
  const Scorer one = Scorer::constant(4, {0, 1}, 1.0);
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(one.predict(x, 1), 1.0 - kPredictionEps);
  const Scorer half = Scorer::constant(4, {0}, 0.5);
  EXPECT_NEAR(half.predict(x, 0), 0.5, 1e-15);
}

double finite_difference_error(Scorer s, const Eigen::MatrixXd& x,
                               const std::vector<std::size_t>& heads,
                               const std::vector<double>& t) {
  std::vector<double> grad;
  s.batch_loss(x, heads, t, &grad);
  const double h = 1e-6;
  double num = 0.0, den = 0.0;
  auto params = s.mutable_parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + h;
    const double up = s.batch_loss(x, heads, t, nullptr);
    params[k] = saved - h;
    const double down = s.batch_loss(x, heads, t, nullptr);
    params[k] = saved;
    const double fd = (up - down) / (2 * h);
    num += (fd - grad[k]) * (fd - grad[k]);
    den += fd * fd + grad[k] * grad[k];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

TEST(Scorer, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Scorer s(3, {5, 4}, {0, 1}, 100 + trial);
    // Random biases keep pre-activations off the rectifier kink.
    for (double& p : s.mutable_parameters()) p = n(rng);
    Eigen::MatrixXd x(3, 6);
    std::vector<std::size_t> heads;
    std::vector<double> t;
    for (int c = 0; c < 6; ++c) {
      for (int r = 0; r < 3; ++r) x(r, c) = n(rng);
      heads.push_back(c % 2);
      t.push_back(u(rng));
    }
    EXPECT_LT(finite_difference_error(s, x, heads, t), 1e-5);
  }
}

}  // namespace
}  // namespace conf3d
