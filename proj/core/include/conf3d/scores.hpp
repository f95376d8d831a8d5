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

#ifndef CONF3D_SCORES_HPP_
#define CONF3D_SCORES_HPP_

#include "conf3d/kitti_io.hpp"

namespace conf3d {

// How a 2D class probability and a 3D confidence are merged into one
// ranking score.
enum class CombineRule {
  kProduct,  // score2d * score3d
  kMean,     // (score2d + score3d) / 2
};

// Both inputs must lie in [0, 1]; throws InputError otherwise.
double combine_scores(double score2d, double score3d,
                      CombineRule rule = CombineRule::kProduct);

// The ranking score of a detection under `mode`. Throws InputError when the
// mode needs a missing score3d.
double detection_score(const Detection& det, ScoreMode mode,
                       CombineRule rule = CombineRule::kProduct);

}  // namespace conf3d

#endif  // CONF3D_SCORES_HPP_
