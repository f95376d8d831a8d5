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

// Oracle substitution: replace one predicted box component with the value of
// the matched ground truth and re-evaluate, to measure how much each
// sub-task limits AP.

#ifndef CONF3D_ORACLE_ANALYSIS_HPP_
#define CONF3D_ORACLE_ANALYSIS_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conf3d/detection_eval.hpp"

namespace conf3d {

enum class OracleComponent {
  kNone,      // baseline
  kRotation,  // R: rotation_y
  kShape,     // HWL
  kXY,        // X and Y of the center
  kDepth,     // Z
};

std::string_view to_string(OracleComponent c);
// Accepts "none", "R", "HWL", "XY", "Z". Throws InputError otherwise.
OracleComponent parse_oracle_component(std::string_view text);

enum class MatchPolicy {
  kCenterDistance,  // nearest BEV center within a gate
  kIou2D,           // best 2D box IoU above a floor
};

std::string_view to_string(MatchPolicy p);
MatchPolicy parse_match_policy(std::string_view text);

struct MatchPolicyConfig {
  MatchPolicy policy = MatchPolicy::kCenterDistance;
  double center_gate_m = 4.0;
  double iou2d_min = 0.5;
};

// Greedy one-to-one matching of detections to same-class, non-DontCare
// ground truths, visiting detections by descending score2d (ties in input
// order). Result is parallel to `dets`.
std::vector<std::optional<std::size_t>> match_for_substitution(
    std::span<const Detection> dets, std::span<const Annotation> gts,
    const MatchPolicyConfig& policy);

// Copies `component` from the matched ground truth into each matched
// detection. Unmatched detections, classes and scores are left alone.
void apply_substitution(std::span<Detection> dets,
                        std::span<const Annotation> gts,
                        std::span<const std::optional<std::size_t>> matching,
                        OracleComponent component);

std::vector<FrameData> oracle_substitute(std::span<const FrameData> frames,
                                         OracleComponent component,
                                         const MatchPolicyConfig& policy = {});

struct OracleConfig {
  std::string class_name = "Car";
  Metric metric = Metric::k3D;
  std::optional<double> iou_threshold;  // class default when empty
  RecallSampling sampling = RecallSampling::kR40;
  DifficultyRules rules = default_difficulty_rules();
  MatchPolicyConfig policy;
  unsigned threads = 1;
};

struct OracleRow {
  OracleComponent component = OracleComponent::kNone;
  std::array<double, 3> ap{};  // easy, moderate, hard
};

struct OracleTable {
  MatchPolicy policy = MatchPolicy::kCenterDistance;
  std::vector<OracleRow> rows;

  // nullptr when the component was not swept.
  const OracleRow* find(OracleComponent c) const;
};

// Baseline row first, then one row per requested component.
OracleTable oracle_sweep(std::span<const FrameData> frames,
                         std::span<const OracleComponent> components,
                         const OracleConfig& config = {});

inline constexpr std::array<OracleComponent, 4> kAllOracleComponents = {
    OracleComponent::kRotation, OracleComponent::kShape, OracleComponent::kXY,
    OracleComponent::kDepth};

// `component,easy,moderate,hard`.
std::string oracle_table_csv(const OracleTable& table);
std::string oracle_tables_json(std::span<const OracleTable> tables);

}  // namespace conf3d

#endif  // CONF3D_ORACLE_ANALYSIS_HPP_
