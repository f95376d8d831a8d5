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

// KITTI-style average precision for 3D and BEV boxes.
//
// Matching is greedy in descending score order: a detection becomes a true
// positive when the best still-unmatched qualifying ground truth reaches the
// IoU threshold. Detections that instead hit a ground truth excluded by the
// difficulty filter, or a DontCare region, are ignored. Everything else is a
// false positive. Score ties keep input order (frame order, then file order).
//
// Precision/recall operating points are taken at every distinct score
// threshold, so AP depends on the score ordering only.

#ifndef CONF3D_DETECTION_EVAL_HPP_
#define CONF3D_DETECTION_EVAL_HPP_

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conf3d/kitti_io.hpp"
#include "conf3d/scores.hpp"

namespace conf3d {

enum class Difficulty { kEasy = 0, kModerate = 1, kHard = 2 };
enum class Metric { k3D, kBEV };
enum class RecallSampling { kR40, kR11 };
enum class MatchFlag { kTP, kFP, kIgnored };

inline constexpr std::array<Difficulty, 3> kAllDifficulties = {
    Difficulty::kEasy, Difficulty::kModerate, Difficulty::kHard};

std::string_view to_string(Difficulty d);
std::string_view to_string(Metric m);
std::string_view to_string(RecallSampling s);

struct DifficultyRule {
  Difficulty name = Difficulty::kModerate;
  double min_bbox_height = 25.0;  // pixels
  int max_occlusion = 1;
  double max_truncation = 0.30;
};

using DifficultyRules = std::array<DifficultyRule, 3>;

// KITTI devkit thresholds: Easy (40px, 0, 0.15), Moderate (25px, 1, 0.30),
// Hard (25px, 2, 0.50).
DifficultyRules default_difficulty_rules();

// Throws ConfigError unless the thresholds loosen from Easy to Hard.
void validate_difficulty_rules(const DifficultyRules& rules);

bool qualifies(const Annotation& gt, const DifficultyRule& rule);

// Difficulties at which `gt` counts, in Easy -> Hard order.
std::vector<Difficulty> assign_difficulty(
    const Annotation& gt,
    const DifficultyRules& rules = default_difficulty_rules());

// Role of a ground truth within one (class, difficulty) evaluation.
enum class GtRole {
  kQualifying,  // counted in recall
  kIgnored,     // right class, fails the difficulty filter
  kDontCare,    // DontCare region, matched by 2D overlap
};

using IouFn = double (*)(const Box3D&, const Box3D&);
IouFn iou_function(Metric metric);

// Core matcher. `dets` must already be in descending score order; the
// returned flags are parallel to it. Qualifying and ignored roles use
// `iou_fn` on the 3D boxes; DontCare regions use the fraction of the
// detection's 2D box they cover.
std::vector<MatchFlag> match_frame(std::span<const Detection> dets,
                                   std::span<const Annotation> gts,
                                   std::span<const GtRole> roles, IouFn iou_fn,
                                   double iou_threshold);

struct FrameData {
  std::string frame_id;
  std::vector<Annotation> gts;
  std::vector<Detection> dets;
};

struct ApQuery {
  std::string class_name = "Car";
  Difficulty difficulty = Difficulty::kModerate;
  Metric metric = Metric::k3D;
  double iou_threshold = 0.7;
  RecallSampling sampling = RecallSampling::kR40;
  ScoreMode score_mode = ScoreMode::kScore2D;
  CombineRule combine_rule = CombineRule::kProduct;
};

// Per-frame matching result restricted to the query class.
struct FrameMatch {
  std::vector<double> scores;  // descending
  std::vector<MatchFlag> flags;
  int num_qualifying_gt = 0;
};

FrameMatch match_frame_for(const FrameData& frame, const ApQuery& query,
                           const DifficultyRules& rules);

struct OperatingPoint {
  double score_threshold = 0.0;
  int tp = 0;
  int fp = 0;
  double recall = 0.0;
  double precision = 0.0;
};

struct ApResult {
  double ap = 0.0;  // in [0, 100]
  bool no_ground_truth = false;
  int num_gt = 0;
  std::vector<double> recall_points;
  std::vector<double> precisions;  // interpolated, parallel to recall_points
  std::vector<OperatingPoint> curve;
};

// Recall sample points: {1/40, ..., 1} for R40 and {0, 0.1, ..., 1} for R11.
std::vector<double> recall_sample_points(RecallSampling sampling);

ApResult compute_ap(std::span<const FrameData> frames, const ApQuery& query,
                    const DifficultyRules& rules = default_difficulty_rules(),
                    unsigned threads = 1);

double ap_r40(std::span<const FrameData> frames, std::string_view class_name,
              Difficulty difficulty, Metric metric, double iou_threshold);
double ap_r11(std::span<const FrameData> frames, std::string_view class_name,
              Difficulty difficulty, Metric metric, double iou_threshold);

// Car 0.7, everything else 0.5.
double default_iou_threshold(std::string_view class_name);

struct EvalConfig {
  std::vector<std::string> classes = {"Car"};
  std::vector<Metric> metrics = {Metric::k3D, Metric::kBEV};
  std::vector<Difficulty> difficulties = {kAllDifficulties.begin(),
                                          kAllDifficulties.end()};
  RecallSampling sampling = RecallSampling::kR40;
  std::map<std::string, double, std::less<>> iou_thresholds;  // overrides
  DifficultyRules rules = default_difficulty_rules();
  ScoreMode score_mode = ScoreMode::kScore2D;
  CombineRule combine_rule = CombineRule::kProduct;
  unsigned threads = 1;

  double iou_threshold_for(std::string_view class_name) const;
};

struct EvalEntry {
  std::string class_name;
  Difficulty difficulty = Difficulty::kModerate;
  Metric metric = Metric::k3D;
  double iou_threshold = 0.0;
  ApResult result;
};

struct EvalResult {
  RecallSampling sampling = RecallSampling::kR40;
  std::vector<EvalEntry> entries;

  // nullptr when absent.
  const EvalEntry* find(std::string_view class_name, Difficulty difficulty,
                        Metric metric) const;
};

EvalResult evaluate(std::span<const FrameData> frames, const EvalConfig& config);

// CSV `class,difficulty,metric,ap` with a header line.
std::string eval_result_csv(const EvalResult& result);
// JSON document with AP values and sampled PR curves.
std::string eval_result_json(const EvalResult& result);

}  // namespace conf3d

#endif  // CONF3D_DETECTION_EVAL_HPP_
