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

// Absolute and relative 3D-confidence targets, the stochastic same-class
// pairing estimator, the cross-entropy confidence loss, scorer training and
// calibration diagnostics.
//
// Absolute target:  exp(-loss / beta).
// Relative target:  fraction of the other n - 1 objects whose loss is greater
//                   than or equal to this object's loss.
// Pair target:      1 if loss_i <= loss_partner else 0. Averaged over all
//                   partners it equals the relative target.

#ifndef CONF3D_CONFIDENCE_HPP_
#define CONF3D_CONFIDENCE_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conf3d/box_geometry.hpp"
#include "conf3d/scorer.hpp"
#include "conf3d/scores.hpp"

namespace conf3d {

enum class TargetMode { kAbsolute, kRelative };

std::string_view to_string(TargetMode mode);
TargetMode parse_target_mode(std::string_view text);

struct ConfidenceTargetConfig {
  TargetMode mode = TargetMode::kRelative;
  double beta = 1.0;         // temperature, absolute mode only
  double loss_weight = 1.0;

  // Throws ConfigError on beta <= 0 or a negative loss weight.
  void validate() const;
};

struct TrainRecord {
  std::vector<double> features;
  double loss = 0.0;
  int class_id = 0;

  friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

// exp(-loss / beta). Throws ConfigError when beta <= 0.
double absolute_target(double loss, double beta);

// Throws InputError when losses.size() < 2 or i is out of range.
double relative_target_exact(std::span<const double> losses, std::size_t i);

inline double pair_target(double loss_self, double loss_partner) {
  return loss_self <= loss_partner ? 1.0 : 0.0;
}

struct PairTarget {
  std::size_t index = 0;
  std::size_t partner = 0;
  double target = 0.0;
};

struct PairSample {
  std::vector<PairTarget> pairs;  // in batch order
  std::size_t singletons = 0;     // records alone in their class
};

// Pairs every record with a uniformly drawn distinct record of the same
// class. Class singletons are skipped and counted.
PairSample sample_pair_targets(std::span<const TrainRecord> batch,
                               std::mt19937_64& rng);

struct BceValue {
  double loss = 0.0;
  double grad = 0.0;  // d loss / d pred
};

// -T log C - (1 - T) log(1 - C), with C clamped to [1e-7, 1 - 1e-7].
BceValue bce_loss(double pred, double target);

// Per-box regression loss: smooth-L1 summed over the center, size and
// wrapped yaw residuals.
double box_loss(const Box3D& pred, const Box3D& gt);

struct TrainOptions {
  std::vector<std::size_t> hidden = {512, 512};
  int epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::vector<int> lr_milestones = {20, 40};
  double lr_decay = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool standardize_inputs = true;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::size_t skipped_singletons = 0;
};

// Trains a scorer with the cross-entropy confidence loss. Relative mode
// draws fresh same-class partners inside every mini-batch. Deterministic for
// a given seed. Throws NumericalError if the loss becomes non-finite.
Scorer train_scorer(std::span<const TrainRecord> records,
                    const ConfidenceTargetConfig& config,
                    const TrainOptions& opts, TrainReport* report = nullptr);

struct CalibrationBin {
  double bin_center = 0.0;
  double mean_pred = 0.0;
  double mean_realized = 0.0;
  std::size_t count = 0;
};

// Groups records by realized target into `n_bins` equal-width bins over
// [0, 1] (values outside land in the edge bins). Empty bins are omitted.
std::vector<CalibrationBin> calibration_bins(std::span<const double> preds,
                                             std::span<const double> realized,
                                             std::size_t n_bins);

std::string calibration_csv(std::span<const CalibrationBin> bins);

// TrainRecord corpus: `class_id,loss,feat_0,...,feat_{d-1}` with header.
std::vector<TrainRecord> parse_train_records_csv(std::string_view text);
std::string write_train_records_csv(std::span<const TrainRecord> records);

// Per-detection feature rows used for rescoring:
// `frame_id,det_index,class_id,feat_0,...` with header.
struct DetectionFeatures {
  std::string frame_id;
  std::size_t det_index = 0;
  int class_id = 0;
  std::vector<double> features;

  friend bool operator==(const DetectionFeatures&, const DetectionFeatures&) = default;
};

std::vector<DetectionFeatures> parse_detection_features_csv(std::string_view text);
std::string write_detection_features_csv(std::span<const DetectionFeatures> rows);

// Sets score3d on every detection from the scorer, using the detection's
// features and the class id of its class name.
void rescore_detections(std::span<Detection> dets, const Scorer& scorer);

}  // namespace conf3d

#endif  // CONF3D_CONFIDENCE_HPP_
