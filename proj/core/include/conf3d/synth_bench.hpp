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

// Deterministic synthetic corpora: ground-truth scenes, detections with
// per-component Gaussian error, per-detection box losses and feature
// vectors, and GPS poses laid out along straight road segments.

#ifndef CONF3D_SYNTH_BENCH_HPP_
#define CONF3D_SYNTH_BENCH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "conf3d/confidence.hpp"
#include "conf3d/detection_eval.hpp"
#include "conf3d/kitti_io.hpp"

namespace conf3d {

inline constexpr double kSynthFocalPx = 721.0;
inline constexpr double kSynthImageWidth = 1242.0;
inline constexpr double kSynthImageHeight = 375.0;

enum class ScoreModel {
  kInformative,  // score2d decreases with the detection's box loss
  kNoise,        // score2d independent of everything
};

enum class FeatureModel {
  kLossLinear,  // features . w = loss exactly
  kLossNoisy,   // features . w = rho * loss + (1 - rho) * noise
};

struct NoiseSpec {
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double sigma_z = 0.0;
  double sigma_h = 0.0;
  double sigma_w = 0.0;
  double sigma_l = 0.0;
  double sigma_yaw = 0.0;
  // sigma_z is scaled by (Z / 20 m)^exponent.
  double z_distance_exponent = 0.0;
  double fp_rate = 0.0;  // per ground truth, chance of an extra false positive
  double fn_rate = 0.0;  // per ground truth, chance of being missed
  ScoreModel score_model = ScoreModel::kInformative;
  FeatureModel feature_model = FeatureModel::kLossLinear;
  double rho = 1.0;
  std::size_t feature_dim = 4;
  double car_fraction = 1.0;  // rest split evenly between Pedestrian/Cyclist
  std::size_t sequence_length = 50;
  double frame_spacing_m = 10.0;

  // Throws ConfigError on negative sigmas or rates outside [0, 1].
  void validate() const;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

NoiseSpec noise_spec_from_json(std::string_view text);
std::string noise_spec_to_json(const NoiseSpec& spec);

struct SynthCorpus {
  std::vector<FrameData> frames;
  std::vector<TrainRecord> train_records;  // one per detection, frame order
  std::vector<GeoPose> poses;              // one per frame
  std::vector<double> feature_weights;     // the generating direction w
};

SynthCorpus generate_corpus(std::size_t n_frames, std::size_t objects_per_frame,
                            const NoiseSpec& noise, std::uint64_t seed);

// Writes label_2/, det/, poses.csv, train_records.csv, features.csv and
// split.txt below `dir`.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

// Image-plane box of a 3D box under the synthetic pinhole camera, clipped to
// the image. `truncation` receives the clipped fraction of the width.
BBox2D project_bbox(const Box3D& box, double* truncation = nullptr);

// Held-out calibration study. Features are a monotone function of the
// validation-scale loss; the training split's losses are the same quantity
// multiplied by `train_loss_scale`, modelling a detector that fits its own
// training data better than unseen data.
struct CalibrationStudy {
  std::vector<TrainRecord> train;
  std::vector<TrainRecord> val;
};

CalibrationStudy make_calibration_study(std::size_t n_train, std::size_t n_val,
                                        double beta, double train_loss_scale,
                                        std::uint64_t seed);

// Per-frame RNG seed derived from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace conf3d

#endif  // CONF3D_SYNTH_BENCH_HPP_
