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

// Geographic separation of dataset splits: contamination audits between two
// manifests and the distance/sequence filter that builds a depth-training
// split kept away from detection frames.

#ifndef CONF3D_GEO_SPLIT_HPP_
#define CONF3D_GEO_SPLIT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conf3d/kitti_io.hpp"

namespace conf3d {

// Frame id -> pose lookup. A later duplicate id replaces the earlier one.
class PoseTable {
 public:
  PoseTable() = default;
  explicit PoseTable(std::vector<GeoPose> poses);

  const GeoPose* find(std::string_view frame_id) const;
  std::span<const GeoPose> poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }

 private:
  std::vector<GeoPose> poses_;
  std::unordered_map<std::string, std::size_t> index_;
};

// A pose with a non-finite coordinate counts as missing GPS.
bool has_position(const GeoPose& pose);

struct OverlapReport {
  std::size_t size_a = 0;
  std::size_t size_b = 0;
  std::size_t shared_frames = 0;
  double shared_fraction = 0.0;  // shared_frames / size_b
  std::size_t shared_sequences = 0;
  // Frames of b that are shared or belong to a sequence seen in a.
  std::size_t sequence_shared_frames = 0;
  double sequence_shared_fraction = 0.0;
  std::optional<double> min_cross_distance_m;
  std::size_t missing_poses = 0;
};

OverlapReport overlap_audit(const SplitManifest& split_a,
                            const SplitManifest& split_b,
                            const PoseTable& poses);

std::string overlap_report_json(const OverlapReport& report);

struct GeoSepOptions {
  double radius_m = 200.0;
  bool exclude_sequences = true;
  bool latitude_prefilter = true;
  unsigned threads = 1;
};

struct GeoSepReport {
  std::size_t candidates = 0;
  std::size_t retained = 0;
  std::size_t dropped_distance = 0;
  std::size_t dropped_sequence = 0;
  std::size_t dropped_missing_pose = 0;
  double radius_m = 0.0;
  // Brute-force recomputed minimum over retained frames; empty when nothing
  // is retained or nothing is protected.
  std::optional<double> min_retained_distance_m;
  bool verification_passed = true;
  std::vector<std::string> warnings;
};

struct GeoSepResult {
  SplitManifest retained;
  GeoSepReport report;
};

// Keeps candidates whose distance to every protected pose is strictly
// greater than radius_m and, with exclude_sequences, whose sequence holds no
// protected frame. Candidates without GPS are dropped.
GeoSepResult geosep_filter(std::span<const GeoPose> candidates,
                           std::span<const GeoPose> protected_poses,
                           const GeoSepOptions& options = {});

std::string geosep_report_json(const GeoSepReport& report,
                               std::size_t train_size, std::size_t val_size);

// Uniformly samples val_size ids for validation; both halves sorted.
// Throws InputError unless val_size < |manifest| (val_size 0 always allowed).
std::pair<SplitManifest, SplitManifest> split_train_val(
    const SplitManifest& manifest, std::size_t val_size, std::uint64_t seed);

}  // namespace conf3d

#endif  // CONF3D_GEO_SPLIT_HPP_
