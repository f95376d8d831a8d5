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

// Readers and writers for KITTI-style text files: object labels (15
// columns), detections (16 columns, score appended), OXTS pose lines, split
// manifests, and the toolkit's pose CSV (frame_id,sequence_id,lat,lon).
//
// Floating-point fields are written with 6 fixed decimals.

#ifndef CONF3D_KITTI_IO_HPP_
#define CONF3D_KITTI_IO_HPP_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conf3d/box_geometry.hpp"

namespace conf3d {

inline constexpr std::string_view kDontCare = "DontCare";

// The 15 label columns: type, truncated, occluded, alpha, bbox (4),
// dimensions (H, W, L), location (X, Y, Z), rotation_y.
struct Annotation {
  std::string class_name;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  BBox2D bbox2d;
  Box3D box;  // box.yaw holds rotation_y

  bool is_dont_care() const { return class_name == kDontCare; }

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection : Annotation {
  double score2d = 0.0;
  std::optional<double> score3d;
  std::vector<double> features;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GeoPose {
  std::string frame_id;
  std::string sequence_id;
  double lat = 0.0;
  double lon = 0.0;

  LatLon latlon() const { return {lat, lon}; }

  friend bool operator==(const GeoPose&, const GeoPose&) = default;
};

struct SplitManifest {
  std::string name;
  std::vector<std::string> frame_ids;  // unique, ascending

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

struct ParsedManifest {
  SplitManifest manifest;
  std::vector<std::string> warnings;
};

enum class ScoreMode {
  kScore2D,   // column 16 = score2d
  kCombined,  // column 16 = combine_scores(score2d, score3d)
  kScore3D,   // column 16 = score3d
};

// Formats a double with 6 fixed decimals ("-0.000000" is normalized to
// "0.000000").
std::string format_fixed6(double v);

std::vector<Annotation> parse_label_file(std::string_view text);
std::string write_label_file(std::span<const Annotation> labels);

std::vector<Detection> parse_detection_file(std::string_view text);

// Throws InputError listing the offending indices when a score mode needs
// score3d and some detection lacks it.
std::string write_detection_file(std::span<const Detection> dets,
                                 ScoreMode mode = ScoreMode::kScore2D);

// First two numeric fields of the first line of an OXTS file.
LatLon parse_pose_file(std::string_view text);

// One frame id per line; duplicates are dropped with a warning.
ParsedManifest parse_split_manifest(std::string_view text,
                                    std::string name = {});
std::string write_split_manifest(const SplitManifest& manifest);

// Canonicalizes ids: sorted ascending, unique.
SplitManifest make_manifest(std::string name, std::vector<std::string> ids);

// Header line is optional on input and always written on output.
std::vector<GeoPose> parse_pose_csv(std::string_view text);
std::string write_pose_csv(std::span<const GeoPose> poses);

// Integer class ids used by scorer heads: Car 0, Pedestrian 1, Cyclist 2,
// Van 3, Truck 4, Person_sitting 5, Tram 6, Misc 7. Unknown names give -1.
int class_id_for(std::string_view class_name);

// True if `id` is a non-empty run of decimal digits.
bool is_valid_frame_id(std::string_view id);
std::string format_frame_id(std::size_t index);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Frame ids of the `<frame_id>.txt` files in `dir`, ascending.
std::vector<std::string> list_frame_ids(const std::filesystem::path& dir);

// Loads a pose table from either a pose CSV file or an OXTS directory laid
// out as <dir>/<sequence_id>/<frame_id>.txt.
std::vector<GeoPose> load_pose_table(const std::filesystem::path& path);

}  // namespace conf3d

#endif  // CONF3D_KITTI_IO_HPP_
