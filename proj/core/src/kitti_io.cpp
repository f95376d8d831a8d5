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

#include "conf3d/kitti_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "conf3d/errors.hpp"
#include "conf3d/scores.hpp"

namespace conf3d {
namespace {

constexpr double kYawTolerance = 1e-5;

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Calls fn(line_number, line) for each line, numbering from 1.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line_no, line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

double field_double(std::size_t line, std::string_view s, const char* name) {
  const auto v = to_double(s);
  if (!v || !std::isfinite(*v)) {
    throw ParseError(line, std::string("non-numeric ") + name + " '" +
                               std::string(s) + "'");
  }
  return *v;
}

int field_int(std::size_t line, std::string_view s, const char* name) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(line, std::string("non-integer ") + name + " '" +
                               std::string(s) + "'");
  }
  return v;
}

Annotation parse_label_columns(std::size_t line,
                               std::span<const std::string_view> cols) {
  Annotation a;
  a.class_name = std::string(cols[0]);
  a.truncation = field_double(line, cols[1], "truncation");
  a.occlusion = field_int(line, cols[2], "occlusion");
  a.alpha = field_double(line, cols[3], "alpha");
  a.bbox2d.left = field_double(line, cols[4], "bbox left");
  a.bbox2d.top = field_double(line, cols[5], "bbox top");
  a.bbox2d.right = field_double(line, cols[6], "bbox right");
  a.bbox2d.bottom = field_double(line, cols[7], "bbox bottom");
  a.box.shape.h = field_double(line, cols[8], "height");
  a.box.shape.w = field_double(line, cols[9], "width");
  a.box.shape.l = field_double(line, cols[10], "length");
  a.box.center.x = field_double(line, cols[11], "x");
  a.box.center.y = field_double(line, cols[12], "y");
  a.box.center.z = field_double(line, cols[13], "z");
  a.box.yaw = field_double(line, cols[14], "rotation_y");

  if (a.is_dont_care()) return a;  // sentinel geometry is kept verbatim
  if (a.bbox2d.right < a.bbox2d.left || a.bbox2d.bottom < a.bbox2d.top) {
    throw ParseError(line, "inverted 2D box");
  }
  if (a.box.shape.h <= 0.0 || a.box.shape.w <= 0.0 || a.box.shape.l <= 0.0) {
    throw ParseError(line, "non-positive box dimensions");
  }
  if (std::abs(a.box.yaw) > std::numbers::pi + kYawTolerance) {
    throw ParseError(line, "rotation_y outside [-pi, pi]");
  }
  return a;
}

void append_label_columns(std::string& out, const Annotation& a) {
  out += a.class_name;
  out += ' ';
  out += format_fixed6(a.truncation);
  out += ' ';
  out += std::to_string(a.occlusion);
  for (double v : {a.alpha, a.bbox2d.left, a.bbox2d.top, a.bbox2d.right,
                   a.bbox2d.bottom, a.box.shape.h, a.box.shape.w, a.box.shape.l,
                   a.box.center.x, a.box.center.y, a.box.center.z, a.box.yaw}) {
    out += ' ';
    out += format_fixed6(v);
  }
}

}  // namespace

std::string format_fixed6(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s(buf, static_cast<std::size_t>(n));
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::vector<Annotation> parse_label_file(std::string_view text) {
  std::vector<Annotation> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto cols = split_ws(line);
    if (cols.empty()) return;
    if (cols.size() != 15) {
      throw ParseError(line_no, "expected 15 columns, got " +
                                    std::to_string(cols.size()));
    }
    out.push_back(parse_label_columns(line_no, cols));
  });
  return out;
}

std::string write_label_file(std::span<const Annotation> labels) {
  std::string out;
  for (const auto& a : labels) {
    append_label_columns(out, a);
    out += '\n';
  }
  return out;
}

std::vector<Detection> parse_detection_file(std::string_view text) {
  std::vector<Detection> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto cols = split_ws(line);
    if (cols.empty()) return;
    if (cols.size() != 16) {
      throw ParseError(line_no, "expected 16 columns (label + score), got " +
                                    std::to_string(cols.size()));
    }
    Detection d;
    static_cast<Annotation&>(d) =
        parse_label_columns(line_no, std::span(cols).first(15));
    d.score2d = field_double(line_no, cols[15], "score");
    out.push_back(std::move(d));
  });
  return out;
}

std::string write_detection_file(std::span<const Detection> dets,
                                 ScoreMode mode) {
  if (mode != ScoreMode::kScore2D) {
    std::string missing;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (!dets[i].score3d) {
        if (!missing.empty()) missing += ", ";
        missing += std::to_string(i);
      }
    }
    if (!missing.empty()) {
      throw InputError("score3d missing for detections: " + missing);
    }
  }
  std::string out;
  for (const auto& d : dets) {
    append_label_columns(out, d);
    out += ' ';
    out += format_fixed6(detection_score(d, mode));
    out += '\n';
  }
  return out;
}

LatLon parse_pose_file(std::string_view text) {
  std::optional<std::string_view> first;
  for_each_line(text, [&](std::size_t, std::string_view line) {
    if (!first && !trim(line).empty()) first = line;
  });
  if (!first) throw ParseError(1, "empty pose file");
  const auto cols = split_ws(*first);
  if (cols.size() < 2) throw ParseError(1, "pose line needs lat and lon");
  const LatLon p{field_double(1, cols[0], "lat"), field_double(1, cols[1], "lon")};
  if (std::abs(p.lat) > 90.0 || std::abs(p.lon) > 180.0) {
    throw ParseError(1, "lat/lon out of range");
  }
  return p;
}

bool is_valid_frame_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
           return c >= '0' && c <= '9';
         });
}

std::string format_frame_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

int class_id_for(std::string_view class_name) {
  static constexpr std::array<std::string_view, 8> kNames = {
      "Car", "Pedestrian", "Cyclist", "Van", "Truck", "Person_sitting", "Tram", "Misc"};
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == class_name) return static_cast<int>(i);
  }
  return -1;
}

SplitManifest make_manifest(std::string name, std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return SplitManifest{std::move(name), std::move(ids)};
}

ParsedManifest parse_split_manifest(std::string_view text, std::string name) {
  ParsedManifest out;
  std::set<std::string, std::less<>> seen;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto id = trim(line);
    if (id.empty()) return;
    if (!seen.emplace(id).second) {
      out.warnings.push_back("line " + std::to_string(line_no) +
                             ": duplicate frame id " + std::string(id));
    }
  });
  out.manifest.name = std::move(name);
  out.manifest.frame_ids.assign(seen.begin(), seen.end());
  return out;
}

std::string write_split_manifest(const SplitManifest& manifest) {
  std::string out;
  for (const auto& id : manifest.frame_ids) {
    out += id;
    out += '\n';
  }
  return out;
}

std::vector<GeoPose> parse_pose_csv(std::string_view text) {
  std::vector<GeoPose> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (trim(line).empty()) return;
    std::vector<std::string_view> cols;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cols.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (line_no == 1 && cols.size() >= 1 && cols[0] == "frame_id") return;
    if (cols.size() != 4) {
      throw ParseError(line_no, "pose CSV needs 4 columns, got " +
                                    std::to_string(cols.size()));
    }
    GeoPose p;
    p.frame_id = std::string(cols[0]);
    if (!is_valid_frame_id(p.frame_id)) {
      throw ParseError(line_no, "invalid frame id '" + p.frame_id + "'");
    }
    p.sequence_id = std::string(cols[1]);
    // An empty coordinate marks a frame without GPS.
    constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
    p.lat = cols[2].empty() ? kMissing : field_double(line_no, cols[2], "lat");
    p.lon = cols[3].empty() ? kMissing : field_double(line_no, cols[3], "lon");
    if (std::abs(p.lat) > 90.0 || std::abs(p.lon) > 180.0) {
      throw ParseError(line_no, "lat/lon out of range");
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::string write_pose_csv(std::span<const GeoPose> poses) {
  std::string out = "frame_id,sequence_id,lat,lon\n";
  char buf[96];
  for (const auto& p : poses) {
    out += p.frame_id;
    out += ',';
    out += p.sequence_id;
    out += ',';
    if (std::isfinite(p.lat) && std::isfinite(p.lon)) {
      // Nine decimals of a degree is ~0.1 mm.
      std::snprintf(buf, sizeof(buf), "%.9f,%.9f", p.lat, p.lon);
      out += buf;
    } else {
      out += ',';
    }
    out += '\n';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

std::vector<std::string> list_frame_ids(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("not a directory: " + dir.string());
  }
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    auto stem = entry.path().stem().string();
    if (is_valid_frame_id(stem)) ids.push_back(std::move(stem));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<GeoPose> load_pose_table(const std::filesystem::path& path) {
  if (!std::filesystem::is_directory(path)) {
    return parse_pose_csv(read_text_file(path));
  }
  std::vector<std::filesystem::path> seq_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    if (entry.is_directory()) seq_dirs.push_back(entry.path());
  }
  std::sort(seq_dirs.begin(), seq_dirs.end());
  std::vector<GeoPose> out;
  for (const auto& seq_dir : seq_dirs) {
    for (const auto& id : list_frame_ids(seq_dir)) {
      const auto file = seq_dir / (id + ".txt");
      LatLon p;
      try {
        p = parse_pose_file(read_text_file(file));
      } catch (const ParseError& e) {
        throw InputError(file.string() + ": " + e.what());
      }
      out.push_back(GeoPose{id, seq_dir.filename().string(), p.lat, p.lon});
    }
  }
  return out;
}

double combine_scores(double score2d, double score3d, CombineRule rule) {
  if (!(score2d >= 0.0 && score2d <= 1.0) || !(score3d >= 0.0 && score3d <= 1.0)) {
    throw InputError("combine_scores: scores must lie in [0, 1]");
  }
  switch (rule) {
    case CombineRule::kProduct:
      return score2d * score3d;
    case CombineRule::kMean:
      return 0.5 * (score2d + score3d);
  }
  return score2d * score3d;
}

double detection_score(const Detection& det, ScoreMode mode, CombineRule rule) {
  switch (mode) {
    case ScoreMode::kScore2D:
      return det.score2d;
    case ScoreMode::kScore3D:
      if (!det.score3d) throw InputError("detection has no score3d");
      return *det.score3d;
    case ScoreMode::kCombined:
      if (!det.score3d) throw InputError("detection has no score3d");
      return combine_scores(det.score2d, *det.score3d, rule);
  }
  return det.score2d;
}

}  // namespace conf3d
