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

#include "conf3d/oracle_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "conf3d/errors.hpp"

namespace conf3d {

std::string_view to_string(OracleComponent c) {
  switch (c) {
    case OracleComponent::kNone:
      return "none";
    case OracleComponent::kRotation:
      return "R";
    case OracleComponent::kShape:
      return "HWL";
    case OracleComponent::kXY:
      return "XY";
    case OracleComponent::kDepth:
      return "Z";
  }
  return "?";
}

OracleComponent parse_oracle_component(std::string_view text) {
  for (auto c : {OracleComponent::kNone, OracleComponent::kRotation,
                 OracleComponent::kShape, OracleComponent::kXY, OracleComponent::kDepth}) {
    if (to_string(c) == text) return c;
  }
  throw InputError("unknown oracle component '" + std::string(text) +
                   "' (expected R, HWL, XY or Z)");
}

std::string_view to_string(MatchPolicy p) {
  return p == MatchPolicy::kCenterDistance ? "center" : "iou2d";
}

MatchPolicy parse_match_policy(std::string_view text) {
  if (text == "center") return MatchPolicy::kCenterDistance;
  if (text == "iou2d") return MatchPolicy::kIou2D;
  throw InputError("unknown match policy '" + std::string(text) + "'");
}

std::vector<std::optional<std::size_t>> match_for_substitution(
    std::span<const Detection> dets, std::span<const Annotation> gts,
    const MatchPolicyConfig& policy) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score2d > dets[b].score2d;
  });

  std::vector<std::optional<std::size_t>> match(dets.size());
  std::vector<char> taken(gts.size(), 0);
  for (std::size_t i : order) {
    const Detection& d = dets[i];
    std::optional<std::size_t> best;
    double best_key = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const Annotation& gt = gts[g];
      if (taken[g] || gt.is_dont_care() || gt.class_name != d.class_name) continue;
      if (policy.policy == MatchPolicy::kCenterDistance) {
        const double dist = std::hypot(d.box.center.x - gt.box.center.x,
                                       d.box.center.z - gt.box.center.z);
        if (dist <= policy.center_gate_m && (!best || dist < best_key)) {
          best = g;
          best_key = dist;
        }
      } else {
        const double iou = iou_2d(d.bbox2d, gt.bbox2d);
        if (iou >= policy.iou2d_min && (!best || iou > best_key)) {
          best = g;
          best_key = iou;
        }
      }
    }
    if (best) {
      taken[*best] = 1;
      match[i] = best;
    }
  }
  return match;
}

void apply_substitution(std::span<Detection> dets,
                        std::span<const Annotation> gts,
                        std::span<const std::optional<std::size_t>> matching,
                        OracleComponent component) {
  if (matching.size() != dets.size()) {
    throw InputError("matching must be parallel to the detections");
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!matching[i]) continue;
    const Box3D& gt = gts[*matching[i]].box;
    Box3D& box = dets[i].box;
    switch (component) {
      case OracleComponent::kNone:
        break;
      case OracleComponent::kRotation:
        box.yaw = gt.yaw;
        break;
      case OracleComponent::kShape:
        box.shape = gt.shape;
        break;
      case OracleComponent::kXY:
        box.center.x = gt.center.x;
        box.center.y = gt.center.y;
        break;
      case OracleComponent::kDepth:
        box.center.z = gt.center.z;
        break;
    }
  }
}

std::vector<FrameData> oracle_substitute(std::span<const FrameData> frames,
                                         OracleComponent component,
                                         const MatchPolicyConfig& policy) {
  std::vector<FrameData> out(frames.begin(), frames.end());
  if (component == OracleComponent::kNone) return out;
  for (auto& f : out) {
    const auto matching = match_for_substitution(f.dets, f.gts, policy);
    apply_substitution(f.dets, f.gts, matching, component);
  }
  return out;
}

const OracleRow* OracleTable::find(OracleComponent c) const {
  for (const auto& r : rows) {
    if (r.component == c) return &r;
  }
  return nullptr;
}

OracleTable oracle_sweep(std::span<const FrameData> frames,
                         std::span<const OracleComponent> components,
                         const OracleConfig& config) {
  OracleTable table;
  table.policy = config.policy.policy;
  std::vector<OracleComponent> todo{OracleComponent::kNone};
  for (auto c : components) {
    if (std::find(todo.begin(), todo.end(), c) == todo.end()) todo.push_back(c);
  }
  for (auto c : todo) {
    const auto substituted = oracle_substitute(frames, c, config.policy);
    OracleRow row;
    row.component = c;
    for (Difficulty d : kAllDifficulties) {
      ApQuery q;
      q.class_name = config.class_name;
      q.difficulty = d;
      q.metric = config.metric;
      q.iou_threshold = config.iou_threshold.value_or(default_iou_threshold(config.class_name));
      q.sampling = config.sampling;
      row.ap[static_cast<std::size_t>(d)] =
          compute_ap(substituted, q, config.rules, config.threads).ap;
    }
    table.rows.push_back(row);
  }
  return table;
}

std::string oracle_table_csv(const OracleTable& table) {
  std::string out = "component,easy,moderate,hard\n";
  for (const auto& r : table.rows) {
    out += std::string(to_string(r.component));
    for (double v : r.ap) out += "," + format_fixed6(v);
    out += '\n';
  }
  return out;
}

std::string oracle_tables_json(std::span<const OracleTable> tables) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    nlohmann::ordered_json jt;
    jt["match_policy"] = to_string(t.policy);
    auto& rows = jt["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
      nlohmann::ordered_json jr;
      jr["component"] = to_string(r.component);
      jr["easy"] = r.ap[0];
      jr["moderate"] = r.ap[1];
      jr["hard"] = r.ap[2];
      rows.push_back(std::move(jr));
    }
    doc.push_back(std::move(jt));
  }
  return doc.dump(2) + "\n";
}

}  // namespace conf3d
