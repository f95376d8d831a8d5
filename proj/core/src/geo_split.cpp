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

#include "conf3d/geo_split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "conf3d/errors.hpp"
#include "conf3d/parallel.hpp"

namespace conf3d {
namespace {

constexpr double kMetersPerDegree = kEarthRadiusM * 3.14159265358979323846 / 180.0;

double min_distance_brute(const GeoPose& p, std::span<const GeoPose> others) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : others) {
    if (!has_position(q)) continue;
    best = std::min(best, haversine_m(p.latlon(), q.latlon()));
  }
  return best;
}

// Protected poses bucketed into latitude bands one radius tall. The
// great-circle distance is at least the meridian arc between the two
// latitudes, so any pose within the radius lies in the same or an adjacent
// band.
class LatitudeBands {
 public:
  LatitudeBands(std::span<const GeoPose> poses, double radius_m)
      : band_deg_(std::max(radius_m, 1.0) / kMetersPerDegree) {
    for (const auto& p : poses) {
      if (has_position(p)) bands_[band_of(p.lat)].push_back(&p);
    }
  }

  bool any_within(const GeoPose& c, double radius_m) const {
    const long long b = band_of(c.lat);
    for (long long k = b - 1; k <= b + 1; ++k) {
      const auto it = bands_.find(k);
      if (it == bands_.end()) continue;
      for (const GeoPose* p : it->second) {
        if (!(haversine_m(c.latlon(), p->latlon()) > radius_m)) return true;
      }
    }
    return false;
  }

 private:
  long long band_of(double lat) const {
    return static_cast<long long>(std::floor(lat / band_deg_));
  }

  double band_deg_;
  std::map<long long, std::vector<const GeoPose*>> bands_;
};

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

}  // namespace

PoseTable::PoseTable(std::vector<GeoPose> poses) : poses_(std::move(poses)) {
  for (std::size_t i = 0; i < poses_.size(); ++i) index_[poses_[i].frame_id] = i;
}

const GeoPose* PoseTable::find(std::string_view frame_id) const {
  const auto it = index_.find(std::string(frame_id));
  return it == index_.end() ? nullptr : &poses_[it->second];
}

bool has_position(const GeoPose& pose) {
  return std::isfinite(pose.lat) && std::isfinite(pose.lon);
}

OverlapReport overlap_audit(const SplitManifest& split_a,
                            const SplitManifest& split_b,
                            const PoseTable& poses) {
  OverlapReport r;
  const std::set<std::string> a_ids(split_a.frame_ids.begin(), split_a.frame_ids.end());
  const std::set<std::string> b_ids(split_b.frame_ids.begin(), split_b.frame_ids.end());
  r.size_a = a_ids.size();
  r.size_b = b_ids.size();

  std::set<std::string> a_seqs, b_seqs;
  std::vector<const GeoPose*> a_pos, b_pos;
  for (const auto& id : a_ids) {
    const GeoPose* p = poses.find(id);
    if (!p) {
      ++r.missing_poses;
      continue;
    }
    a_seqs.insert(p->sequence_id);
    if (has_position(*p)) a_pos.push_back(p);
  }
  for (const auto& id : b_ids) {
    const bool shared = a_ids.count(id) > 0;
    if (shared) ++r.shared_frames;
    const GeoPose* p = poses.find(id);
    if (!p) {
      ++r.missing_poses;
      if (shared) ++r.sequence_shared_frames;
      continue;
    }
    b_seqs.insert(p->sequence_id);
    if (has_position(*p)) b_pos.push_back(p);
    if (shared || a_seqs.count(p->sequence_id)) ++r.sequence_shared_frames;
  }
  for (const auto& s : b_seqs) r.shared_sequences += a_seqs.count(s);

  if (r.size_b > 0) {
    r.shared_fraction = static_cast<double>(r.shared_frames) / static_cast<double>(r.size_b);
    r.sequence_shared_fraction =
        static_cast<double>(r.sequence_shared_frames) / static_cast<double>(r.size_b);
  }
  if (!a_pos.empty() && !b_pos.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const GeoPose* pb : b_pos) {
      for (const GeoPose* pa : a_pos) {
        best = std::min(best, haversine_m(pa->latlon(), pb->latlon()));
      }
    }
    r.min_cross_distance_m = best;
  }
  return r;
}

std::string overlap_report_json(const OverlapReport& r) {
  nlohmann::ordered_json j;
  j["size_a"] = r.size_a;
  j["size_b"] = r.size_b;
  j["shared_frames"] = r.shared_frames;
  j["shared_fraction"] = r.shared_fraction;
  j["shared_sequences"] = r.shared_sequences;
  j["sequence_shared_frames"] = r.sequence_shared_frames;
  j["sequence_shared_fraction"] = r.sequence_shared_fraction;
  j["min_cross_distance_m"] = optional_number(r.min_cross_distance_m);
  j["missing_poses"] = r.missing_poses;
  return j.dump(2) + "\n";
}

GeoSepResult geosep_filter(std::span<const GeoPose> candidates,
                           std::span<const GeoPose> protected_poses,
                           const GeoSepOptions& options) {
  if (!(options.radius_m >= 0.0)) throw ConfigError("radius must be non-negative");
  GeoSepResult out;
  auto& rep = out.report;
  rep.candidates = candidates.size();
  rep.radius_m = options.radius_m;

  if (protected_poses.empty()) {
    rep.warnings.push_back("protected set is empty; all candidates retained");
    std::vector<std::string> ids;
    for (const auto& c : candidates) ids.push_back(c.frame_id);
    out.retained = make_manifest("geosep", std::move(ids));
    rep.retained = out.retained.frame_ids.size();
    return out;
  }

  std::set<std::string> protected_seqs;
  for (const auto& p : protected_poses) protected_seqs.insert(p.sequence_id);

  enum class Verdict { kKeep, kMissing, kSequence, kDistance };
  std::vector<Verdict> verdict(candidates.size(), Verdict::kKeep);
  const LatitudeBands bands(protected_poses, options.radius_m);
  parallel_for(candidates.size(), options.threads, [&](std::size_t i) {
    const GeoPose& c = candidates[i];
    if (!has_position(c)) {
      verdict[i] = Verdict::kMissing;
    } else if (options.exclude_sequences && protected_seqs.count(c.sequence_id)) {
      verdict[i] = Verdict::kSequence;
    } else if (options.latitude_prefilter
                   ? bands.any_within(c, options.radius_m)
                   : !(min_distance_brute(c, protected_poses) > options.radius_m)) {
      verdict[i] = Verdict::kDistance;
    }
  });

  std::vector<std::string> kept;
  std::vector<const GeoPose*> kept_poses;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    switch (verdict[i]) {
      case Verdict::kKeep:
        kept.push_back(candidates[i].frame_id);
        kept_poses.push_back(&candidates[i]);
        break;
      case Verdict::kMissing:
        ++rep.dropped_missing_pose;
        break;
      case Verdict::kSequence:
        ++rep.dropped_sequence;
        break;
      case Verdict::kDistance:
        ++rep.dropped_distance;
        break;
    }
  }
  out.retained = make_manifest("geosep", std::move(kept));
  rep.retained = out.retained.frame_ids.size();

  // Verification: brute-force recomputation over every protected pose.
  std::vector<double> min_d(kept_poses.size());
  parallel_for(kept_poses.size(), options.threads, [&](std::size_t i) {
    min_d[i] = min_distance_brute(*kept_poses[i], protected_poses);
  });
  if (!min_d.empty()) {
    const double m = *std::min_element(min_d.begin(), min_d.end());
    if (std::isfinite(m)) rep.min_retained_distance_m = m;
    rep.verification_passed = std::all_of(min_d.begin(), min_d.end(), [&](double d) {
      return d > options.radius_m;
    });
  }
  if (!rep.verification_passed) {
    rep.warnings.push_back("verification failed: a retained frame lies within the radius");
  }
  return out;
}

std::string geosep_report_json(const GeoSepReport& r, std::size_t train_size,
                               std::size_t val_size) {
  nlohmann::ordered_json j;
  j["candidates"] = r.candidates;
  j["retained"] = r.retained;
  j["dropped_distance"] = r.dropped_distance;
  j["dropped_sequence"] = r.dropped_sequence;
  j["dropped_missing_pose"] = r.dropped_missing_pose;
  j["radius_m"] = r.radius_m;
  j["min_retained_distance_m"] = optional_number(r.min_retained_distance_m);
  j["verification_passed"] = r.verification_passed;
  j["train_size"] = train_size;
  j["val_size"] = val_size;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::pair<SplitManifest, SplitManifest> split_train_val(
    const SplitManifest& manifest, std::size_t val_size, std::uint64_t seed) {
  const auto& ids = manifest.frame_ids;
  if (val_size > 0 && val_size >= ids.size()) {
    throw InputError("validation size " + std::to_string(val_size) +
                     " must be smaller than the manifest (" +
                     std::to_string(ids.size()) + " frames)");
  }
  std::vector<std::size_t> idx(ids.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates: the first val_size slots are a uniform sample.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < val_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<std::string> val, train;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < val_size ? val : train).push_back(ids[idx[i]]);
  }
  return {make_manifest(manifest.name + "_train", std::move(train)),
          make_manifest(manifest.name + "_val", std::move(val))};
}

}  // namespace conf3d
