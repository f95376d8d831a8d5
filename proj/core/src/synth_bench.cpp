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

#include "conf3d/synth_bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <json.hpp>

#include "conf3d/errors.hpp"

namespace conf3d {
namespace {

constexpr double kCx = kSynthImageWidth / 2.0;
constexpr double kCy = kSynthImageHeight / 2.0;
constexpr double kMinDepth = 5.0;
constexpr double kMaxDepth = 50.0;
constexpr double kZReference = 20.0;
constexpr double kBaseLat = 49.0;
constexpr double kBaseLon = 8.4;
constexpr double kMetersPerDegree = kEarthRadiusM * std::numbers::pi / 180.0;

struct ClassPrior {
  const char* name;
  Shape3 mean;
  Shape3 spread;
};

constexpr ClassPrior kCar{"Car", {1.53, 1.63, 3.88}, {0.10, 0.10, 0.30}};
constexpr ClassPrior kPedestrian{"Pedestrian", {1.76, 0.66, 0.84}, {0.10, 0.08, 0.10}};
constexpr ClassPrior kCyclist{"Cyclist", {1.74, 0.60, 1.76}, {0.10, 0.08, 0.15}};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double sigma = 1.0) {
    if (sigma <= 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(engine_);
  }

 private:
  std::mt19937_64 engine_;
};

const ClassPrior& pick_class(Rng& rng, double car_fraction) {
  if (rng.uniform() < car_fraction) return kCar;
  return rng.uniform() < 0.5 ? kPedestrian : kCyclist;
}

Box3D random_box(Rng& rng, const ClassPrior& prior) {
  Box3D b;
  b.shape.h = std::max(0.3, prior.mean.h + rng.normal(prior.spread.h));
  b.shape.w = std::max(0.3, prior.mean.w + rng.normal(prior.spread.w));
  b.shape.l = std::max(0.3, prior.mean.l + rng.normal(prior.spread.l));
  b.center.z = rng.uniform(kMinDepth, kMaxDepth);
  const double half = std::min(0.7 * b.center.z, 20.0);
  b.center.x = rng.uniform(-half, half);
  b.center.y = 1.65 + rng.normal(0.05);
  b.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return b;
}

int random_occlusion(Rng& rng) {
  const double u = rng.uniform();
  if (u < 0.60) return 0;
  if (u < 0.85) return 1;
  if (u < 0.97) return 2;
  return 3;
}

double alpha_of(const Box3D& b) {
  return wrap_angle(b.yaw - std::atan2(b.center.x, b.center.z));
}

std::vector<double> make_features(Rng& rng, double loss, const NoiseSpec& noise,
                                  const std::vector<double>& w) {
  const std::size_t d = w.size();
  std::vector<double> x(d);
  for (auto& v : x) v = rng.normal(1.0);
  double target = loss;
  if (noise.feature_model == FeatureModel::kLossNoisy) {
    target = noise.rho * loss + (1.0 - noise.rho) * rng.normal(1.0);
  }
  // Project so that x . w == target (w has unit norm).
  double dot = 0.0;
  for (std::size_t k = 0; k < d; ++k) dot += x[k] * w[k];
  for (std::size_t k = 0; k < d; ++k) x[k] += (target - dot) * w[k];
  return x;
}

double make_score2d(Rng& rng, double loss, ScoreModel model) {
  if (model == ScoreModel::kNoise) return rng.uniform();
  return std::clamp(0.9 * std::exp(-0.5 * loss) + 0.1 * rng.uniform(), 0.0, 1.0);
}

BBox2D jitter_bbox(Rng& rng, const BBox2D& b, double sigma_px) {
  BBox2D out{b.left + rng.normal(sigma_px), b.top + rng.normal(sigma_px),
             b.right + rng.normal(sigma_px), b.bottom + rng.normal(sigma_px)};
  if (out.right < out.left) std::swap(out.left, out.right);
  if (out.bottom < out.top) std::swap(out.top, out.bottom);
  return out;
}

ScoreModel parse_score_model(const std::string& s) {
  if (s == "informative") return ScoreModel::kInformative;
  if (s == "noise") return ScoreModel::kNoise;
  throw ConfigError("unknown score model '" + s + "'");
}

FeatureModel parse_feature_model(const std::string& s) {
  if (s == "loss_linear") return FeatureModel::kLossLinear;
  if (s == "loss_noisy") return FeatureModel::kLossNoisy;
  throw ConfigError("unknown feature model '" + s + "'");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

void NoiseSpec::validate() const {
  for (double s : {sigma_x, sigma_y, sigma_z, sigma_h, sigma_w, sigma_l, sigma_yaw}) {
    if (!(s >= 0.0)) throw ConfigError("noise sigmas must be non-negative");
  }
  for (double r : {fp_rate, fn_rate, rho, car_fraction}) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ConfigError("rates, rho and car_fraction must lie in [0, 1]");
    }
  }
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (sequence_length < 1) throw ConfigError("sequence_length must be positive");
  if (!(frame_spacing_m >= 0.0)) throw ConfigError("frame spacing must be non-negative");
}

NoiseSpec noise_spec_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("noise profile: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("noise profile must be a JSON object");
  NoiseSpec s;
  try {
    for (const auto& [key, val] : doc.items()) {
      if (key == "sigma_x") s.sigma_x = val.get<double>();
      else if (key == "sigma_y") s.sigma_y = val.get<double>();
      else if (key == "sigma_z") s.sigma_z = val.get<double>();
      else if (key == "sigma_h") s.sigma_h = val.get<double>();
      else if (key == "sigma_w") s.sigma_w = val.get<double>();
      else if (key == "sigma_l") s.sigma_l = val.get<double>();
      else if (key == "sigma_yaw") s.sigma_yaw = val.get<double>();
      else if (key == "z_distance_exponent") s.z_distance_exponent = val.get<double>();
      else if (key == "fp_rate") s.fp_rate = val.get<double>();
      else if (key == "fn_rate") s.fn_rate = val.get<double>();
      else if (key == "score_model") s.score_model = parse_score_model(val.get<std::string>());
      else if (key == "feature_model") s.feature_model = parse_feature_model(val.get<std::string>());
      else if (key == "rho") s.rho = val.get<double>();
      else if (key == "feature_dim") s.feature_dim = val.get<std::size_t>();
      else if (key == "car_fraction") s.car_fraction = val.get<double>();
      else if (key == "sequence_length") s.sequence_length = val.get<std::size_t>();
      else if (key == "frame_spacing_m") s.frame_spacing_m = val.get<double>();
      else throw ConfigError("noise profile: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("noise profile: ") + e.what());
  }
  s.validate();
  return s;
}

std::string noise_spec_to_json(const NoiseSpec& s) {
  nlohmann::ordered_json j;
  j["sigma_x"] = s.sigma_x;
  j["sigma_y"] = s.sigma_y;
  j["sigma_z"] = s.sigma_z;
  j["sigma_h"] = s.sigma_h;
  j["sigma_w"] = s.sigma_w;
  j["sigma_l"] = s.sigma_l;
  j["sigma_yaw"] = s.sigma_yaw;
  j["z_distance_exponent"] = s.z_distance_exponent;
  j["fp_rate"] = s.fp_rate;
  j["fn_rate"] = s.fn_rate;
  j["score_model"] = s.score_model == ScoreModel::kNoise ? "noise" : "informative";
  j["feature_model"] =
      s.feature_model == FeatureModel::kLossNoisy ? "loss_noisy" : "loss_linear";
  j["rho"] = s.rho;
  j["feature_dim"] = s.feature_dim;
  j["car_fraction"] = s.car_fraction;
  j["sequence_length"] = s.sequence_length;
  j["frame_spacing_m"] = s.frame_spacing_m;
  return j.dump(2) + "\n";
}

BBox2D project_bbox(const Box3D& box, double* truncation) {
  const ConvexPolygon foot = bev_corners(box);
  double u_min = 1e18, u_max = -1e18, v_min = 1e18, v_max = -1e18;
  for (const auto& p : foot.vertices()) {
    const double z = std::max(p.z, 0.1);
    for (double y : {box.center.y - box.shape.h, box.center.y}) {
      const double u = kCx + kSynthFocalPx * p.x / z;
      const double v = kCy + kSynthFocalPx * y / z;
      u_min = std::min(u_min, u);
      u_max = std::max(u_max, u);
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
  }
  BBox2D b{std::clamp(u_min, 0.0, kSynthImageWidth - 1.0),
           std::clamp(v_min, 0.0, kSynthImageHeight - 1.0),
           std::clamp(u_max, 0.0, kSynthImageWidth - 1.0),
           std::clamp(v_max, 0.0, kSynthImageHeight - 1.0)};
  if (truncation) {
    const double full = u_max - u_min;
    *truncation = full > 0.0 ? std::clamp(1.0 - b.width() / full, 0.0, 1.0) : 1.0;
  }
  return b;
}

constexpr std::uint64_t kFeatureDirectionSeed = 0x3D5C0BE5ULL;

SynthCorpus generate_corpus(std::size_t n_frames, std::size_t objects_per_frame,
                            const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  SynthCorpus corpus;

  // The feature direction belongs to the simulated detector, not to the
  // corpus: corpora drawn with different seeds share it.
  Rng weight_rng(derive_seed(kFeatureDirectionSeed, noise.feature_dim));
  auto& w = corpus.feature_weights;
  w.resize(noise.feature_dim);
  double norm = 0.0;
  for (auto& v : w) {
    v = weight_rng.normal(1.0);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    w.assign(w.size(), 0.0);
    w[0] = 1.0;
  } else {
    for (auto& v : w) v /= norm;
  }

  corpus.frames.resize(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    Rng rng(derive_seed(seed, 1 + f));
    FrameData& frame = corpus.frames[f];
    frame.frame_id = format_frame_id(f);

    for (std::size_t k = 0; k < objects_per_frame; ++k) {
      const ClassPrior& prior = pick_class(rng, noise.car_fraction);
      Box3D box;
      bool placed = false;
      for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
        box = random_box(rng, prior);
        placed = std::none_of(frame.gts.begin(), frame.gts.end(), [&](const Annotation& g) {
          return iou_bev(g.box, box) > 0.0;
        });
      }
      if (!placed) continue;
      Annotation gt;
      gt.class_name = prior.name;
      gt.occlusion = random_occlusion(rng);
      gt.box = box;
      gt.alpha = alpha_of(box);
      gt.bbox2d = project_bbox(box, &gt.truncation);
      frame.gts.push_back(std::move(gt));
    }

    auto nearest_loss = [&](const Detection& det) {
      double best = 0.0;
      bool any = false;
      for (const auto& g : frame.gts) {
        if (g.class_name != det.class_name) continue;
        const double l = box_loss(det.box, g.box);
        if (!any || l < best) best = l;
        any = true;
      }
      return any ? best : 10.0;
    };

    auto emit = [&](Detection det, double loss) {
      det.alpha = alpha_of(det.box);
      det.truncation = -1.0;
      det.occlusion = -1;
      det.score2d = make_score2d(rng, loss, noise.score_model);
      det.features = make_features(rng, loss, noise, w);
      corpus.train_records.push_back({det.features, loss, class_id_for(det.class_name)});
      frame.dets.push_back(std::move(det));
    };

    const std::size_t n_gt = frame.gts.size();
    for (std::size_t g = 0; g < n_gt; ++g) {
      const Annotation& gt = frame.gts[g];
      const bool missed = rng.uniform() < noise.fn_rate;
      const bool add_fp = rng.uniform() < noise.fp_rate;
      if (!missed) {
        Detection det;
        det.class_name = gt.class_name;
        Box3D& b = det.box;
        b = gt.box;
        const double z_scale =
            std::pow(gt.box.center.z / kZReference, noise.z_distance_exponent);
        b.center.x += rng.normal(noise.sigma_x);
        b.center.y += rng.normal(noise.sigma_y);
        b.center.z = std::max(0.5, b.center.z + rng.normal(noise.sigma_z * z_scale));
        b.shape.h = std::max(0.1, b.shape.h + rng.normal(noise.sigma_h));
        b.shape.w = std::max(0.1, b.shape.w + rng.normal(noise.sigma_w));
        b.shape.l = std::max(0.1, b.shape.l + rng.normal(noise.sigma_l));
        b.yaw = wrap_angle(b.yaw + rng.normal(noise.sigma_yaw));
        det.bbox2d = jitter_bbox(rng, gt.bbox2d, 2.0);
        emit(std::move(det), box_loss(b, gt.box));
      }
      if (add_fp) {
        Detection det;
        const ClassPrior& prior =
            gt.class_name == kCar.name ? kCar
            : gt.class_name == kPedestrian.name ? kPedestrian : kCyclist;
        det.class_name = prior.name;
        det.box = random_box(rng, prior);
        det.bbox2d = project_bbox(det.box);
        const double loss = nearest_loss(det);
        emit(std::move(det), loss);
      }
    }
  }

  // Straight road segments, one per sequence.
  const std::size_t seq_len = noise.sequence_length;
  corpus.poses.reserve(n_frames);
  double origin_lat = kBaseLat, origin_lon = kBaseLon, heading = 0.0;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t seq = f / seq_len;
    if (f % seq_len == 0) {
      Rng rng(derive_seed(seed, (1ULL << 40) + seq));
      origin_lat = kBaseLat + rng.uniform(-0.1, 0.1);
      origin_lon = kBaseLon + rng.uniform(-0.1, 0.1);
      heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    const double along = static_cast<double>(f % seq_len) * noise.frame_spacing_m;
    const double north = along * std::cos(heading);
    const double east = along * std::sin(heading);
    char seq_id[32];
    std::snprintf(seq_id, sizeof(seq_id), "seq_%04zu", seq);
    GeoPose p;
    p.frame_id = corpus.frames[f].frame_id;
    p.sequence_id = seq_id;
    p.lat = origin_lat + north / kMetersPerDegree;
    p.lon = origin_lon +
            east / (kMetersPerDegree * std::cos(origin_lat * std::numbers::pi / 180.0));
    corpus.poses.push_back(std::move(p));
  }
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  std::vector<DetectionFeatures> feats;
  for (const auto& f : corpus.frames) {
    ids.push_back(f.frame_id);
    write_text_file(dir / "label_2" / (f.frame_id + ".txt"), write_label_file(f.gts));
    write_text_file(dir / "det" / (f.frame_id + ".txt"), write_detection_file(f.dets));
    for (std::size_t i = 0; i < f.dets.size(); ++i) {
      feats.push_back({f.frame_id, i, class_id_for(f.dets[i].class_name), f.dets[i].features});
    }
  }
  write_text_file(dir / "poses.csv", write_pose_csv(corpus.poses));
  write_text_file(dir / "train_records.csv", write_train_records_csv(corpus.train_records));
  write_text_file(dir / "features.csv", write_detection_features_csv(feats));
  write_text_file(dir / "split.txt", write_split_manifest(make_manifest("all", ids)));
}

CalibrationStudy make_calibration_study(std::size_t n_train, std::size_t n_val,
                                        double beta, double train_loss_scale,
                                        std::uint64_t seed) {
  if (!(beta > 0.0)) throw ConfigError("temperature beta must be positive");
  if (!(train_loss_scale > 0.0)) throw ConfigError("train loss scale must be positive");
  CalibrationStudy study;
  auto draw = [&](std::size_t n, double scale, std::uint64_t stream,
                  std::vector<TrainRecord>& out) {
    Rng rng(derive_seed(seed, stream));
    for (std::size_t i = 0; i < n; ++i) {
      // Uniform absolute target on the held-out scale.
      const double u = rng.uniform(0.01, 1.0);
      const double loss = -beta * std::log(u);
      out.push_back({{loss, rng.normal(1.0)}, scale * loss, 0});
    }
  };
  draw(n_train, train_loss_scale, 1, study.train);
  draw(n_val, 1.0, 2, study.val);
  return study;
}

}  // namespace conf3d
