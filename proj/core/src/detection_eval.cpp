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

#include "conf3d/detection_eval.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "conf3d/errors.hpp"
#include "conf3d/parallel.hpp"

namespace conf3d {
namespace {

const DifficultyRule& rule_for(const DifficultyRules& rules, Difficulty d) {
  for (const auto& r : rules) {
    if (r.name == d) return r;
  }
  throw ConfigError("no rule for difficulty " + std::string(to_string(d)));
}

// Recall denominator K and first sample index: R40 samples k/40 for
// k = 1..40, R11 samples k/10 for k = 0..10.
struct SamplingGrid {
  int denom;
  int first;
};

SamplingGrid grid_for(RecallSampling s) {
  return s == RecallSampling::kR40 ? SamplingGrid{40, 1} : SamplingGrid{10, 0};
}

}  // namespace

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy:
      return "Easy";
    case Difficulty::kModerate:
      return "Moderate";
    case Difficulty::kHard:
      return "Hard";
  }
  return "?";
}

std::string_view to_string(Metric m) { return m == Metric::k3D ? "3D" : "BEV"; }

std::string_view to_string(RecallSampling s) {
  return s == RecallSampling::kR40 ? "R40" : "R11";
}

DifficultyRules default_difficulty_rules() {
  return {DifficultyRule{Difficulty::kEasy, 40.0, 0, 0.15},
          DifficultyRule{Difficulty::kModerate, 25.0, 1, 0.30},
          DifficultyRule{Difficulty::kHard, 25.0, 2, 0.50}};
}

void validate_difficulty_rules(const DifficultyRules& rules) {
  const auto& e = rule_for(rules, Difficulty::kEasy);
  const auto& m = rule_for(rules, Difficulty::kModerate);
  const auto& h = rule_for(rules, Difficulty::kHard);
  const bool monotone = e.min_bbox_height >= m.min_bbox_height &&
                        m.min_bbox_height >= h.min_bbox_height &&
                        e.max_occlusion <= m.max_occlusion &&
                        m.max_occlusion <= h.max_occlusion &&
                        e.max_truncation <= m.max_truncation &&
                        m.max_truncation <= h.max_truncation;
  if (!monotone) {
    throw ConfigError("difficulty thresholds must loosen from Easy to Hard");
  }
}

bool qualifies(const Annotation& gt, const DifficultyRule& rule) {
  return gt.bbox2d.height() >= rule.min_bbox_height &&
         gt.occlusion <= rule.max_occlusion &&
         gt.truncation <= rule.max_truncation;
}

std::vector<Difficulty> assign_difficulty(const Annotation& gt,
                                          const DifficultyRules& rules) {
  std::vector<Difficulty> out;
  for (Difficulty d : kAllDifficulties) {
    if (qualifies(gt, rule_for(rules, d))) out.push_back(d);
  }
  return out;
}

IouFn iou_function(Metric metric) {
  return metric == Metric::k3D ? &iou_3d : &iou_bev;
}

std::vector<MatchFlag> match_frame(std::span<const Detection> dets,
                                   std::span<const Annotation> gts,
                                   std::span<const GtRole> roles, IouFn iou_fn,
                                   double iou_threshold) {
  std::vector<MatchFlag> flags(dets.size(), MatchFlag::kFP);
  std::vector<char> taken(gts.size(), 0);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Detection& d = dets[i];
    std::ptrdiff_t best = -1;
    double best_iou = -1.0;
    bool hits_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (roles[g] == GtRole::kDontCare) {
        if (overlap_2d(d.bbox2d, gts[g].bbox2d) >= iou_threshold) hits_ignored = true;
        continue;
      }
      const double iou = iou_fn(d.box, gts[g].box);
      if (iou < iou_threshold) continue;
      if (roles[g] == GtRole::kIgnored) {
        hits_ignored = true;
      } else if (!taken[g] && iou > best_iou) {
        best = static_cast<std::ptrdiff_t>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      flags[i] = MatchFlag::kTP;
      taken[static_cast<std::size_t>(best)] = 1;
    } else if (hits_ignored) {
      flags[i] = MatchFlag::kIgnored;
    }
  }
  return flags;
}

FrameMatch match_frame_for(const FrameData& frame, const ApQuery& query,
                           const DifficultyRules& rules) {
  const DifficultyRule& rule = rule_for(rules, query.difficulty);

  std::vector<Annotation> gts;
  std::vector<GtRole> roles;
  FrameMatch out;
  for (const auto& gt : frame.gts) {
    if (gt.is_dont_care()) {
      gts.push_back(gt);
      roles.push_back(GtRole::kDontCare);
    } else if (gt.class_name == query.class_name) {
      const bool q = qualifies(gt, rule);
      gts.push_back(gt);
      roles.push_back(q ? GtRole::kQualifying : GtRole::kIgnored);
      if (q) ++out.num_qualifying_gt;
    }
  }

  std::vector<std::size_t> order;
  std::vector<double> score_of(frame.dets.size(), 0.0);
  for (std::size_t i = 0; i < frame.dets.size(); ++i) {
    if (frame.dets[i].class_name != query.class_name) continue;
    score_of[i] = detection_score(frame.dets[i], query.score_mode, query.combine_rule);
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score_of[a] > score_of[b];
  });

  std::vector<Detection> dets;
  dets.reserve(order.size());
  for (std::size_t i : order) {
    dets.push_back(frame.dets[i]);
    out.scores.push_back(score_of[i]);
  }
  out.flags = match_frame(dets, gts, roles, iou_function(query.metric),
                          query.iou_threshold);
  return out;
}

std::vector<double> recall_sample_points(RecallSampling sampling) {
  const auto grid = grid_for(sampling);
  std::vector<double> pts;
  for (int k = grid.first; k <= grid.denom; ++k) {
    pts.push_back(static_cast<double>(k) / grid.denom);
  }
  return pts;
}

ApResult compute_ap(std::span<const FrameData> frames, const ApQuery& query,
                    const DifficultyRules& rules, unsigned threads) {
  std::vector<FrameMatch> matches(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) {
    matches[i] = match_frame_for(frames[i], query, rules);
  });

  struct Scored {
    double score;
    bool tp;
  };
  std::vector<Scored> pool;
  ApResult result;
  for (const auto& m : matches) {
    result.num_gt += m.num_qualifying_gt;
    for (std::size_t i = 0; i < m.flags.size(); ++i) {
      if (m.flags[i] == MatchFlag::kIgnored) continue;
      pool.push_back({m.scores[i], m.flags[i] == MatchFlag::kTP});
    }
  }
  std::stable_sort(pool.begin(), pool.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });

  result.recall_points = recall_sample_points(query.sampling);
  result.precisions.assign(result.recall_points.size(), 0.0);
  if (result.num_gt == 0) {
    result.no_ground_truth = true;
    return result;
  }

  // One operating point per distinct score threshold.
  int tp = 0;
  int fp = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (pool[i].tp ? tp : fp) += 1;
    if (i + 1 < pool.size() && pool[i + 1].score == pool[i].score) continue;
    OperatingPoint op;
    op.score_threshold = pool[i].score;
    op.tp = tp;
    op.fp = fp;
    op.recall = static_cast<double>(tp) / result.num_gt;
    op.precision = static_cast<double>(tp) / (tp + fp);
    result.curve.push_back(op);
  }

  // Interpolated precision: best precision among points with recall >= r.
  // Recall is compared exactly as tp * K >= k * n_gt.
  const auto grid = grid_for(query.sampling);
  std::vector<double> suffix_max(result.curve.size() + 1, 0.0);
  for (std::size_t i = result.curve.size(); i-- > 0;) {
    suffix_max[i] = std::max(suffix_max[i + 1], result.curve[i].precision);
  }
  double sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t s = 0; s < result.recall_points.size(); ++s) {
    const long long k = grid.first + static_cast<long long>(s);
    while (pos < result.curve.size() &&
           static_cast<long long>(result.curve[pos].tp) * grid.denom <
               k * result.num_gt) {
      ++pos;
    }
    result.precisions[s] = suffix_max[pos];
    sum += suffix_max[pos];
  }
  result.ap = 100.0 * sum / static_cast<double>(result.recall_points.size());
  return result;
}

namespace {

double ap_with(std::span<const FrameData> frames, std::string_view class_name,
               Difficulty difficulty, Metric metric, double iou_threshold,
               RecallSampling sampling) {
  ApQuery q;
  q.class_name = std::string(class_name);
  q.difficulty = difficulty;
  q.metric = metric;
  q.iou_threshold = iou_threshold;
  q.sampling = sampling;
  return compute_ap(frames, q).ap;
}

}  // namespace

double ap_r40(std::span<const FrameData> frames, std::string_view class_name,
              Difficulty difficulty, Metric metric, double iou_threshold) {
  return ap_with(frames, class_name, difficulty, metric, iou_threshold,
                 RecallSampling::kR40);
}

double ap_r11(std::span<const FrameData> frames, std::string_view class_name,
              Difficulty difficulty, Metric metric, double iou_threshold) {
  return ap_with(frames, class_name, difficulty, metric, iou_threshold,
                 RecallSampling::kR11);
}

double default_iou_threshold(std::string_view class_name) {
  return class_name == "Car" ? 0.7 : 0.5;
}

double EvalConfig::iou_threshold_for(std::string_view class_name) const {
  if (auto it = iou_thresholds.find(class_name); it != iou_thresholds.end()) {
    return it->second;
  }
  return default_iou_threshold(class_name);
}

const EvalEntry* EvalResult::find(std::string_view class_name,
                                  Difficulty difficulty, Metric metric) const {
  for (const auto& e : entries) {
    if (e.class_name == class_name && e.difficulty == difficulty && e.metric == metric) {
      return &e;
    }
  }
  return nullptr;
}

EvalResult evaluate(std::span<const FrameData> frames, const EvalConfig& config) {
  validate_difficulty_rules(config.rules);
  EvalResult result;
  result.sampling = config.sampling;
  for (const auto& cls : config.classes) {
    for (Difficulty d : config.difficulties) {
      for (Metric m : config.metrics) {
        ApQuery q;
        q.class_name = cls;
        q.difficulty = d;
        q.metric = m;
        q.iou_threshold = config.iou_threshold_for(cls);
        q.sampling = config.sampling;
        q.score_mode = config.score_mode;
        q.combine_rule = config.combine_rule;
        EvalEntry e;
        e.class_name = cls;
        e.difficulty = d;
        e.metric = m;
        e.iou_threshold = q.iou_threshold;
        e.result = compute_ap(frames, q, config.rules, config.threads);
        result.entries.push_back(std::move(e));
      }
    }
  }
  return result;
}

std::string eval_result_csv(const EvalResult& result) {
  std::string out = "class,difficulty,metric,ap\n";
  for (const auto& e : result.entries) {
    out += e.class_name;
    out += ',';
    out += to_string(e.difficulty);
    out += ',';
    out += to_string(e.metric);
    out += ',';
    out += format_fixed6(e.result.ap);
    out += '\n';
  }
  return out;
}

std::string eval_result_json(const EvalResult& result) {
  nlohmann::ordered_json doc;
  doc["sampling"] = to_string(result.sampling);
  auto& arr = doc["results"] = nlohmann::ordered_json::array();
  for (const auto& e : result.entries) {
    nlohmann::ordered_json j;
    j["class"] = e.class_name;
    j["difficulty"] = to_string(e.difficulty);
    j["metric"] = to_string(e.metric);
    j["iou_threshold"] = e.iou_threshold;
    j["ap"] = e.result.ap;
    j["num_gt"] = e.result.num_gt;
    j["no_ground_truth"] = e.result.no_ground_truth;
    j["recall_points"] = e.result.recall_points;
    j["precisions"] = e.result.precisions;
    arr.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

}  // namespace conf3d
