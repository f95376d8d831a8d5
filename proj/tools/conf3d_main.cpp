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

// conf3d command-line driver. Every subcommand reads plain files, writes
// plain files and draws randomness only from --seed.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "conf3d/confidence.hpp"
#include "conf3d/detection_eval.hpp"
#include "conf3d/errors.hpp"
#include "conf3d/geo_split.hpp"
#include "conf3d/kitti_io.hpp"
#include "conf3d/oracle_analysis.hpp"
#include "conf3d/scorer.hpp"
#include "conf3d/synth_bench.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace conf3d {
namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

unsigned resolve_threads(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("CONF3D_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("CONF3D_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Writes `primary` at `out` and the other rendering next to it: a .json
// path gets a .csv mirror and vice versa.
void write_report(const fs::path& out, const std::string& json_text, const std::string& csv_text) {
  if (out.extension() == ".csv") {
    write_text_file(out, csv_text);
    write_text_file(fs::path(out).replace_extension(".json"), json_text);
  } else {
    write_text_file(out, json_text);
    write_text_file(fs::path(out).replace_extension(".csv"), csv_text);
  }
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ", ";
    if (i == 20) {
      s += "... (" + std::to_string(ids.size()) + " total)";
      break;
    }
    s += ids[i];
  }
  return s;
}

template <typename T, typename Parse>
std::vector<T> load_frames(const fs::path& dir, const std::vector<std::string>& ids, bool allow_missing,
                           const char* what, Parse parse) {
  std::vector<std::string> missing;
  std::vector<T> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const fs::path file = dir / (ids[i] + ".txt");
    if (!fs::exists(file)) {
      missing.push_back(ids[i]);
      continue;
    }
    try {
      out[i] = parse(read_text_file(file));
    } catch (const ParseError& e) {
      throw InputError(file.string() + ": " + e.what());
    }
  }
  if (!missing.empty() && !allow_missing) {
    throw InputError(std::string("missing ") + what + " files for frames: " + join_ids(missing));
  }
  return out;
}

std::vector<std::string> frame_ids_for(const std::string& split, const fs::path& gt_dir) {
  if (split.empty()) return list_frame_ids(gt_dir);
  auto parsed = parse_split_manifest(read_text_file(split), fs::path(split).stem().string());
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << split << ": " << w << "\n";
  return parsed.manifest.frame_ids;
}

std::vector<FrameData> load_corpus(const fs::path& gt_dir, const fs::path& det_dir,
                                   const std::vector<std::string>& ids, bool allow_missing) {
  auto gts = load_frames<std::vector<Annotation>>(gt_dir, ids, false, "ground-truth",
                                                  [](const std::string& t) { return parse_label_file(t); });
  auto dets = load_frames<std::vector<Detection>>(det_dir, ids, allow_missing, "detection",
                                                  [](const std::string& t) { return parse_detection_file(t); });
  std::vector<FrameData> frames(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    frames[i].frame_id = ids[i];
    frames[i].gts = std::move(gts[i]);
    frames[i].dets = std::move(dets[i]);
  }
  return frames;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string gt, det, split, out;
  std::string classes = "Car";
  std::string metric = "both";
  std::string ap = "r40";
  std::optional<double> iou_car, iou_ped, iou_cyc;
  bool allow_missing = false;
  int threads = 0;
};

void run_eval(const EvalArgs& a) {
  const auto ids = frame_ids_for(a.split, a.gt);
  const auto frames = load_corpus(a.gt, a.det, ids, a.allow_missing);
  EvalConfig cfg;
  cfg.classes = split_list(a.classes);
  if (cfg.classes.empty()) throw ConfigError("--classes is empty");
  if (a.metric == "3d") cfg.metrics = {Metric::k3D};
  else if (a.metric == "bev") cfg.metrics = {Metric::kBEV};
  cfg.sampling = a.ap == "r11" ? RecallSampling::kR11 : RecallSampling::kR40;
  if (a.iou_car) cfg.iou_thresholds["Car"] = *a.iou_car;
  if (a.iou_ped) cfg.iou_thresholds["Pedestrian"] = *a.iou_ped;
  if (a.iou_cyc) cfg.iou_thresholds["Cyclist"] = *a.iou_cyc;
  cfg.threads = resolve_threads(a.threads);
  const auto result = evaluate(frames, cfg);
  for (const auto& e : result.entries) {
    if (e.result.no_ground_truth) {
      std::cerr << "warning: no " << to_string(e.difficulty) << " ground truth for " << e.class_name
                << "; AP reported as 0\n";
    }
  }
  write_report(a.out, eval_result_json(result), eval_result_csv(result));
}

// ---------------------------------------------------------------- rescore

struct RescoreArgs {
  std::string det, scorer, features, out;
  std::string mode = "combined";
  std::string combine = "product";
};

void run_rescore(const RescoreArgs& a) {
  const Scorer scorer = Scorer::from_json(read_text_file(a.scorer));
  const auto rows = parse_detection_features_csv(read_text_file(a.features));
  std::map<std::string, std::vector<const DetectionFeatures*>> by_frame;
  for (const auto& r : rows) by_frame[r.frame_id].push_back(&r);

  const ScoreMode mode = a.mode == "3d-only" ? ScoreMode::kScore3D : ScoreMode::kCombined;
  const CombineRule rule = a.combine == "mean" ? CombineRule::kMean : CombineRule::kProduct;
  const auto ids = list_frame_ids(a.det);
  for (const auto& id : ids) {
    const fs::path file = fs::path(a.det) / (id + ".txt");
    std::vector<Detection> dets;
    try {
      dets = parse_detection_file(read_text_file(file));
    } catch (const ParseError& e) {
      throw InputError(file.string() + ": " + e.what());
    }
    const auto it = by_frame.find(id);
    const std::size_t n_rows = it == by_frame.end() ? 0 : it->second.size();
    if (n_rows != dets.size()) {
      throw InputError("frame " + id + ": " + std::to_string(dets.size()) + " detections but " +
                       std::to_string(n_rows) + " feature rows");
    }
    std::vector<char> seen(dets.size(), 0);
    if (it != by_frame.end()) {
      for (const DetectionFeatures* r : it->second) {
        if (r->det_index >= dets.size() || seen[r->det_index]) {
          throw InputError("frame " + id + ": bad or repeated det_index " + std::to_string(r->det_index));
        }
        seen[r->det_index] = 1;
        dets[r->det_index].features = r->features;
      }
      by_frame.erase(it);
    }
    rescore_detections(dets, scorer);
    for (auto& d : dets) {
      d.score2d = detection_score(d, mode, rule);
      d.score3d.reset();
    }
    write_text_file(fs::path(a.out) / (id + ".txt"), write_detection_file(dets));
  }
  if (!by_frame.empty()) {
    std::vector<std::string> extra;
    for (const auto& [id, _] : by_frame) extra.push_back(id);
    throw InputError("feature rows for frames with no detection file: " + join_ids(extra));
  }
}

// ---------------------------------------------------------------- train-conf

struct TrainArgs {
  std::string records, out;
  std::string mode = "relative";
  double beta = 1.0;
  int epochs = 100;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  std::string hidden = "512,512";
  std::string milestones = "20,40";
};

void run_train(const TrainArgs& a) {
  const auto records = parse_train_records_csv(read_text_file(a.records));
  ConfidenceTargetConfig cfg;
  cfg.mode = parse_target_mode(a.mode);
  cfg.beta = a.beta;
  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.learning_rate = a.lr;
  opts.batch_size = a.batch;
  opts.seed = a.seed;
  opts.hidden.clear();
  for (const auto& w : split_list(a.hidden)) opts.hidden.push_back(std::stoul(w));
  opts.lr_milestones.clear();
  for (const auto& m : split_list(a.milestones)) opts.lr_milestones.push_back(std::stoi(m));
  TrainReport report;
  const Scorer scorer = train_scorer(records, cfg, opts, &report);
  write_text_file(a.out, scorer.to_json());
  if (report.skipped_singletons > 0) {
    std::cerr << "note: " << report.skipped_singletons << " records had no same-class partner\n";
  }
  if (!report.epoch_loss.empty()) {
    std::cerr << "final epoch loss " << report.epoch_loss.back() << "\n";
  }
}

// ---------------------------------------------------------------- geosep

struct GeosepArgs {
  std::string candidates, protected_poses, out_train, out_val, report;
  double radius = 200.0;
  bool exclude_sequences = false;
  std::size_t val_size = 0;
  std::uint64_t seed = 0;
  int threads = 0;
};

void run_geosep(const GeosepArgs& a) {
  const auto cand = load_pose_table(a.candidates);
  const auto prot = load_pose_table(a.protected_poses);
  GeoSepOptions opts;
  opts.radius_m = a.radius;
  opts.exclude_sequences = a.exclude_sequences;
  opts.threads = resolve_threads(a.threads);
  auto result = geosep_filter(cand, prot, opts);
  for (const auto& w : result.report.warnings) std::cerr << "warning: " << w << "\n";
  result.retained.name = "retained";
  auto [train, val] = split_train_val(result.retained, a.val_size, a.seed);
  write_text_file(a.out_train, write_split_manifest(train));
  if (!a.out_val.empty()) write_text_file(a.out_val, write_split_manifest(val));
  if (!a.report.empty()) {
    write_text_file(a.report, geosep_report_json(result.report, train.frame_ids.size(),
                                                 val.frame_ids.size()));
  }
  if (!result.report.verification_passed) {
    throw NumericalError("post-filter verification failed: a retained frame is within the radius");
  }
}

// ---------------------------------------------------------------- audit

struct AuditArgs {
  std::string split_a, split_b, poses, report;
};

void run_audit(const AuditArgs& a) {
  auto load = [](const std::string& path) {
    auto parsed = parse_split_manifest(read_text_file(path), fs::path(path).stem().string());
    for (const auto& w : parsed.warnings) std::cerr << "warning: " << path << ": " << w << "\n";
    return parsed.manifest;
  };
  const auto sa = load(a.split_a);
  const auto sb = load(a.split_b);
  const PoseTable poses(a.poses.empty() ? std::vector<GeoPose>{} : load_pose_table(a.poses));
  write_text_file(a.report, overlap_report_json(overlap_audit(sa, sb, poses)));
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
  std::string gt, det, split, out;
  std::string components = "R,HWL,XY,Z";
  std::string match = "center";
  std::string class_name = "Car";
  std::string metric = "3d";
  std::string ap = "r40";
  double center_gate = 4.0;
  double iou2d_min = 0.5;
  int threads = 0;
};

void run_oracle(const OracleArgs& a) {
  const auto ids = frame_ids_for(a.split, a.gt);
  const auto frames = load_corpus(a.gt, a.det, ids, false);
  std::vector<OracleComponent> comps;
  for (const auto& c : split_list(a.components)) {
    const auto comp = parse_oracle_component(c);
    if (comp != OracleComponent::kNone) comps.push_back(comp);
  }
  std::vector<MatchPolicy> policies;
  if (a.match == "both") policies = {MatchPolicy::kCenterDistance, MatchPolicy::kIou2D};
  else policies = {parse_match_policy(a.match)};

  OracleConfig cfg;
  cfg.class_name = a.class_name;
  cfg.metric = a.metric == "bev" ? Metric::kBEV : Metric::k3D;
  cfg.sampling = a.ap == "r11" ? RecallSampling::kR11 : RecallSampling::kR40;
  cfg.policy.center_gate_m = a.center_gate;
  cfg.policy.iou2d_min = a.iou2d_min;
  cfg.threads = resolve_threads(a.threads);
  std::vector<OracleTable> tables;
  std::string csv;
  for (auto p : policies) {
    cfg.policy.policy = p;
    tables.push_back(oracle_sweep(frames, comps, cfg));
    if (policies.size() > 1) csv += "# match=" + std::string(to_string(p)) + "\n";
    csv += oracle_table_csv(tables.back());
  }
  write_report(a.out, oracle_tables_json(tables), csv);
}

// ---------------------------------------------------------------- calib

std::vector<double> read_column(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<double> out;
  std::stringstream ss(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(ss, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    // Last comma-separated field, so two-column CSVs also work.
    const auto comma = line.rfind(',');
    const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      if (n == 1) continue;  // header
      throw InputError(path + ": line " + std::to_string(n) + ": not a number");
    }
    if (field.find_first_not_of(" \t", used) != std::string::npos) {
      throw InputError(path + ": line " + std::to_string(n) + ": trailing characters");
    }
    out.push_back(v);
  }
  return out;
}

struct CalibArgs {
  std::string preds, realized, out;
  std::size_t bins = 10;
};

void run_calib(const CalibArgs& a) {
  const auto preds = read_column(a.preds);
  const auto realized = read_column(a.realized);
  if (preds.size() != realized.size()) {
    throw InputError("preds has " + std::to_string(preds.size()) + " values, realized has " +
                     std::to_string(realized.size()));
  }
  const auto bins = calibration_bins(preds, realized, a.bins);
  json doc;
  doc["n_bins"] = a.bins;
  doc["bins"] = json::array();
  for (const auto& b : bins) {
    doc["bins"].push_back({{"bin_center", b.bin_center},
                           {"mean_pred", b.mean_pred},
                           {"mean_realized", b.mean_realized},
                           {"count", b.count}});
  }
  write_report(a.out, doc.dump(2) + "\n", calibration_csv(bins));
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::size_t frames = 100;
  std::size_t objects = 5;
  std::string noise_profile, out;
  std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a) {
  NoiseSpec noise;
  if (!a.noise_profile.empty()) noise = noise_spec_from_json(read_text_file(a.noise_profile));
  write_corpus(generate_corpus(a.frames, a.objects, noise, a.seed), a.out);
}

int run(int argc, char** argv) {
  CLI::App app{"conf3d: 3D detection evaluation and relative confidence tools"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: $CONF3D_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "AP evaluation of a detection directory");
  eval->add_option("--gt", ea.gt, "Ground-truth label directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--det", ea.det, "Detection directory")->required();
  eval->add_option("--split", ea.split, "Split manifest (default: every frame in --gt)");
  eval->add_option("--classes", ea.classes, "Comma-separated classes")->capture_default_str();
  eval->add_option("--metric", ea.metric)->check(CLI::IsMember({"3d", "bev", "both"}))->capture_default_str();
  eval->add_option("--ap", ea.ap)->check(CLI::IsMember({"r40", "r11"}))->capture_default_str();
  eval->add_option("--iou-car", ea.iou_car)->check(CLI::Range(0.0, 1.0));
  eval->add_option("--iou-ped", ea.iou_ped)->check(CLI::Range(0.0, 1.0));
  eval->add_option("--iou-cyc", ea.iou_cyc)->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--allow-missing", ea.allow_missing, "Treat missing detection files as empty");
  eval->add_option("--out", ea.out, "Report path (.json or .csv)")->required();

  RescoreArgs ra;
  auto* rescore = app.add_subcommand("rescore", "Rewrite detection scores with a confidence scorer");
  rescore->add_option("--det", ra.det)->required()->check(CLI::ExistingDirectory);
  rescore->add_option("--scorer", ra.scorer)->required()->check(CLI::ExistingFile);
  rescore->add_option("--features", ra.features)->required()->check(CLI::ExistingFile);
  rescore->add_option("--mode", ra.mode)->check(CLI::IsMember({"combined", "3d-only"}))->capture_default_str();
  rescore->add_option("--combine", ra.combine)->check(CLI::IsMember({"product", "mean"}))->capture_default_str();
  rescore->add_option("--out", ra.out)->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train-conf", "Train a 3D confidence scorer");
  train->add_option("--records", ta.records)->required()->check(CLI::ExistingFile);
  train->add_option("--mode", ta.mode)->check(CLI::IsMember({"absolute", "relative"}))->capture_default_str();
  train->add_option("--beta", ta.beta)->capture_default_str();
  train->add_option("--epochs", ta.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--lr", ta.lr)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--batch", ta.batch)->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--hidden", ta.hidden, "Comma-separated hidden widths")->capture_default_str();
  train->add_option("--lr-milestones", ta.milestones)->capture_default_str();
  train->add_option("--out", ta.out)->required();

  GeosepArgs ga;
  auto* geosep = app.add_subcommand("geosep", "Geographically separated split");
  geosep->add_option("--candidates", ga.candidates, "Pose CSV or OXTS directory")->required();
  geosep->add_option("--protected", ga.protected_poses, "Pose CSV or OXTS directory")->required();
  geosep->add_option("--radius", ga.radius)->check(CLI::NonNegativeNumber)->capture_default_str();
  geosep->add_flag("--exclude-sequences", ga.exclude_sequences);
  geosep->add_option("--val-size", ga.val_size)->capture_default_str();
  geosep->add_option("--seed", ga.seed)->capture_default_str();
  geosep->add_option("--out-train", ga.out_train)->required();
  geosep->add_option("--out-val", ga.out_val);
  geosep->add_option("--report", ga.report);

  AuditArgs aa;
  auto* audit = app.add_subcommand("audit", "Overlap audit between two splits");
  audit->add_option("--split-a", aa.split_a)->required()->check(CLI::ExistingFile);
  audit->add_option("--split-b", aa.split_b)->required()->check(CLI::ExistingFile);
  audit->add_option("--poses", aa.poses, "Pose CSV or OXTS directory");
  audit->add_option("--report", aa.report)->required();

  OracleArgs oa;
  auto* oracle = app.add_subcommand("oracle", "Oracle substitution analysis");
  oracle->add_option("--gt", oa.gt)->required()->check(CLI::ExistingDirectory);
  oracle->add_option("--det", oa.det)->required()->check(CLI::ExistingDirectory);
  oracle->add_option("--split", oa.split);
  oracle->add_option("--components", oa.components)->capture_default_str();
  oracle->add_option("--match", oa.match)->check(CLI::IsMember({"center", "iou2d", "both"}))->capture_default_str();
  oracle->add_option("--class", oa.class_name)->capture_default_str();
  oracle->add_option("--metric", oa.metric)->check(CLI::IsMember({"3d", "bev"}))->capture_default_str();
  oracle->add_option("--ap", oa.ap)->check(CLI::IsMember({"r40", "r11"}))->capture_default_str();
  oracle->add_option("--center-gate", oa.center_gate)->capture_default_str();
  oracle->add_option("--iou2d-min", oa.iou2d_min)->capture_default_str();
  oracle->add_option("--out", oa.out)->required();

  CalibArgs ca;
  auto* calib = app.add_subcommand("calib", "Binned calibration table");
  calib->add_option("--preds", ca.preds)->required()->check(CLI::ExistingFile);
  calib->add_option("--realized", ca.realized)->required()->check(CLI::ExistingFile);
  calib->add_option("--bins", ca.bins)->check(CLI::PositiveNumber)->capture_default_str();
  calib->add_option("--out", ca.out)->required();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--frames", sa.frames)->capture_default_str();
  synth->add_option("--objects", sa.objects)->capture_default_str();
  synth->add_option("--noise-profile", sa.noise_profile, "JSON noise profile")->check(CLI::ExistingFile);
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--out", sa.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  ea.threads = ga.threads = oa.threads = threads;
  if (*eval) run_eval(ea);
  else if (*rescore) run_rescore(ra);
  else if (*train) run_train(ta);
  else if (*geosep) run_geosep(ga);
  else if (*audit) run_audit(aa);
  else if (*oracle) run_oracle(oa);
  else if (*calib) run_calib(ca);
  else if (*synth) run_synth(sa);
  return 0;
}

}  // namespace
}  // namespace conf3d

int main(int argc, char** argv) {
  try {
    return conf3d::run(argc, argv);
  } catch (const conf3d::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return conf3d::kExitNumerical;
  } catch (const conf3d::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return conf3d::kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad number: " << e.what() << "\n";
    return conf3d::kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
