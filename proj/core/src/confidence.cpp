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

#include "conf3d/confidence.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "conf3d/errors.hpp"

namespace conf3d {
namespace {

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

// For each position, a uniformly drawn distinct partner position with the
// same class id, or npos for class singletons.
constexpr std::size_t kNoPartner = static_cast<std::size_t>(-1);

template <typename ClassOf>
std::vector<std::size_t> draw_partners(std::size_t n, ClassOf&& class_of,
                                       std::mt19937_64& rng) {
  std::map<int, std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = groups[class_of(i)];
    slot[i] = g.size();
    g.push_back(i);
  }
  std::vector<std::size_t> partner(n, kNoPartner);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = groups[class_of(i)];
    if (g.size() < 2) continue;
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 2);
    std::size_t u = pick(rng);
    if (u >= slot[i]) ++u;
    partner[i] = g[u];
  }
  return partner;
}

std::string fmt_g17(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto col = line.substr(start, comma - start);
    while (!col.empty() && (col.back() == ' ' || col.back() == '\r')) col.remove_suffix(1);
    while (!col.empty() && col.front() == ' ') col.remove_prefix(1);
    cols.push_back(col);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cols;
}

double csv_double(std::size_t line, std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError(line, "bad number '" + std::string(s) + "'");
  }
  return v;
}

long long csv_int(std::size_t line, std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(line, "bad integer '" + std::string(s) + "'");
  }
  return v;
}

// Calls fn(line_no, cols) for non-empty lines that are not the header.
template <typename Fn>
void for_each_csv_row(std::string_view text, std::string_view header_first, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    const auto cols = split_csv(line);
    if (cols.size() == 1 && cols[0].empty()) continue;
    if (line_no == 1 && cols[0] == header_first) continue;
    fn(line_no, cols);
  }
}

}  // namespace

std::string_view to_string(TargetMode mode) {
  return mode == TargetMode::kAbsolute ? "absolute" : "relative";
}

TargetMode parse_target_mode(std::string_view text) {
  if (text == "absolute") return TargetMode::kAbsolute;
  if (text == "relative") return TargetMode::kRelative;
  throw ConfigError("unknown confidence mode '" + std::string(text) + "'");
}

void ConfidenceTargetConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ConfigError("temperature beta must be positive");
  }
  if (!(loss_weight >= 0.0) || !std::isfinite(loss_weight)) {
    throw ConfigError("loss weight must be non-negative");
  }
}

double absolute_target(double loss, double beta) {
  if (!(beta > 0.0)) throw ConfigError("temperature beta must be positive");
  if (!(loss >= 0.0)) throw InputError("box loss must be non-negative");
  return std::exp(-loss / beta);
}

double relative_target_exact(std::span<const double> losses, std::size_t i) {
  if (losses.size() < 2) {
    throw InputError("relative target needs at least two losses");
  }
  if (i >= losses.size()) throw InputError("relative target index out of range");
  std::size_t count = 0;
  for (std::size_t j = 0; j < losses.size(); ++j) {
    if (j != i && losses[j] >= losses[i]) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(losses.size() - 1);
}

PairSample sample_pair_targets(std::span<const TrainRecord> batch,
                               std::mt19937_64& rng) {
  const auto partners = draw_partners(
      batch.size(), [&](std::size_t i) { return batch[i].class_id; }, rng);
  PairSample out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (partners[i] == kNoPartner) {
      ++out.singletons;
      continue;
    }
    out.pairs.push_back(
        {i, partners[i], pair_target(batch[i].loss, batch[partners[i]].loss)});
  }
  return out;
}

BceValue bce_loss(double pred, double target) {
  const double c = std::clamp(pred, kPredictionEps, 1.0 - kPredictionEps);
  BceValue v;
  v.loss = -target * std::log(c) - (1.0 - target) * std::log(1.0 - c);
  v.grad = (c - target) / (c * (1.0 - c));
  return v;
}

double box_loss(const Box3D& pred, const Box3D& gt) {
  return smooth_l1(pred.center.x - gt.center.x) +
         smooth_l1(pred.center.y - gt.center.y) +
         smooth_l1(pred.center.z - gt.center.z) +
         smooth_l1(pred.shape.h - gt.shape.h) +
         smooth_l1(pred.shape.w - gt.shape.w) +
         smooth_l1(pred.shape.l - gt.shape.l) +
         smooth_l1(wrap_angle(pred.yaw - gt.yaw));
}

Scorer train_scorer(std::span<const TrainRecord> records,
                    const ConfidenceTargetConfig& config,
                    const TrainOptions& opts, TrainReport* report) {
  config.validate();
  if (records.size() < 2) throw InputError("training needs at least two records");
  if (opts.batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (opts.epochs < 1) throw ConfigError("epochs must be positive");
  if (!(opts.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");

  const std::size_t dim = records.front().features.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].features.size() != dim) {
      throw InputError("record " + std::to_string(i) + " has " +
                       std::to_string(records[i].features.size()) +
                       " features, expected " + std::to_string(dim));
    }
    if (!(records[i].loss >= 0.0) || !std::isfinite(records[i].loss)) {
      throw InputError("record " + std::to_string(i) + " has an invalid loss");
    }
  }

  std::vector<int> class_ids;
  for (const auto& r : records) class_ids.push_back(r.class_id);
  std::sort(class_ids.begin(), class_ids.end());
  class_ids.erase(std::unique(class_ids.begin(), class_ids.end()), class_ids.end());

  Scorer scorer(dim, opts.hidden, class_ids, opts.seed);

  const auto n = static_cast<Eigen::Index>(records.size());
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(dim), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& f = records[static_cast<std::size_t>(c)].features;
    raw.col(c) = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(dim));
  }
  if (opts.standardize_inputs) {
    std::vector<double> mean(dim), scale(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const auto row = raw.row(static_cast<Eigen::Index>(k));
      mean[k] = row.mean();
      const double var = (row.array() - mean[k]).square().mean();
      scale[k] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    scorer.set_input_normalization(std::move(mean), std::move(scale));
  }
  const Eigen::MatrixXd inputs = scorer.standardize(raw);

  std::vector<std::size_t> head_of(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    head_of[i] = scorer.head_index(records[i].class_id);
  }
  std::vector<double> abs_target;
  if (config.mode == TargetMode::kAbsolute) {
    for (const auto& r : records) abs_target.push_back(absolute_target(r.loss, config.beta));
  }

  // Separate stream from weight initialization.
  std::mt19937_64 rng(opts.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t np = scorer.parameter_count();
  std::vector<double> m(np, 0.0), v(np, 0.0), grad;
  long long step = 0;
  TrainReport local;

  std::vector<std::size_t> batch_idx, cols, heads;
  std::vector<double> targets;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double lr = opts.learning_rate;
    for (int milestone : opts.lr_milestones) {
      if (epoch >= milestone) lr *= opts.lr_decay;
    }
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_sum = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
      cols.clear();
      heads.clear();
      targets.clear();
      if (config.mode == TargetMode::kAbsolute) {
        for (std::size_t r : batch_idx) {
          cols.push_back(r);
          heads.push_back(head_of[r]);
          targets.push_back(abs_target[r]);
        }
      } else {
        const auto partners = draw_partners(
            batch_idx.size(),
            [&](std::size_t i) { return records[batch_idx[i]].class_id; }, rng);
        for (std::size_t i = 0; i < batch_idx.size(); ++i) {
          if (partners[i] == kNoPartner) {
            ++local.skipped_singletons;
            continue;
          }
          const std::size_t r = batch_idx[i];
          cols.push_back(r);
          heads.push_back(head_of[r]);
          targets.push_back(
              pair_target(records[r].loss, records[batch_idx[partners[i]]].loss));
        }
      }
      if (cols.empty()) continue;

      Eigen::MatrixXd xb(inputs.rows(), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) {
        xb.col(static_cast<Eigen::Index>(c)) = inputs.col(static_cast<Eigen::Index>(cols[c]));
      }
      const double loss = config.loss_weight * scorer.batch_loss(xb, heads, targets, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite confidence loss at epoch " +
                             std::to_string(epoch) + "; try a smaller learning rate than " +
                             std::to_string(lr));
      }
      epoch_sum += loss * static_cast<double>(cols.size());
      epoch_count += cols.size();

      ++step;
      const double bc1 = 1.0 - std::pow(opts.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(opts.adam_beta2, static_cast<double>(step));
      auto params = scorer.mutable_parameters();
      for (std::size_t k = 0; k < np; ++k) {
        const double g = config.loss_weight * grad[k];
        m[k] = opts.adam_beta1 * m[k] + (1.0 - opts.adam_beta1) * g;
        v[k] = opts.adam_beta2 * v[k] + (1.0 - opts.adam_beta2) * g * g;
        params[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opts.adam_eps);
      }
      if (!std::all_of(params.begin(), params.end(),
                       [](double p) { return std::isfinite(p); })) {
        throw NumericalError("non-finite scorer parameters at epoch " +
                             std::to_string(epoch) + "; try a smaller learning rate than " +
                             std::to_string(lr));
      }
    }
    local.epoch_loss.push_back(epoch_count ? epoch_sum / static_cast<double>(epoch_count) : 0.0);
  }
  if (report) *report = std::move(local);
  return scorer;
}

std::vector<CalibrationBin> calibration_bins(std::span<const double> preds,
                                             std::span<const double> realized,
                                             std::size_t n_bins) {
  if (n_bins < 1) throw ConfigError("calibration needs at least one bin");
  if (preds.size() != realized.size()) {
    throw InputError("calibration inputs differ in length");
  }
  std::vector<double> sum_pred(n_bins, 0.0), sum_real(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  const double nb = static_cast<double>(n_bins);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double r = realized[i];
    const double pos = std::floor(std::clamp(r, 0.0, 1.0) * nb);
    const auto b = std::min(n_bins - 1, static_cast<std::size_t>(pos));
    sum_pred[b] += preds[i];
    sum_real[b] += r;
    ++count[b];
  }
  std::vector<CalibrationBin> out;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    const double c = static_cast<double>(count[b]);
    out.push_back({(static_cast<double>(b) + 0.5) / nb, sum_pred[b] / c,
                   sum_real[b] / c, count[b]});
  }
  return out;
}

std::string calibration_csv(std::span<const CalibrationBin> bins) {
  std::string out = "bin_center,mean_pred,mean_realized,count\n";
  for (const auto& b : bins) {
    out += format_fixed6(b.bin_center) + "," + format_fixed6(b.mean_pred) + "," +
           format_fixed6(b.mean_realized) + "," + std::to_string(b.count) + "\n";
  }
  return out;
}

std::vector<TrainRecord> parse_train_records_csv(std::string_view text) {
  std::vector<TrainRecord> out;
  for_each_csv_row(text, "class_id", [&](std::size_t line, const auto& cols) {
    if (cols.size() < 3) throw ParseError(line, "need class_id, loss and features");
    TrainRecord r;
    r.class_id = static_cast<int>(csv_int(line, cols[0]));
    r.loss = csv_double(line, cols[1]);
    if (r.loss < 0.0) throw ParseError(line, "negative loss");
    for (std::size_t k = 2; k < cols.size(); ++k) r.features.push_back(csv_double(line, cols[k]));
    if (!out.empty() && out.front().features.size() != r.features.size()) {
      throw ParseError(line, "feature count differs from the first record");
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::string write_train_records_csv(std::span<const TrainRecord> records) {
  const std::size_t dim = records.empty() ? 0 : records.front().features.size();
  std::string out = "class_id,loss";
  for (std::size_t k = 0; k < dim; ++k) out += ",feat_" + std::to_string(k);
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.class_id) + "," + fmt_g17(r.loss);
    for (double f : r.features) out += "," + fmt_g17(f);
    out += '\n';
  }
  return out;
}

std::vector<DetectionFeatures> parse_detection_features_csv(std::string_view text) {
  std::vector<DetectionFeatures> out;
  for_each_csv_row(text, "frame_id", [&](std::size_t line, const auto& cols) {
    if (cols.size() < 4) throw ParseError(line, "need frame_id, det_index, class_id and features");
    DetectionFeatures r;
    r.frame_id = std::string(cols[0]);
    if (!is_valid_frame_id(r.frame_id)) throw ParseError(line, "invalid frame id");
    const auto idx = csv_int(line, cols[1]);
    if (idx < 0) throw ParseError(line, "negative detection index");
    r.det_index = static_cast<std::size_t>(idx);
    r.class_id = static_cast<int>(csv_int(line, cols[2]));
    for (std::size_t k = 3; k < cols.size(); ++k) r.features.push_back(csv_double(line, cols[k]));
    out.push_back(std::move(r));
  });
  return out;
}

std::string write_detection_features_csv(std::span<const DetectionFeatures> rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().features.size();
  std::string out = "frame_id,det_index,class_id";
  for (std::size_t k = 0; k < dim; ++k) out += ",feat_" + std::to_string(k);
  out += '\n';
  for (const auto& r : rows) {
    out += r.frame_id + "," + std::to_string(r.det_index) + "," + std::to_string(r.class_id);
    for (double f : r.features) out += "," + fmt_g17(f);
    out += '\n';
  }
  return out;
}

void rescore_detections(std::span<Detection> dets, const Scorer& scorer) {
  for (std::size_t i = 0; i < dets.size(); ++i) {
    auto& d = dets[i];
    if (d.features.empty()) {
      throw InputError("detection " + std::to_string(i) + " has no features");
    }
    d.score3d = scorer.predict(d.features, class_id_for(d.class_name));
  }
}

}  // namespace conf3d
