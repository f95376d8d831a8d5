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

#include "conf3d/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "conf3d/errors.hpp"

namespace conf3d {
namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Cross-entropy of sigmoid(z) against t, written on the logit.
double bce_with_logit(double z, double t) {
  return std::max(z, 0.0) - t * z + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Scorer::Scorer(std::size_t input_dim, std::vector<std::size_t> hidden,
               std::vector<int> class_ids, std::uint64_t seed)
    : input_dim_(input_dim), hidden_(std::move(hidden)), class_ids_(std::move(class_ids)) {
  if (input_dim_ == 0) throw ConfigError("scorer input dimension must be positive");
  if (class_ids_.empty()) throw ConfigError("scorer needs at least one class head");
  if (std::any_of(hidden_.begin(), hidden_.end(), [](std::size_t w) { return w == 0; })) {
    throw ConfigError("hidden layer widths must be positive");
  }
  auto sorted = class_ids_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("duplicate class ids in scorer heads");
  }
  build_layout();

  std::mt19937_64 rng(seed);
  for (const auto& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
      params_[layer.weight_offset + i] = dist(rng);
    }
  }
}

void Scorer::build_layout() {
  layers_.clear();
  std::size_t offset = 0;
  std::size_t in = input_dim_;
  auto add = [&](std::size_t out) {
    LayerView v{in, out, offset, offset + in * out};
    offset = v.bias_offset + out;
    layers_.push_back(v);
    in = out;
  };
  for (std::size_t w : hidden_) add(w);
  add(class_ids_.size());
  params_.assign(offset, 0.0);
}

std::vector<std::size_t> Scorer::widths() const {
  std::vector<std::size_t> w{input_dim_};
  w.insert(w.end(), hidden_.begin(), hidden_.end());
  w.push_back(1);
  return w;
}

std::size_t Scorer::head_index(int class_id) const {
  for (std::size_t i = 0; i < class_ids_.size(); ++i) {
    if (class_ids_[i] == class_id) return i;
  }
  throw InputError("scorer has no head for class id " + std::to_string(class_id));
}

void Scorer::set_input_normalization(std::vector<double> mean,
                                     std::vector<double> scale) {
  if (mean.size() != input_dim_ || scale.size() != input_dim_) {
    throw ConfigError("normalization vectors must match the input dimension");
  }
  if (std::any_of(scale.begin(), scale.end(), [](double s) { return !(s > 0.0); })) {
    throw ConfigError("normalization scales must be positive");
  }
  input_mean_ = std::move(mean);
  input_scale_ = std::move(scale);
}

Eigen::MatrixXd Scorer::standardize(const Eigen::MatrixXd& raw) const {
  if (static_cast<std::size_t>(raw.rows()) != input_dim_) {
    throw InputError("feature length " + std::to_string(raw.rows()) +
                     " does not match scorer input " + std::to_string(input_dim_));
  }
  if (input_mean_.empty()) return raw;
  const Eigen::Map<const Eigen::VectorXd> mean(input_mean_.data(), input_dim_);
  const Eigen::Map<const Eigen::VectorXd> scale(input_scale_.data(), input_dim_);
  Eigen::MatrixXd out = raw.colwise() - mean;
  out.array().colwise() /= scale.array();
  return out;
}

Eigen::VectorXd Scorer::forward_single(std::span<const double> features) const {
  if (features.size() != input_dim_) {
    throw InputError("feature length " + std::to_string(features.size()) +
                     " does not match scorer input " + std::to_string(input_dim_));
  }
  Eigen::MatrixXd x =
      Eigen::Map<const Eigen::VectorXd>(features.data(), features.size());
  Eigen::VectorXd a = standardize(x);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const Eigen::Map<const RowMajorMatrix> w(params_.data() + l.weight_offset, l.out, l.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + l.bias_offset, l.out);
    Eigen::VectorXd z = w * a + b;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

double Scorer::logit(std::span<const double> features, int class_id) const {
  const std::size_t head = head_index(class_id);
  return forward_single(features)(static_cast<Eigen::Index>(head));
}

double Scorer::predict(std::span<const double> features, int class_id) const {
  return std::clamp(sigmoid(logit(features, class_id)), kPredictionEps,
                    1.0 - kPredictionEps);
}

double Scorer::batch_loss(const Eigen::MatrixXd& inputs,
                          std::span<const std::size_t> heads,
                          std::span<const double> targets,
                          std::vector<double>* grad) const {
  const auto batch = static_cast<std::size_t>(inputs.cols());
  if (heads.size() != batch || targets.size() != batch) {
    throw InputError("batch_loss: heads/targets must match the batch size");
  }
  if (batch == 0) {
    if (grad) grad->assign(params_.size(), 0.0);
    return 0.0;
  }

  // Pre-activations per layer; activations are their rectified values.
  std::vector<Eigen::MatrixXd> pre(layers_.size());
  const Eigen::MatrixXd* a = &inputs;
  std::vector<Eigen::MatrixXd> act(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const Eigen::Map<const RowMajorMatrix> w(params_.data() + l.weight_offset, l.out, l.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + l.bias_offset, l.out);
    pre[i] = (w * *a).colwise() + b;
    if (i + 1 < layers_.size()) {
      act[i] = pre[i].cwiseMax(0.0);
      a = &act[i];
    }
  }

  const Eigen::MatrixXd& logits = pre.back();
  const double inv_n = 1.0 / static_cast<double>(batch);
  double loss = 0.0;
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  for (std::size_t c = 0; c < batch; ++c) {
    const auto row = static_cast<Eigen::Index>(heads[c]);
    const auto col = static_cast<Eigen::Index>(c);
    const double z = logits(row, col);
    loss += bce_with_logit(z, targets[c]);
    delta(row, col) = (sigmoid(z) - targets[c]) * inv_n;
  }
  loss *= inv_n;
  if (!grad) return loss;

  grad->assign(params_.size(), 0.0);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& l = layers_[i];
    const Eigen::MatrixXd& below = i == 0 ? inputs : act[i - 1];
    Eigen::Map<RowMajorMatrix> gw(grad->data() + l.weight_offset, l.out, l.in);
    Eigen::Map<Eigen::VectorXd> gb(grad->data() + l.bias_offset, l.out);
    gw.noalias() = delta * below.transpose();
    gb = delta.rowwise().sum();
    if (i == 0) break;
    const Eigen::Map<const RowMajorMatrix> w(params_.data() + l.weight_offset, l.out, l.in);
    Eigen::MatrixXd back = w.transpose() * delta;
    delta = back.cwiseProduct((pre[i - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

std::string Scorer::to_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "conf3d-scorer";
  doc["version"] = kScorerFormatVersion;
  doc["widths"] = widths();
  doc["class_ids"] = class_ids_;
  doc["input_mean"] = input_mean_;
  doc["input_scale"] = input_scale_;
  auto& layers = doc["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : layers_) {
    nlohmann::ordered_json j;
    j["in"] = l.in;
    j["out"] = l.out;
    j["weights"] = std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(l.weight_offset),
                                       params_.begin() + static_cast<std::ptrdiff_t>(l.bias_offset));
    j["bias"] = std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(l.bias_offset),
                                    params_.begin() + static_cast<std::ptrdiff_t>(l.bias_offset + l.out));
    layers.push_back(std::move(j));
  }
  return doc.dump(1) + "\n";
}

Scorer Scorer::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scorer JSON: ") + e.what());
  }
  try {
    if (doc.value("format", "") != "conf3d-scorer") {
      throw InputError("scorer JSON: missing format tag 'conf3d-scorer'");
    }
    if (doc.at("version").get<int>() != kScorerFormatVersion) {
      throw InputError("scorer JSON: unsupported version");
    }
    const auto widths = doc.at("widths").get<std::vector<std::size_t>>();
    if (widths.size() < 2 || widths.back() != 1) {
      throw InputError("scorer JSON: widths must end with 1");
    }
    Scorer s;
    s.input_dim_ = widths.front();
    s.hidden_.assign(widths.begin() + 1, widths.end() - 1);
    s.class_ids_ = doc.at("class_ids").get<std::vector<int>>();
    if (s.input_dim_ == 0 || s.class_ids_.empty()) {
      throw InputError("scorer JSON: empty input or heads");
    }
    s.build_layout();
    const auto mean = doc.value("input_mean", std::vector<double>{});
    const auto scale = doc.value("input_scale", std::vector<double>{});
    if (!mean.empty() || !scale.empty()) s.set_input_normalization(mean, scale);

    const auto& layers = doc.at("layers");
    if (layers.size() != s.layers_.size()) {
      throw InputError("scorer JSON: layer count does not match widths");
    }
    for (std::size_t i = 0; i < s.layers_.size(); ++i) {
      const auto& l = s.layers_[i];
      const auto w = layers[i].at("weights").get<std::vector<double>>();
      const auto b = layers[i].at("bias").get<std::vector<double>>();
      if (layers[i].at("in").get<std::size_t>() != l.in ||
          layers[i].at("out").get<std::size_t>() != l.out ||
          w.size() != l.in * l.out || b.size() != l.out) {
        throw InputError("scorer JSON: layer " + std::to_string(i) + " has wrong shape");
      }
      std::copy(w.begin(), w.end(), s.params_.begin() + static_cast<std::ptrdiff_t>(l.weight_offset));
      std::copy(b.begin(), b.end(), s.params_.begin() + static_cast<std::ptrdiff_t>(l.bias_offset));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scorer JSON: ") + e.what());
  }
}

Scorer Scorer::constant(std::size_t input_dim, std::vector<int> class_ids,
                        double value) {
  Scorer s(input_dim, {}, std::move(class_ids), 0);
  std::fill(s.params_.begin(), s.params_.end(), 0.0);
  const double p = std::clamp(value, kPredictionEps, 1.0 - kPredictionEps);
  const auto& l = s.layers_.back();
  std::fill_n(s.params_.begin() + static_cast<std::ptrdiff_t>(l.bias_offset), l.out,
              std::log(p / (1.0 - p)));
  return s;
}

}  // namespace conf3d
