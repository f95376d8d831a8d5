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

// Feed-forward 3D-confidence scorer: fully connected layers with rectifier
// hidden activations and one logistic output per class head.
//
// All parameters live in one flat buffer, layer by layer, each layer stored
// as a row-major (out x in) weight matrix followed by its bias vector. The
// optimizer and the JSON format both use this layout directly.

#ifndef CONF3D_SCORER_HPP_
#define CONF3D_SCORER_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace conf3d {

inline constexpr int kScorerFormatVersion = 1;

// Predictions are kept inside [eps, 1 - eps].
inline constexpr double kPredictionEps = 1e-7;

class Scorer {
 public:
  Scorer() = default;

  // He-uniform initialization from `seed`. `hidden` lists the hidden layer
  // widths; the final layer has one output per entry of `class_ids`.
  Scorer(std::size_t input_dim, std::vector<std::size_t> hidden,
         std::vector<int> class_ids, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  const std::vector<int>& class_ids() const { return class_ids_; }
  std::size_t num_heads() const { return class_ids_.size(); }
  std::size_t parameter_count() const { return params_.size(); }

  // Widths as documented for a single head: input, hidden..., 1.
  std::vector<std::size_t> widths() const;

  // Throws InputError for a class id with no head.
  std::size_t head_index(int class_id) const;

  // Input standardization applied before the first layer.
  void set_input_normalization(std::vector<double> mean,
                               std::vector<double> scale);
  const std::vector<double>& input_mean() const { return input_mean_; }
  const std::vector<double>& input_scale() const { return input_scale_; }

  double logit(std::span<const double> features, int class_id) const;
  // Logistic output clamped into [1e-7, 1 - 1e-7].
  double predict(std::span<const double> features, int class_id) const;

  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  // Mean cross-entropy (logit form) of a batch. `inputs` holds one
  // standardized sample per column; heads and targets are per column.
  // When `grad` is non-null it is resized and filled with d(loss)/d(params).
  double batch_loss(const Eigen::MatrixXd& inputs, std::span<const std::size_t> heads,
                    std::span<const double> targets,
                    std::vector<double>* grad) const;

  // Applies the stored normalization to a feature matrix (one column each).
  Eigen::MatrixXd standardize(const Eigen::MatrixXd& raw) const;

  std::string to_json() const;
  static Scorer from_json(const std::string& text);

  // Scorer whose output is `value` (clamped) for every input. Used for
  // pass-through and ablation rescoring.
  static Scorer constant(std::size_t input_dim, std::vector<int> class_ids,
                         double value);

  friend bool operator==(const Scorer&, const Scorer&) = default;

 private:
  struct LayerView {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;

    friend bool operator==(const LayerView&, const LayerView&) = default;
  };

  void build_layout();
  Eigen::VectorXd forward_single(std::span<const double> features) const;

  std::size_t input_dim_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<int> class_ids_;
  std::vector<double> input_mean_;
  std::vector<double> input_scale_;
  std::vector<double> params_;
  std::vector<LayerView> layers_;
};

}  // namespace conf3d

#endif  // CONF3D_SCORER_HPP_
