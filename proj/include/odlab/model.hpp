/* Copyright (c) 2026 The odlab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odlab/tensor.hpp"

namespace odlab {

/// Labeled classification dataset: n rows of d features, labels in [0, k).
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t k = 0;
  std::vector<double> features;  // n x d, row-major
  std::vector<int> labels;       // n entries

  const double* row(std::size_t i) const { return features.data() + i * d; }
};

/// Ordered subset of dataset rows used for one gradient step.
struct Batch {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

enum class ModelKind { SoftmaxRegression, Mlp1 };

/// Softmax regression (W: d x k, b: k) or a one-hidden-layer tanh MLP
/// (W1: d x h, b1: h, W2: h x k, b2: k). Parameter keys are assigned in
/// that order, starting at 0.
struct ModelSpec {
  ModelKind kind = ModelKind::SoftmaxRegression;
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t hidden = 0;  // Mlp1 only

  void validate() const;
};

/// Mean cross-entropy over one batch, plus its exact analytic gradient.
struct LossGrad {
  double loss = 0.0;
  ParamStore grads;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

/// k Gaussian clusters in d dimensions with class-mean distance proportional
/// to `separation`; labels are balanced (round-robin). Deterministic in seed.
Dataset gen_synthetic(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k,
                      double separation);

/// Reads the classic big-endian IDX pair (image magic 2051, label magic
/// 2049). Pixels are scaled to [0,1]; the class count is max(label)+1.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Deterministic parameter initialization, uniform in +-1/sqrt(fan_in).
ParamStore init_params(const ModelSpec& spec, std::uint64_t seed);

/// Mean cross-entropy loss over the batch and its gradient w.r.t. every
/// parameter. Pure: identical inputs give bit-identical outputs.
LossGrad forward_backward(const ModelSpec& spec, const ParamStore& params,
                          const Dataset& data, const Batch& batch);

/// Loss only (shared forward path of forward_backward).
double batch_loss(const ModelSpec& spec, const ParamStore& params, const Dataset& data,
                  const Batch& batch);

/// Central-difference gradient estimate, (L(p+h e) - L(p-h e)) / 2h per
/// coordinate. Verification oracle for forward_backward; uses only the
/// forward loss path.
ParamStore finite_diff_grad(const ModelSpec& spec, const ParamStore& params,
                            const Dataset& data, const Batch& batch, double h);

/// TOP-1 accuracy (argmax ties break toward the lowest class index) and mean
/// loss over the whole dataset.
EvalResult evaluate(const ModelSpec& spec, const ParamStore& params, const Dataset& data);

}  // namespace odlab
