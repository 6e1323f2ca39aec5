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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "odlab/errors.hpp"

namespace odlab {

/// Index of a named model parameter. Stable for the lifetime of a run;
/// every tensor exchanged between server and workers is addressed by one.
struct ParamKey {
  std::uint32_t id = 0;

  auto operator<=>(const ParamKey&) const = default;
};

/// Dense row-major tensor of doubles. All elements are kept finite: the
/// constructors and the arithmetic helpers below reject NaN/Inf.
class DenseTensor {
 public:
  DenseTensor() = default;

  /// Zero-filled tensor of the given shape. Extents must be positive.
  explicit DenseTensor(std::vector<std::size_t> shape);

  /// Tensor with explicit contents; data.size() must match the shape.
  DenseTensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// 1-D convenience constructor, used heavily in tests.
  static DenseTensor of(std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

  /// Throws NumericError if any element is NaN/Inf.
  void ensure_finite(const char* context) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// y + alpha * x, elementwise. Inputs are untouched.
DenseTensor axpy(double alpha, const DenseTensor& x, const DenseTensor& y);

/// Elementwise product x * y.
DenseTensor hadamard(const DenseTensor& x, const DenseTensor& y);

/// Keyed collection of dense tensors: model weights, gradients, and the
/// per-worker communication buffers are all ParamStores.
class ParamStore {
 public:
  ParamStore() = default;

  void set(ParamKey key, DenseTensor value);
  const DenseTensor& at(ParamKey key) const;
  DenseTensor& at(ParamKey key);
  bool has(ParamKey key) const { return entries_.count(key) != 0; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  /// Identical key sets with identical per-key shapes.
  bool shape_compatible(const ParamStore& other) const;

  /// Throws ShapeError (message includes context) unless shape_compatible.
  void require_compatible(const ParamStore& other, const char* context) const;

  /// Zero-filled store with the same keys and shapes as this one.
  ParamStore zeros_like() const;

 private:
  std::map<ParamKey, DenseTensor> entries_;
};

/// Deep-copies every tensor of src into dst. An empty dst is populated;
/// a non-empty dst must be shape-compatible and is overwritten.
void copy_into(const ParamStore& src, ParamStore& dst);

}  // namespace odlab
