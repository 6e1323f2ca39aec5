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

#include "odlab/tensor.hpp"

#include <cmath>
#include <string>

namespace odlab {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw ShapeError("tensor shape has a zero extent");
    }
    n *= extent;
  }
  return n;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor data length does not match shape product");
  }
  ensure_finite("tensor construction");
}

DenseTensor DenseTensor::of(std::vector<double> values) {
  std::vector<std::size_t> shape{values.size()};
  return DenseTensor(std::move(shape), std::move(values));
}

void DenseTensor::ensure_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value in ") + context);
    }
  }
}

DenseTensor axpy(double alpha, const DenseTensor& x, const DenseTensor& y) {
  if (!x.same_shape(y)) {
    throw ShapeError("axpy: operand shapes differ");
  }
  if (!std::isfinite(alpha)) {
    throw NumericError("axpy: non-finite alpha");
  }
  DenseTensor out = y;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += alpha * x[i];
  }
  out.ensure_finite("axpy result");
  return out;
}

DenseTensor hadamard(const DenseTensor& x, const DenseTensor& y) {
  if (!x.same_shape(y)) {
    throw ShapeError("hadamard: operand shapes differ");
  }
  DenseTensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] *= y[i];
  }
  out.ensure_finite("hadamard result");
  return out;
}

void ParamStore::set(ParamKey key, DenseTensor value) {
  entries_.insert_or_assign(key, std::move(value));
}

const DenseTensor& ParamStore::at(ParamKey key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ShapeError("param store: missing key " + std::to_string(key.id));
  }
  return it->second;
}

DenseTensor& ParamStore::at(ParamKey key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw ShapeError("param store: missing key " + std::to_string(key.id));
  }
  return it->second;
}

bool ParamStore::shape_compatible(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) {
    return false;
  }
  auto it = entries_.begin();
  auto jt = other.entries_.begin();
  for (; it != entries_.end(); ++it, ++jt) {
    if (it->first != jt->first || !it->second.same_shape(jt->second)) {
      return false;
    }
  }
  return true;
}

void ParamStore::require_compatible(const ParamStore& other, const char* context) const {
  if (!shape_compatible(other)) {
    throw ShapeError(std::string(context) + ": stores are not shape-compatible");
  }
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& [key, value] : entries_) {
    out.set(key, DenseTensor(value.shape()));
  }
  return out;
}

void copy_into(const ParamStore& src, ParamStore& dst) {
  if (!dst.empty()) {
    src.require_compatible(dst, "copy_into");
  }
  for (const auto& [key, value] : src) {
    dst.set(key, value);
  }
}

}  // namespace odlab
