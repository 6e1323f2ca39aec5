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

#include "odlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "odlab/rng.hpp"

namespace odlab {

namespace {

constexpr ParamKey kW{0};
constexpr ParamKey kB{1};
constexpr ParamKey kW2{2};
constexpr ParamKey kB2{3};

void require_batch(const Dataset& data, const Batch& batch) {
  if (batch.indices.empty()) {
    throw ConfigError("batch: empty index list");
  }
  for (std::size_t i : batch.indices) {
    if (i >= data.n) {
      throw ConfigError("batch: index out of range");
    }
  }
}

void require_params(const ModelSpec& spec, const ParamStore& params) {
  spec.validate();
  ParamStore expected;
  expected.set(kW, DenseTensor({spec.d, spec.kind == ModelKind::Mlp1 ? spec.hidden : spec.k}));
  if (spec.kind == ModelKind::Mlp1) {
    expected.set(kB, DenseTensor({spec.hidden}));
    expected.set(kW2, DenseTensor({spec.hidden, spec.k}));
    expected.set(kB2, DenseTensor({spec.k}));
  } else {
    expected.set(kB, DenseTensor({spec.k}));
  }
  params.require_compatible(expected, "model params");
}

// Row logits for one sample; scratch `hid` receives tanh activations for Mlp1.
void row_logits(const ModelSpec& spec, const ParamStore& params, const double* x,
                std::vector<double>& hid, std::vector<double>& z) {
  const std::size_t k = spec.k;
  if (spec.kind == ModelKind::SoftmaxRegression) {
    const auto& w = params.at(kW);
    const auto& b = params.at(kB);
    for (std::size_t j = 0; j < k; ++j) z[j] = b[j];
    for (std::size_t f = 0; f < spec.d; ++f) {
      const double xf = x[f];
      if (xf == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) z[j] += xf * w[f * k + j];
    }
    return;
  }
  const std::size_t h = spec.hidden;
  const auto& w1 = params.at(kW);
  const auto& b1 = params.at(kB);
  const auto& w2 = params.at(kW2);
  const auto& b2 = params.at(kB2);
  for (std::size_t a = 0; a < h; ++a) hid[a] = b1[a];
  for (std::size_t f = 0; f < spec.d; ++f) {
    const double xf = x[f];
    if (xf == 0.0) continue;
    for (std::size_t a = 0; a < h; ++a) hid[a] += xf * w1[f * h + a];
  }
  for (std::size_t a = 0; a < h; ++a) hid[a] = std::tanh(hid[a]);
  for (std::size_t j = 0; j < k; ++j) z[j] = b2[j];
  for (std::size_t a = 0; a < h; ++a) {
    const double ha = hid[a];
    for (std::size_t j = 0; j < k; ++j) z[j] += ha * w2[a * k + j];
  }
}

// Converts logits to probabilities in place and returns the sample loss.
double softmax_loss_inplace(std::vector<double>& z, int label) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  const double loss = std::log(sum) - std::log(z[static_cast<std::size_t>(label)]);
  for (double& v : z) v /= sum;
  return loss;
}

}  // namespace

void ModelSpec::validate() const {
  if (d == 0 || k < 2) {
    throw ConfigError("model: requires d >= 1 and k >= 2");
  }
  if (kind == ModelKind::Mlp1 && hidden == 0) {
    throw ConfigError("model.hidden: must be positive for mlp1");
  }
}

Dataset gen_synthetic(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k,
                      double separation) {
  if (k < 2) throw ConfigError("data.k: need at least 2 classes");
  if (n < k) throw ConfigError("data.n: need at least one sample per class");
  if (d == 0) throw ConfigError("data.d: need at least one feature");
  if (!(separation >= 0.0)) throw ConfigError("data.separation: must be >= 0");

  Rng rng(mix_seed(seed, 0x5d47a));
  std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < k; ++c) {
    double norm2 = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
      means[c][f] = rng.normal();
      norm2 += means[c][f] * means[c][f];
    }
    double norm = std::sqrt(norm2);
    if (norm < 1e-9) {
      means[c][0] = 1.0;
      norm = 1.0;
    }
    for (std::size_t f = 0; f < d; ++f) means[c][f] *= separation / norm;
  }

  Dataset out;
  out.n = n;
  out.d = d;
  out.k = k;
  out.features.resize(n * d);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    out.labels[i] = static_cast<int>(c);
    for (std::size_t f = 0; f < d; ++f) {
      out.features[i * d + f] = means[c][f] + rng.normal();
    }
  }
  return out;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (in.gcount() != 4) {
    throw IoError("idx: truncated header in " + path);
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("idx: cannot open " + images_path);
  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 2051) {
    throw FormatError("idx: bad image magic " + std::to_string(img_magic) + " in " + images_path);
  }
  const std::uint32_t n = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("idx: cannot open " + labels_path);
  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 2049) {
    throw FormatError("idx: bad label magic " + std::to_string(lab_magic) + " in " + labels_path);
  }
  const std::uint32_t n_labels = read_be32(lab, labels_path);
  if (n != n_labels) {
    throw FormatError("idx: image count " + std::to_string(n) + " != label count " +
                      std::to_string(n_labels));
  }
  if (n == 0) throw FormatError("idx: empty dataset");

  const std::size_t d = std::size_t(rows) * std::size_t(cols);
  std::vector<unsigned char> pixels(std::size_t(n) * d);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (static_cast<std::size_t>(img.gcount()) != pixels.size()) {
    throw IoError("idx: truncated image payload in " + images_path);
  }
  std::vector<unsigned char> raw_labels(n);
  lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(lab.gcount()) != n) {
    throw IoError("idx: truncated label payload in " + labels_path);
  }

  Dataset out;
  out.n = n;
  out.d = d;
  out.features.resize(out.n * d);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    out.features[i] = pixels[i] / 255.0;
  }
  out.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = raw_labels[i];
    max_label = std::max(max_label, out.labels[i]);
  }
  out.k = static_cast<std::size_t>(max_label) + 1;
  if (out.k < 2) out.k = 2;
  return out;
}

ParamStore init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x1317));
  ParamStore params;
  auto weight = [&](std::size_t in, std::size_t outn) {
    DenseTensor t({in, outn});
    const double r = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-r, r);
    return t;
  };
  if (spec.kind == ModelKind::SoftmaxRegression) {
    params.set(kW, weight(spec.d, spec.k));
    params.set(kB, DenseTensor({spec.k}));
  } else {
    params.set(kW, weight(spec.d, spec.hidden));
    params.set(kB, DenseTensor({spec.hidden}));
    params.set(kW2, weight(spec.hidden, spec.k));
    params.set(kB2, DenseTensor({spec.k}));
  }
  return params;
}

LossGrad forward_backward(const ModelSpec& spec, const ParamStore& params, const Dataset& data,
                          const Batch& batch) {
  require_params(spec, params);
  require_batch(data, batch);
  if (data.d != spec.d || data.k > spec.k) {
    throw ShapeError("forward_backward: dataset dims do not match model");
  }

  const std::size_t k = spec.k;
  const std::size_t bsz = batch.size();
  const double inv_b = 1.0 / static_cast<double>(bsz);

  LossGrad out;
  out.grads = params.zeros_like();
  std::vector<double> z(k), hid(spec.kind == ModelKind::Mlp1 ? spec.hidden : 0);

  double loss = 0.0;
  if (spec.kind == ModelKind::SoftmaxRegression) {
    auto& dw = out.grads.at(kW);
    auto& db = out.grads.at(kB);
    for (std::size_t bi = 0; bi < bsz; ++bi) {
      const std::size_t i = batch.indices[bi];
      const double* x = data.row(i);
      row_logits(spec, params, x, hid, z);
      loss += softmax_loss_inplace(z, data.labels[i]);
      for (std::size_t j = 0; j < k; ++j) {
        double dz = z[j];
        if (j == static_cast<std::size_t>(data.labels[i])) dz -= 1.0;
        dz *= inv_b;
        db[j] += dz;
        for (std::size_t f = 0; f < spec.d; ++f) {
          dw[f * k + j] += x[f] * dz;
        }
      }
    }
  } else {
    const std::size_t h = spec.hidden;
    const auto& w2 = params.at(kW2);
    auto& dw1 = out.grads.at(kW);
    auto& db1 = out.grads.at(kB);
    auto& dw2 = out.grads.at(kW2);
    auto& db2 = out.grads.at(kB2);
    std::vector<double> dz(k), da(h);
    for (std::size_t bi = 0; bi < bsz; ++bi) {
      const std::size_t i = batch.indices[bi];
      const double* x = data.row(i);
      row_logits(spec, params, x, hid, z);
      loss += softmax_loss_inplace(z, data.labels[i]);
      for (std::size_t j = 0; j < k; ++j) {
        dz[j] = z[j];
        if (j == static_cast<std::size_t>(data.labels[i])) dz[j] -= 1.0;
        dz[j] *= inv_b;
        db2[j] += dz[j];
      }
      for (std::size_t a = 0; a < h; ++a) {
        double dh = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          dw2[a * k + j] += hid[a] * dz[j];
          dh += dz[j] * w2[a * k + j];
        }
        da[a] = dh * (1.0 - hid[a] * hid[a]);
        db1[a] += da[a];
      }
      for (std::size_t f = 0; f < spec.d; ++f) {
        const double xf = x[f];
        if (xf == 0.0) continue;
        for (std::size_t a = 0; a < h; ++a) {
          dw1[f * h + a] += xf * da[a];
        }
      }
    }
  }
  out.loss = loss * inv_b;
  return out;
}

double batch_loss(const ModelSpec& spec, const ParamStore& params, const Dataset& data,
                  const Batch& batch) {
  require_params(spec, params);
  require_batch(data, batch);
  std::vector<double> z(spec.k), hid(spec.kind == ModelKind::Mlp1 ? spec.hidden : 0);
  double loss = 0.0;
  for (std::size_t i : batch.indices) {
    row_logits(spec, params, data.row(i), hid, z);
    loss += softmax_loss_inplace(z, data.labels[i]);
  }
  return loss / static_cast<double>(batch.size());
}

ParamStore finite_diff_grad(const ModelSpec& spec, const ParamStore& params, const Dataset& data,
                            const Batch& batch, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: h must be positive");
  ParamStore probe;
  copy_into(params, probe);
  ParamStore grads = params.zeros_like();
  for (auto& [key, tensor] : probe) {
    auto& out = grads.at(key);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double original = tensor[i];
      tensor[i] = original + h;
      const double up = batch_loss(spec, probe, data, batch);
      tensor[i] = original - h;
      const double down = batch_loss(spec, probe, data, batch);
      tensor[i] = original;
      out[i] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

EvalResult evaluate(const ModelSpec& spec, const ParamStore& params, const Dataset& data) {
  require_params(spec, params);
  std::vector<double> z(spec.k), hid(spec.kind == ModelKind::Mlp1 ? spec.hidden : 0);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    row_logits(spec, params, data.row(i), hid, z);
    std::size_t best = 0;
    for (std::size_t j = 1; j < spec.k; ++j) {
      if (z[j] > z[best]) best = j;  // ties keep the lowest index
    }
    loss += softmax_loss_inplace(z, data.labels[i]);
    if (best == static_cast<std::size_t>(data.labels[i])) ++correct;
  }
  EvalResult out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(data.n);
  out.mean_loss = loss / static_cast<double>(data.n);
  return out;
}

}  // namespace odlab
