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

#include "odlab/optim.hpp"

#include <cmath>

namespace odlab {

HyperParams::HyperParams(double eta_, double lambda_, double ms_decay_, double momentum_,
                         double weight_decay_, double epsilon_)
    : eta(eta_),
      lambda(lambda_),
      ms_decay(ms_decay_),
      momentum(momentum_),
      weight_decay(weight_decay_),
      epsilon(epsilon_) {
  validate();
}

void HyperParams::validate() const {
  if (!(eta > 0.0)) throw ConfigError("optim.eta: must be > 0");
  if (!(lambda >= 0.0)) throw ConfigError("optim.lambda: must be >= 0");
  if (!(ms_decay >= 0.0 && ms_decay < 1.0)) throw ConfigError("optim.ms_decay: must be in [0,1)");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum: must be in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("optim.weight_decay: must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("optim.epsilon: must be > 0");
}

MomentumState MomentumState::zeros_like(const ParamStore& params) {
  return MomentumState{params.zeros_like()};
}

MeanSquareState MeanSquareState::zeros_like(const ParamStore& params) {
  return MeanSquareState{params.zeros_like()};
}

void LocalUpdateContext::validate() const {
  w_base.require_compatible(w_cur, "local update (w_base vs w_cur)");
  g.require_compatible(w_cur, "local update (g vs w_cur)");
  if (delay < 1) throw ConfigError("local update: delay must be >= 1");
}

void sgd_momentum_update(ParamStore& w, const ParamStore& g, const HyperParams& hp,
                         MomentumState& st, double lr) {
  g.require_compatible(w, "sgd update");
  st.velocity.require_compatible(w, "sgd update (velocity)");
  if (!(lr > 0.0)) throw ConfigError("sgd update: lr must be > 0");
  for (auto& [key, wt] : w) {
    const auto& gt = g.at(key);
    auto& vt = st.velocity.at(key);
    // v <- mu*v + (g + wd*w)
    vt = axpy(hp.momentum, vt, axpy(hp.weight_decay, wt, gt));
    wt = axpy(-lr, vt, wt);
  }
}

void dcasgd_c_update(const LocalUpdateContext& ctx, const HyperParams& hp, double lr) {
  ctx.validate();
  for (auto& [key, wt] : ctx.w_cur) {
    const auto& gt = ctx.g.at(key);
    const DenseTensor gap = axpy(-1.0, ctx.w_base.at(key), wt);
    const DenseTensor step = axpy(hp.lambda, hadamard(hadamard(gt, gt), gap), gt);
    wt = axpy(-lr, step, wt);
  }
}

void mean_square_step(MeanSquareState& st, const ParamStore& g, const HyperParams& hp) {
  st.ms.require_compatible(g, "mean square step");
  for (auto& [key, ms] : st.ms) {
    const auto& gt = g.at(key);
    const DenseTensor g2 = hadamard(gt, gt);
    for (std::size_t i = 0; i < ms.size(); ++i) {
      ms[i] = hp.ms_decay * ms[i] + (1.0 - hp.ms_decay) * g2[i];
    }
  }
}

void dcasgd_a_update(const LocalUpdateContext& ctx, const HyperParams& hp,
                     const MeanSquareState& st, double lr) {
  ctx.validate();
  st.ms.require_compatible(ctx.w_cur, "dcasgd-a update (mean square)");
  for (auto& [key, wt] : ctx.w_cur) {
    const auto& gt = ctx.g.at(key);
    const auto& ms = st.ms.at(key);
    const DenseTensor gap = axpy(-1.0, ctx.w_base.at(key), wt);
    const DenseTensor g2gap = hadamard(hadamard(gt, gt), gap);
    DenseTensor step = gt;
    for (std::size_t i = 0; i < step.size(); ++i) {
      step[i] += hp.lambda / std::sqrt(ms[i] + hp.epsilon) * g2gap[i];
    }
    wt = axpy(-lr, step, wt);
  }
}

LrSchedule LrSchedule::constant(double base) {
  LrSchedule s;
  s.kind = Kind::Constant;
  s.base = base;
  s.validate();
  return s;
}

LrSchedule LrSchedule::step_decay(double base, std::vector<double> milestones, double factor) {
  LrSchedule s;
  s.kind = Kind::StepDecay;
  s.base = base;
  s.milestones = std::move(milestones);
  s.factor = factor;
  s.validate();
  return s;
}

LrSchedule LrSchedule::linear_warmup(double start, double wp_epochs, LrSchedule inner) {
  LrSchedule s;
  s.kind = Kind::LinearWarmup;
  s.base = start;
  s.wp_epochs = wp_epochs;
  s.inner = std::make_shared<LrSchedule>(std::move(inner));
  s.validate();
  return s;
}

LrSchedule LrSchedule::polynomial(double base, double power) {
  LrSchedule s;
  s.kind = Kind::Polynomial;
  s.base = base;
  s.power = power;
  s.validate();
  return s;
}

void LrSchedule::validate() const {
  if (!(base > 0.0)) throw ConfigError("lr.base: must be > 0");
  if (kind == Kind::StepDecay) {
    for (std::size_t i = 1; i < milestones.size(); ++i) {
      if (!(milestones[i] > milestones[i - 1])) {
        throw ConfigError("lr.milestones: must be strictly increasing");
      }
    }
    if (!(factor > 0.0)) throw ConfigError("lr.factor: must be > 0");
  }
  if (kind == Kind::LinearWarmup) {
    if (!(wp_epochs >= 0.0)) throw ConfigError("lr.wp_epochs: must be >= 0");
    if (!inner) throw ConfigError("lr.inner: warmup needs a target schedule");
    inner->validate();
  }
  if (kind == Kind::Polynomial && !(power > 0.0)) {
    throw ConfigError("lr.power: must be > 0");
  }
}

double lr_at(const LrSchedule& s, double epoch, std::size_t iter, std::size_t total_iters) {
  if (!(epoch >= 0.0)) throw ConfigError("lr_at: epoch must be >= 0");
  switch (s.kind) {
    case LrSchedule::Kind::Constant:
      return s.base;
    case LrSchedule::Kind::StepDecay: {
      double lr = s.base;
      for (double m : s.milestones) {
        if (epoch >= m) lr *= s.factor;
      }
      return lr;
    }
    case LrSchedule::Kind::LinearWarmup: {
      const double target = s.inner->base;
      if (epoch < s.wp_epochs) {
        return s.base + (target - s.base) * (epoch / s.wp_epochs);
      }
      return lr_at(*s.inner, epoch, iter, total_iters);
    }
    case LrSchedule::Kind::Polynomial: {
      if (total_iters == 0 || iter >= total_iters) return 0.0;
      const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(total_iters);
      return s.base * std::pow(frac, s.power);
    }
  }
  throw ConfigError("lr.kind: unknown schedule");
}

}  // namespace odlab
