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

#include <memory>
#include <vector>

#include "odlab/tensor.hpp"

namespace odlab {

/// Update-rule hyperparameters shared by all optimizers. eta is the base
/// learning rate, lambda the delay-compensation coefficient, ms_decay the
/// mean-square EMA factor, epsilon the denominator guard.
struct HyperParams {
  double eta = 0.1;
  double lambda = 0.0;
  double ms_decay = 0.95;
  double momentum = 0.0;
  double weight_decay = 0.0;
  double epsilon = 1e-7;

  HyperParams() = default;
  HyperParams(double eta_, double lambda_, double ms_decay_, double momentum_,
              double weight_decay_, double epsilon_ = 1e-7);

  void validate() const;  // throws ConfigError naming the field
};

/// Velocity accumulator for momentum SGD, zero-initialized.
struct MomentumState {
  ParamStore velocity;

  static MomentumState zeros_like(const ParamStore& params);
};

/// Exponential moving average of squared gradients; elementwise >= 0.
struct MeanSquareState {
  ParamStore ms;

  static MeanSquareState zeros_like(const ParamStore& params);
};

/// One delayed update: gradient g was computed at w_base, and is applied to
/// w_cur which is `delay` global rounds fresher.
struct LocalUpdateContext {
  const ParamStore& w_base;
  ParamStore& w_cur;
  const ParamStore& g;
  int delay = 1;

  void validate() const;
};

/// v <- momentum*v + (g + weight_decay*w);  w <- w - lr*v.  In place.
void sgd_momentum_update(ParamStore& w, const ParamStore& g, const HyperParams& hp,
                         MomentumState& st, double lr);

/// w_cur <- w_cur - lr*(g + lambda * g.g.(w_cur - w_base)), with the gap
/// evaluated at w_cur's pre-update value.
void dcasgd_c_update(const LocalUpdateContext& ctx, const HyperParams& hp, double lr);

/// ms <- ms_decay*ms + (1 - ms_decay)*g.g
void mean_square_step(MeanSquareState& st, const ParamStore& g, const HyperParams& hp);

/// w_cur <- w_cur - lr*(g + (lambda/sqrt(ms+epsilon)) . g.g.(w_cur - w_base)).
/// Call mean_square_step with this gradient first; st is read, not advanced.
void dcasgd_a_update(const LocalUpdateContext& ctx, const HyperParams& hp,
                     const MeanSquareState& st, double lr);

/// Learning-rate schedule. LinearWarmup ramps start -> inner.base over
/// wp_epochs, then defers to the inner schedule at the global epoch.
struct LrSchedule {
  enum class Kind { Constant, StepDecay, LinearWarmup, Polynomial };

  Kind kind = Kind::Constant;
  double base = 0.1;
  std::vector<double> milestones;  // StepDecay, strictly increasing epochs
  double factor = 0.1;             // StepDecay
  double wp_epochs = 0.0;          // LinearWarmup
  std::shared_ptr<const LrSchedule> inner;  // LinearWarmup target schedule
  double power = 1.0;              // Polynomial

  static LrSchedule constant(double base);
  static LrSchedule step_decay(double base, std::vector<double> milestones, double factor);
  static LrSchedule linear_warmup(double start, double wp_epochs, LrSchedule inner);
  static LrSchedule polynomial(double base, double power);

  void validate() const;
};

/// Learning rate at a (real-valued) epoch / iteration position.
double lr_at(const LrSchedule& s, double epoch, std::size_t iter, std::size_t total_iters);

}  // namespace odlab
