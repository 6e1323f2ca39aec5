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
#include <functional>
#include <queue>
#include <vector>

#include "odlab/errors.hpp"

namespace odlab {

using SimTime = double;

/// Deterministic discrete-event clock. Events run in (time, posting order);
/// posting into the past is a protocol violation.
class EventQueue {
 public:
  void post(SimTime at, std::function<void()> fn);
  void post_after(SimTime delay, std::function<void()> fn) { post(now_ + delay, std::move(fn)); }

  /// Runs every event; returns the clock after the last one.
  SimTime run_until_idle();

  SimTime now() const { return now_; }
  bool idle() const { return heap_.empty(); }
  std::uint64_t processed() const { return processed_; }

 private:
  struct Ev {
    SimTime at;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Ev, std::vector<Ev>, Later> heap_;
  SimTime now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
};

/// Per-iteration cost model. t_cop may vary per worker to model uneven
/// compute capacity; t_com is the one-step-delay round-trip cost, and
/// t_com_prime the synchronous (non-overlapped) one. local_update_cost is
/// the worker-side compensation step.
struct TimingModel {
  std::vector<double> t_cop{1.0};  // one entry, or one per worker
  double t_com = 0.0;
  double t_com_prime = 0.0;
  double local_update_cost = 0.0;

  double t_cop_for(std::size_t worker) const {
    return t_cop.size() == 1 ? t_cop[0] : t_cop.at(worker);
  }
  bool homogeneous() const;
  void validate(std::size_t workers) const;
};

/// Predicted steady-state cost of one overlapped iteration:
/// t_cop when t_com <= t_cop, otherwise (t_com + t_cop) / 2.
double predict_iter_time(const TimingModel& tm);

/// (T_org - T_new) / T_org with T_org = t_cop + t_com_prime. In [0, 0.5).
double imp_rate(const TimingModel& tm);

/// Throughput growth of a run against the synchronous baseline, in percent.
double gr_rate(double speed, double speed_baseline);

/// samples/s over a completed run: workers * batch * iterations / elapsed.
double measure_throughput(std::size_t iterations_per_worker, std::size_t workers,
                          std::size_t batch, SimTime elapsed);

}  // namespace odlab
