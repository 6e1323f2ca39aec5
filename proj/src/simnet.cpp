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

#include "odlab/simnet.hpp"

#include <utility>

namespace odlab {

void EventQueue::post(SimTime at, std::function<void()> fn) {
  if (at < now_) {
    throw ProtocolError("event queue: posting into the past");
  }
  heap_.push(Ev{at, next_seq_++, std::move(fn)});
}

SimTime EventQueue::run_until_idle() {
  while (!heap_.empty()) {
    // moving out of the heap top is safe: the entry is popped right after
    Ev ev = std::move(const_cast<Ev&>(heap_.top()));
    heap_.pop();
    now_ = ev.at;
    ++processed_;
    ev.fn();
  }
  return now_;
}

bool TimingModel::homogeneous() const {
  for (double c : t_cop) {
    if (c != t_cop[0]) return false;
  }
  return true;
}

void TimingModel::validate(std::size_t workers) const {
  if (t_cop.empty()) throw ConfigError("timing.t_cop: needs at least one value");
  if (t_cop.size() != 1 && t_cop.size() != workers) {
    throw ConfigError("timing.t_cop: give one value or one per worker");
  }
  for (double c : t_cop) {
    if (!(c >= 0.0)) throw ConfigError("timing.t_cop: must be >= 0");
  }
  if (!(t_com >= 0.0)) throw ConfigError("timing.t_com: must be >= 0");
  if (!(t_com_prime >= 0.0)) throw ConfigError("timing.t_com_prime: must be >= 0");
  if (t_com_prime > t_com) throw ConfigError("timing.t_com_prime: must be <= t_com");
  if (!(local_update_cost >= 0.0)) throw ConfigError("timing.local_update_cost: must be >= 0");
}

double predict_iter_time(const TimingModel& tm) {
  const double t_cop = tm.t_cop_for(0);
  if (tm.t_com <= t_cop) return t_cop;
  return (tm.t_com + t_cop) / 2.0;
}

double imp_rate(const TimingModel& tm) {
  const double t_org = tm.t_cop_for(0) + tm.t_com_prime;
  if (!(t_org > 0.0)) throw ConfigError("imp_rate: t_cop + t_com_prime must be > 0");
  return (t_org - predict_iter_time(tm)) / t_org;
}

double gr_rate(double speed, double speed_baseline) {
  if (!(speed_baseline > 0.0)) throw ConfigError("gr_rate: baseline speed must be > 0");
  return (speed - speed_baseline) / speed_baseline * 100.0;
}

double measure_throughput(std::size_t iterations_per_worker, std::size_t workers,
                          std::size_t batch, SimTime elapsed) {
  if (iterations_per_worker == 0) throw ProtocolError("throughput: empty trace");
  if (!(elapsed > 0.0)) throw ProtocolError("throughput: elapsed time must be > 0");
  return static_cast<double>(iterations_per_worker) * static_cast<double>(workers) *
         static_cast<double>(batch) / elapsed;
}

}  // namespace odlab
