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
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "odlab/errors.hpp"

namespace odlab {

/// Names one mutable variable tracked by the engine (a communication buffer,
/// a gradient, a device weight copy, ...).
struct VarId {
  std::uint32_t id = 0;

  auto operator<=>(const VarId&) const = default;
};

/// One schedulable operation: which variables it reads and writes, plus a
/// duration consumed by the simulation clock once the op starts. An op that
/// appears in both sets (read-modify-write) is hazard-checked as a write.
struct OpSpec {
  std::string label;
  std::vector<VarId> reads;
  std::vector<VarId> writes;
  double duration = 0.0;
};

/// Handle for a submitted operation; seq is the submission index.
struct Ticket {
  std::uint64_t seq = 0;

  auto operator<=>(const Ticket&) const = default;
};

/// Per-variable hazard scheduler. Every variable keeps a queue of the ops
/// touching it, in submission order. A write may start only when every
/// earlier-submitted op on the variable has completed; a read only when every
/// earlier-submitted WRITE has completed. Independent reads are concurrently
/// ready; ties are reported in submission order.
class DepEngine {
 public:
  Ticket submit(OpSpec op);

  /// Tickets that may start now, ordered by seq.
  std::vector<Ticket> ready() const;

  /// Marks a ready ticket as running. Throws ProtocolError if not ready.
  void start(Ticket t, double at);

  /// Marks a running ticket completed, possibly unblocking successors.
  /// Throws ProtocolError unless the ticket is running.
  void complete(Ticket t, double at);

  bool idle() const { return live_ == 0; }
  std::size_t submitted() const { return nodes_.size(); }
  const OpSpec& spec(Ticket t) const;

  struct TraceEntry {
    Ticket ticket;
    std::string label;
    double start = 0.0;
    double end = 0.0;
  };

  /// Completed ops in completion order.
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  enum class State { Pending, Running, Completed };

  struct Node {
    OpSpec op;
    State state = State::Pending;
    double started_at = 0.0;
  };

  struct VarQueue {
    std::vector<std::uint64_t> seqs;  // submission order
    std::size_t settled = 0;          // prefix of completed entries
  };

  bool is_write(const Node& node, VarId v) const;
  bool can_start(std::uint64_t seq) const;
  void settle(VarQueue& q) const;

  std::vector<Node> nodes_;
  std::map<VarId, VarQueue> queues_;
  std::set<std::uint64_t> pending_;
  std::vector<TraceEntry> trace_;
  std::size_t live_ = 0;  // pending + running
};

}  // namespace odlab
