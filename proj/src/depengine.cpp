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

#include "odlab/depengine.hpp"

#include <algorithm>

namespace odlab {

Ticket DepEngine::submit(OpSpec op) {
  const std::uint64_t seq = nodes_.size();
  for (VarId v : op.reads) queues_[v].seqs.push_back(seq);
  for (VarId v : op.writes) {
    // read-modify-write ops are queued once; the write entry covers both
    if (std::find(op.reads.begin(), op.reads.end(), v) == op.reads.end()) {
      queues_[v].seqs.push_back(seq);
    }
  }
  nodes_.push_back(Node{std::move(op), State::Pending, 0.0});
  pending_.insert(seq);
  ++live_;
  return Ticket{seq};
}

bool DepEngine::is_write(const Node& node, VarId v) const {
  return std::find(node.op.writes.begin(), node.op.writes.end(), v) != node.op.writes.end();
}

void DepEngine::settle(VarQueue& q) const {
  while (q.settled < q.seqs.size() && nodes_[q.seqs[q.settled]].state == State::Completed) {
    ++q.settled;
  }
}

bool DepEngine::can_start(std::uint64_t seq) const {
  const Node& node = nodes_[seq];
  if (node.state != State::Pending) return false;
  auto blocked_on = [&](VarId v) {
    const auto it = queues_.find(v);
    const VarQueue& q = it->second;
    const bool writer = is_write(node, v);
    for (std::size_t i = q.settled; i < q.seqs.size(); ++i) {
      const std::uint64_t other = q.seqs[i];
      if (other >= seq) break;
      const Node& prev = nodes_[other];
      if (prev.state == State::Completed) continue;
      if (writer || is_write(prev, v)) return true;
    }
    return false;
  };
  for (VarId v : node.op.reads) {
    if (blocked_on(v)) return false;
  }
  for (VarId v : node.op.writes) {
    if (blocked_on(v)) return false;
  }
  return true;
}

std::vector<Ticket> DepEngine::ready() const {
  std::vector<Ticket> out;
  for (std::uint64_t seq : pending_) {
    if (can_start(seq)) out.push_back(Ticket{seq});
  }
  return out;
}

const OpSpec& DepEngine::spec(Ticket t) const {
  if (t.seq >= nodes_.size()) throw ProtocolError("depengine: unknown ticket");
  return nodes_[t.seq].op;
}

void DepEngine::start(Ticket t, double at) {
  if (t.seq >= nodes_.size()) throw ProtocolError("depengine: start of unknown ticket");
  if (!can_start(t.seq)) throw ProtocolError("depengine: ticket is not ready");
  nodes_[t.seq].state = State::Running;
  nodes_[t.seq].started_at = at;
  pending_.erase(t.seq);
}

void DepEngine::complete(Ticket t, double at) {
  if (t.seq >= nodes_.size()) throw ProtocolError("depengine: completion of unknown ticket");
  Node& node = nodes_[t.seq];
  if (node.state != State::Running) {
    throw ProtocolError("depengine: completion of a ticket that is not running");
  }
  node.state = State::Completed;
  --live_;
  trace_.push_back(TraceEntry{t, node.op.label, node.started_at, at});
  for (VarId v : node.op.reads) settle(queues_[v]);
  for (VarId v : node.op.writes) settle(queues_[v]);
}

}  // namespace odlab
