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

#include "odlab/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "odlab/rng.hpp"

namespace odlab {

bool is_synchronous(Mode mode) { return mode == Mode::Ssgd || mode == Mode::Odsgd; }

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Ssgd: return "ssgd";
    case Mode::Asgd: return "asgd";
    case Mode::DcasgdC: return "dcasgd-c";
    case Mode::DcasgdA: return "dcasgd-a";
    case Mode::Odsgd: return "odsgd";
  }
  return "?";
}

const char* to_string(WorkerStage stage) {
  switch (stage) {
    case WorkerStage::WarmUp: return "warmup";
    case WorkerStage::Switching: return "switching";
    case WorkerStage::Steady: return "steady";
  }
  return "?";
}

const char* to_string(LocalUpdaterKind kind) {
  switch (kind) {
    case LocalUpdaterKind::None: return "none";
    case LocalUpdaterKind::Sgd: return "sgd";
    case LocalUpdaterKind::DcasgdC: return "dcasgd-c";
    case LocalUpdaterKind::DcasgdA: return "dcasgd-a";
  }
  return "?";
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string format_trace_line(const TraceEvent& ev) {
  std::string line = format_double(ev.at);
  line += ',';
  line += ev.actor;
  line += ',';
  line += ev.event;
  line += ',';
  line += std::to_string(ev.round);
  line += ',';
  line += ev.labels;
  return line;
}

void ClusterConfig::validate(std::size_t dataset_n) const {
  if (workers == 0) throw ConfigError("cluster.workers: must be >= 1");
  if (devices == 0) throw ConfigError("cluster.devices: must be >= 1");
  if (batch == 0) throw ConfigError("cluster.batch: must be >= 1");
  if (batch % devices != 0) throw ConfigError("cluster.batch: must divide evenly across devices");
  if (iterations == 0) throw ConfigError("run.iterations: must be >= 1");
  model.validate();
  global_hp.validate();
  global_lr.validate();
  local_hp.validate();
  if (!(local_lr > 0.0)) throw ConfigError("local.eta: must be > 0");
  timing.validate(workers);
  if (dataset_n / workers < batch) {
    throw ConfigError("cluster.batch: per-worker shard smaller than one batch");
  }
}

ParamStore intra_node_reduce(const std::vector<ParamStore>& grads) {
  if (grads.empty()) throw ConfigError("intra_node_reduce: no device gradients");
  ParamStore out;
  copy_into(grads[0], out);
  for (std::size_t d = 1; d < grads.size(); ++d) {
    grads[d].require_compatible(out, "intra_node_reduce");
    for (auto& [key, acc] : out) {
      acc = axpy(1.0, grads[d].at(key), acc);
    }
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (auto& [key, acc] : out) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] *= inv;
  }
  return out;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t workers, std::size_t batch,
                           std::uint64_t seed)
    : batch_(batch), seed_(seed) {
  if (workers == 0 || batch == 0) throw ConfigError("sampler: workers and batch must be >= 1");
  shards_.resize(workers);
  for (std::size_t i = 0; i < n; ++i) shards_[i % workers].push_back(i);
  std::size_t min_shard = n;
  for (const auto& s : shards_) min_shard = std::min(min_shard, s.size());
  ipe_ = min_shard / batch;
  if (ipe_ == 0) throw ConfigError("sampler: shard smaller than one batch");
}

Batch BatchSampler::batch_for(std::size_t worker, std::size_t iteration) const {
  const std::size_t epoch = iteration / ipe_;
  const std::size_t slot = iteration % ipe_;
  std::vector<std::size_t> order = shards_.at(worker);
  Rng rng(mix_seed(seed_, worker + 1, epoch + 1));
  rng.shuffle(order);
  Batch out;
  out.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(slot * batch_),
                     order.begin() + static_cast<std::ptrdiff_t>((slot + 1) * batch_));
  return out;
}

// ---------------------------------------------------------------------------
// ParamServer

ParamServer::ParamServer(Mode mode, std::size_t workers, ParamStore init_weights, HyperParams hp,
                         LrSchedule lr, std::size_t lr_rounds_per_epoch, std::size_t total_rounds)
    : mode_(mode),
      workers_(workers),
      w_(std::move(init_weights)),
      accum_(w_.zeros_like()),
      hp_(hp),
      lr_(std::move(lr)),
      lr_rounds_per_epoch_(lr_rounds_per_epoch == 0 ? 1 : lr_rounds_per_epoch),
      total_rounds_(total_rounds),
      momentum_(MomentumState::zeros_like(w_)),
      ms_(MeanSquareState::zeros_like(w_)),
      snapshots_(workers),
      pushed_round_(workers, -1),
      deferred_(workers, false) {
  hp_.validate();
}

double ParamServer::current_lr() const {
  const double epoch = static_cast<double>(t_) / static_cast<double>(lr_rounds_per_epoch_);
  return lr_at(lr_, epoch, static_cast<std::size_t>(t_), total_rounds_);
}

void ParamServer::apply_async_update(std::size_t worker, const ParamStore& grad, double lr) {
  switch (mode_) {
    case Mode::Asgd:
      sgd_momentum_update(w_, grad, hp_, momentum_, lr);
      return;
    case Mode::DcasgdC: {
      LocalUpdateContext ctx{snapshots_[worker], w_, grad, 1};
      dcasgd_c_update(ctx, hp_, lr);
      return;
    }
    case Mode::DcasgdA: {
      mean_square_step(ms_, grad, hp_);
      LocalUpdateContext ctx{snapshots_[worker], w_, grad, 1};
      dcasgd_a_update(ctx, hp_, ms_, lr);
      return;
    }
    default:
      throw ProtocolError("server: async update in a synchronous mode");
  }
}

ParamServer::PushOutcome ParamServer::handle_push(std::size_t worker, const ParamStore& grad,
                                                  std::int64_t base_version) {
  if (worker >= workers_) throw ProtocolError("server: push from unknown worker");
  grad.require_compatible(w_, "server push");

  PushOutcome out;
  out.staleness = static_cast<int>(t_ - base_version);

  if (is_synchronous(mode_)) {
    const double inv_m = 1.0 / static_cast<double>(workers_);
    for (auto& [key, acc] : accum_) {
      acc = axpy(inv_m, grad.at(key), acc);
    }
    pushed_round_[worker] = t_;
    ++count_;
    if (count_ == workers_) {
      const double lr = current_lr();
      sgd_momentum_update(w_, accum_, hp_, momentum_, lr);
      ++t_;
      count_ = 0;
      accum_ = w_.zeros_like();
      out.round_completed = true;
      for (std::size_t m = 0; m < workers_; ++m) {
        if (deferred_[m]) {
          deferred_[m] = false;
          out.released_pulls.push_back(m);
        }
      }
    }
    return out;
  }

  // Asynchronous modes update per arriving gradient; every push ends a round.
  apply_async_update(worker, grad, current_lr());
  ++t_;
  out.round_completed = true;
  return out;
}

std::optional<ParamServer::PullReply> ParamServer::handle_pull(std::size_t worker) {
  if (worker >= workers_) throw ProtocolError("server: pull from unknown worker");
  if (is_synchronous(mode_) && pushed_round_[worker] == t_) {
    // The worker already contributed to the round in flight; the reply must
    // carry the post-round weights, so it waits for the barrier.
    deferred_[worker] = true;
    return std::nullopt;
  }
  PullReply reply{w_, t_};
  if (mode_ == Mode::DcasgdC || mode_ == Mode::DcasgdA) {
    snapshots_[worker] = w_;
  }
  return reply;
}

// ---------------------------------------------------------------------------
// WorkerNode

WorkerNode::WorkerNode(ClusterSim& sim, std::size_t id) : sim_(sim), id_(id) {
  const ClusterConfig& cfg = sim_.config();
  if (cfg.mode == Mode::Odsgd) {
    if (cfg.warmup_iters == 0) {
      stage_ = WorkerStage::Steady;
    } else if (cfg.warmup_iters == 1) {
      stage_ = WorkerStage::Switching;
    } else {
      stage_ = WorkerStage::WarmUp;
    }
  }
}

Ticket WorkerNode::submit_op(const char* label, std::vector<VarId> reads,
                             std::vector<VarId> writes, double duration,
                             std::function<void()> on_start,
                             std::function<void()> on_complete) {
  OpSpec op;
  op.label = label;
  op.reads = std::move(reads);
  op.writes = std::move(writes);
  op.duration = duration;
  Ticket t = engine_.submit(std::move(op));
  if (on_start) on_start_[t.seq] = std::move(on_start);
  if (on_complete) on_complete_[t.seq] = std::move(on_complete);
  return t;
}

void WorkerNode::complete_op(Ticket t) {
  engine_.complete(t, sim_.queue().now());
  auto it = on_complete_.find(t.seq);
  if (it != on_complete_.end()) {
    auto fn = std::move(it->second);
    on_complete_.erase(it);
    fn();
  }
}

void WorkerNode::pump() {
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (Ticket t : engine_.ready()) {
      engine_.start(t, sim_.queue().now());
      auto hook = on_start_.find(t.seq);
      if (hook != on_start_.end()) {
        auto fn = std::move(hook->second);
        on_start_.erase(hook);
        fn();
      }
      const double dur = engine_.spec(t).duration;
      if (dur == 0.0) {
        complete_op(t);
      } else {
        sim_.queue().post_after(dur, [this, t] {
          complete_op(t);
          pump();
        });
      }
      progressed = true;
    }
  }
}

void WorkerNode::begin(ParamStore w0, std::int64_t version) {
  if (begun_) throw ProtocolError("worker: begin() called twice");
  begun_ = true;
  comm_buf_ = std::move(w0);
  t_local_ = version;
  pull_value_fresh_ = true;
  local_momentum_ = MomentumState::zeros_like(comm_buf_);
  local_ms_ = MeanSquareState::zeros_like(comm_buf_);
  const ClusterConfig& cfg = sim_.config();
  if (cfg.mode == Mode::Odsgd && cfg.warmup_iters == 0) {
    // No warm-up at all: the backup weights start as the initial pull.
    copy_into(comm_buf_, comm_bak_);
    bak_version_ = version;
  }
  start_next_iteration();
  pump();
}

void WorkerNode::begin_warmup_iteration() {
  if (stage_ == WorkerStage::Steady) {
    throw ProtocolError("worker: warm-up iteration requested in steady stage");
  }
  const ClusterConfig& cfg = sim_.config();
  iter_starts_.push_back(sim_.queue().now());
  sim_.trace("worker" + std::to_string(id_), "iter_start", static_cast<std::int64_t>(num_),
             std::string("stage=") + to_string(stage_));

  submit_op("broadcast", {kVarBuf}, {kVarDev}, 0.0, nullptr, [this] {
    device_w_ = comm_buf_;
    base_w_ = comm_buf_;
    base_version_ = t_local_;
    sim_.trace("worker" + std::to_string(id_), "broadcast", static_cast<std::int64_t>(num_),
               "version=" + std::to_string(base_version_));
  });
  submit_op("compute", {kVarDev}, {kVarGrad}, sim_.config().timing.t_cop_for(id_), nullptr,
            [this] {
              compute_gradient();
              sim_.trace("worker" + std::to_string(id_), "compute_done",
                         static_cast<std::int64_t>(num_), "loss=" + format_double(iter_loss_));
            });
  submit_op("grad_write", {kVarGrad}, {kVarBuf}, 0.0, nullptr, [this] { comm_buf_ = grad_; });
  submit_op("push", {kVarBuf}, {}, 0.0, nullptr, [this] {
    sim_.trace("worker" + std::to_string(id_), "push_sent", static_cast<std::int64_t>(num_),
               "base_version=" + std::to_string(base_version_));
    sim_.worker_send_push(id_, comm_buf_, base_version_);
  });

  if (cfg.mode == Mode::Odsgd && cfg.warmup_iters > 0 && num_ == cfg.warmup_iters) {
    // Last switching iteration: first update of the backup weights. Runs
    // alongside the push; both only read the fresh gradient.
    submit_op(
        "local_update", {kVarGrad, kVarBak}, {kVarBak}, cfg.timing.local_update_cost,
        [this] {
          sim_.trace("worker" + std::to_string(id_), "local_update_start",
                     static_cast<std::int64_t>(num_), "");
        },
        [this] {
          apply_local_update();
          sim_.trace("worker" + std::to_string(id_), "local_update_done",
                     static_cast<std::int64_t>(num_), "");
          warmup_update_done_ = true;
          maybe_finish_warmup_pass();
        });
  }
  pump();
}

void WorkerNode::begin_steady_iteration() {
  if (stage_ != WorkerStage::Steady) {
    throw ProtocolError("worker: steady iteration requested outside steady stage");
  }
  if (comm_bak_.empty()) {
    throw ProtocolError("worker: steady iteration without a seeded comm_bak");
  }
  iter_starts_.push_back(sim_.queue().now());
  sim_.trace("worker" + std::to_string(id_), "iter_start", static_cast<std::int64_t>(num_),
             "stage=steady");

  // Broadcast the locally updated one-step-delayed weights; this does not
  // wait for the in-flight pull of the previous round.
  submit_op("broadcast", {kVarBak}, {kVarDev}, 0.0, nullptr, [this] {
    device_w_ = comm_bak_;
    base_w_ = comm_bak_;
    base_version_ = bak_version_;
    sim_.trace("worker" + std::to_string(id_), "broadcast", static_cast<std::int64_t>(num_),
               "version=" + std::to_string(base_version_));
  });

  steady_pass_waiting_ = true;
  const bool fresh = pull_value_fresh_;
  if (fresh) {
    // The previous round's pull already landed: its comm_buf read must be
    // queued ahead of this iteration's gradient overwrite.
    maybe_submit_bak_chain();
  }

  submit_op("compute", {kVarDev}, {kVarGrad}, sim_.config().timing.t_cop_for(id_), nullptr,
            [this] {
              compute_gradient();
              sim_.trace("worker" + std::to_string(id_), "compute_done",
                         static_cast<std::int64_t>(num_), "loss=" + format_double(iter_loss_));
            });
  submit_op("grad_write", {kVarGrad}, {kVarBuf}, 0.0, nullptr, [this] { comm_buf_ = grad_; });
  submit_op("push", {kVarBuf}, {}, 0.0, nullptr, [this] {
    sim_.trace("worker" + std::to_string(id_), "push_sent", static_cast<std::int64_t>(num_),
               "base_version=" + std::to_string(base_version_));
    sim_.worker_send_push(id_, comm_buf_, base_version_);
  });
  if (fresh) {
    submit_steady_local_update();
  }
  pump();
}

void WorkerNode::maybe_submit_bak_chain() {
  if (!steady_pass_waiting_ || !pull_value_fresh_) return;
  pull_value_fresh_ = false;
  submit_op("bak_copy", {kVarBuf}, {kVarBak}, 0.0, nullptr, [this] {
    copy_into(comm_buf_, comm_bak_);
    bak_version_ = t_local_;
    sim_.trace("worker" + std::to_string(id_), "bak_copy", static_cast<std::int64_t>(num_),
               "version=" + std::to_string(bak_version_));
  });
}

void WorkerNode::submit_steady_local_update() {
  steady_pass_waiting_ = false;
  submit_op(
      "local_update", {kVarGrad, kVarBak}, {kVarBak}, sim_.config().timing.local_update_cost,
      [this] {
        sim_.trace("worker" + std::to_string(id_), "local_update_start",
                   static_cast<std::int64_t>(num_), "");
      },
      [this] {
        apply_local_update();
        sim_.trace("worker" + std::to_string(id_), "local_update_done",
                   static_cast<std::int64_t>(num_), "");
        finish_steady_pass();
      });
}

void WorkerNode::apply_local_update() {
  const ClusterConfig& cfg = sim_.config();
  switch (cfg.local_updater) {
    case LocalUpdaterKind::None:
      return;
    case LocalUpdaterKind::Sgd:
      sgd_momentum_update(comm_bak_, grad_, cfg.local_hp, local_momentum_, cfg.local_lr);
      return;
    case LocalUpdaterKind::DcasgdC: {
      LocalUpdateContext ctx{base_w_, comm_bak_, grad_, 1};
      dcasgd_c_update(ctx, cfg.local_hp, cfg.local_lr);
      return;
    }
    case LocalUpdaterKind::DcasgdA: {
      mean_square_step(local_ms_, grad_, cfg.local_hp);
      LocalUpdateContext ctx{base_w_, comm_bak_, grad_, 1};
      dcasgd_a_update(ctx, cfg.local_hp, local_ms_, cfg.local_lr);
      return;
    }
  }
}

void WorkerNode::compute_gradient() {
  const ClusterConfig& cfg = sim_.config();
  const Batch batch = sim_.sampler().batch_for(id_, num_);
  if (cfg.devices == 1) {
    LossGrad lg = forward_backward(cfg.model, device_w_, sim_.train_data(), batch);
    grad_ = std::move(lg.grads);
    iter_loss_ = lg.loss;
    return;
  }
  const std::size_t slice = cfg.batch / cfg.devices;
  std::vector<ParamStore> parts;
  parts.reserve(cfg.devices);
  double loss = 0.0;
  for (std::size_t dev = 0; dev < cfg.devices; ++dev) {
    Batch part;
    part.indices.assign(batch.indices.begin() + static_cast<std::ptrdiff_t>(dev * slice),
                        batch.indices.begin() + static_cast<std::ptrdiff_t>((dev + 1) * slice));
    LossGrad lg = forward_backward(cfg.model, device_w_, sim_.train_data(), part);
    parts.push_back(std::move(lg.grads));
    loss += lg.loss;
  }
  grad_ = intra_node_reduce(parts);
  iter_loss_ = loss / static_cast<double>(cfg.devices);
}

void WorkerNode::on_pull_response(ParamStore weights, std::int64_t version) {
  pending_pull_ = std::move(weights);
  pending_pull_version_ = version;
  submit_op("pull_recv", {}, {kVarBuf}, 0.0, nullptr, [this] {
    comm_buf_ = std::move(pending_pull_);
    t_local_ = pending_pull_version_;
    pull_value_fresh_ = true;
    sim_.trace("worker" + std::to_string(id_), "pull_recv", static_cast<std::int64_t>(num_),
               "version=" + std::to_string(t_local_));
    const ClusterConfig& cfg = sim_.config();
    if (stage_ != WorkerStage::Steady) {
      if (cfg.mode == Mode::Odsgd && cfg.warmup_iters > 0 && num_ + 1 == cfg.warmup_iters) {
        // Penultimate warm-up iteration: back up the freshly pulled weights.
        submit_op("bak_copy", {kVarBuf}, {kVarBak}, 0.0, nullptr, [this] {
          copy_into(comm_buf_, comm_bak_);
          bak_version_ = t_local_;
          sim_.trace("worker" + std::to_string(id_), "bak_copy", static_cast<std::int64_t>(num_),
                     "version=" + std::to_string(bak_version_));
          warmup_pull_done_ = true;
          maybe_finish_warmup_pass();
        });
      } else {
        warmup_pull_done_ = true;
        maybe_finish_warmup_pass();
      }
    } else if (steady_pass_waiting_) {
      maybe_submit_bak_chain();
      submit_steady_local_update();
    }
  });
  pump();
}

void WorkerNode::maybe_finish_warmup_pass() {
  if (!warmup_pull_done_) return;
  const ClusterConfig& cfg = sim_.config();
  if (cfg.mode == Mode::Odsgd && cfg.warmup_iters > 0 && num_ == cfg.warmup_iters &&
      !warmup_update_done_) {
    return;
  }
  finish_warmup_pass();
}

void WorkerNode::finish_warmup_pass() {
  warmup_pull_done_ = false;
  warmup_update_done_ = false;
  reports_.push_back(IterationReport{num_, stage_, iter_starts_.back(), iter_loss_});
  ++num_;
  advance_stage_after_pass();
  start_next_iteration();
}

void WorkerNode::finish_steady_pass() {
  reports_.push_back(IterationReport{num_, stage_, iter_starts_.back(), iter_loss_});
  ++num_;
  start_next_iteration();
}

void WorkerNode::advance_stage_after_pass() {
  const ClusterConfig& cfg = sim_.config();
  if (cfg.mode != Mode::Odsgd) return;
  WorkerStage next = stage_;
  if (num_ > cfg.warmup_iters) {
    next = WorkerStage::Steady;
  } else if (num_ + 1 >= cfg.warmup_iters) {
    next = WorkerStage::Switching;
  }
  if (next != stage_) {
    sim_.trace("worker" + std::to_string(id_), "stage", static_cast<std::int64_t>(num_),
               std::string("from=") + to_string(stage_) + ";to=" + to_string(next));
    stage_ = next;
  }
}

void WorkerNode::start_next_iteration() {
  if (num_ >= sim_.config().iterations) {
    if (!done_) {
      done_ = true;
      sim_.trace("worker" + std::to_string(id_), "done", static_cast<std::int64_t>(num_), "");
    }
    return;
  }
  if (stage_ == WorkerStage::Steady) {
    begin_steady_iteration();
  } else {
    begin_warmup_iteration();
  }
}

// ---------------------------------------------------------------------------
// ClusterSim

ClusterSim::ClusterSim(ClusterConfig cfg, const Dataset& train, const Dataset* test)
    : cfg_(std::move(cfg)),
      train_(train),
      test_(test),
      sampler_(train.n, cfg_.workers, cfg_.batch, cfg_.seed) {
  cfg_.validate(train.n);
  if (train_.d != cfg_.model.d || train_.k > cfg_.model.k) {
    throw ConfigError("model: dims do not match the dataset");
  }
  const std::size_t rounds_factor = is_synchronous(cfg_.mode) ? 1 : cfg_.workers;
  rounds_per_epoch_ = sampler_.iters_per_epoch() * rounds_factor;
  const std::size_t total_rounds = cfg_.iterations * rounds_factor;
  server_ = std::make_unique<ParamServer>(cfg_.mode, cfg_.workers,
                                          init_params(cfg_.model, cfg_.seed), cfg_.global_hp,
                                          cfg_.global_lr, rounds_per_epoch_, total_rounds);
  for (std::size_t m = 0; m < cfg_.workers; ++m) {
    workers_.push_back(std::make_unique<WorkerNode>(*this, m));
  }
}

void ClusterSim::trace(const std::string& actor, const std::string& event, std::int64_t round,
                       std::string labels) {
  trace_.push_back(TraceEvent{queue_.now(), actor, event, round, std::move(labels)});
}

double ClusterSim::one_way_transit(std::size_t worker) const {
  switch (cfg_.mode) {
    case Mode::Ssgd:
      return cfg_.timing.t_com_prime / 2.0;
    case Mode::Odsgd:
      // Warm-up runs the plain synchronous flow; the local-update induced
      // prolongation applies only once the one-step-delay flow is active.
      return workers_[worker]->stage() == WorkerStage::Steady ? cfg_.timing.t_com / 2.0
                                                              : cfg_.timing.t_com_prime / 2.0;
    default:
      return cfg_.timing.t_com / 2.0;
  }
}

void ClusterSim::worker_send_push(std::size_t worker, ParamStore grad,
                                  std::int64_t base_version) {
  const double transit = one_way_transit(worker);
  queue_.post_after(transit, [this, worker, grad = std::move(grad), base_version]() mutable {
    deliver_push(worker, std::move(grad), base_version);
  });
  // The pull request follows its push on the same link.
  queue_.post_after(transit, [this, worker] { deliver_pull_request(worker); });
}

void ClusterSim::deliver_push(std::size_t worker, ParamStore grad, std::int64_t base_version) {
  const std::int64_t round = server_->timestamp();
  ParamServer::PushOutcome outcome = server_->handle_push(worker, grad, base_version);
  trace("server", "push_recv", round,
        "worker=" + std::to_string(worker) + ";staleness=" + std::to_string(outcome.staleness));
  push_staleness_.emplace_back(round, outcome.staleness);
  ++staleness_histogram_[outcome.staleness];
  epoch_staleness_sum_ += outcome.staleness;
  ++epoch_staleness_n_;
  if (outcome.round_completed) {
    trace("server", "round_complete", round, "t=" + std::to_string(server_->timestamp()));
    for (std::size_t released : outcome.released_pulls) {
      send_pull_reply(released, ParamServer::PullReply{server_->weights(), server_->timestamp()});
    }
    maybe_emit_epoch_metrics();
  }
}

void ClusterSim::deliver_pull_request(std::size_t worker) {
  std::optional<ParamServer::PullReply> reply = server_->handle_pull(worker);
  if (!reply) {
    trace("server", "pull_deferred", server_->timestamp(), "worker=" + std::to_string(worker));
    return;
  }
  send_pull_reply(worker, std::move(*reply));
}

void ClusterSim::send_pull_reply(std::size_t worker, ParamServer::PullReply reply) {
  trace("server", "pull_reply", reply.version, "worker=" + std::to_string(worker));
  const double transit = one_way_transit(worker);
  queue_.post_after(transit, [this, worker, reply = std::move(reply)]() mutable {
    workers_[worker]->on_pull_response(std::move(reply.weights), reply.version);
  });
}

void ClusterSim::maybe_emit_epoch_metrics() {
  if (rounds_per_epoch_ == 0) return;
  const std::int64_t t = server_->timestamp();
  const std::size_t completed_epochs = static_cast<std::size_t>(t) / rounds_per_epoch_;
  if (completed_epochs == 0 || completed_epochs <= epochs_.size()) return;
  if (static_cast<std::size_t>(t) % rounds_per_epoch_ != 0) return;

  EpochMetrics row;
  row.epoch = completed_epochs;
  row.sim_time = queue_.now();
  EvalResult train_eval = evaluate(cfg_.model, server_->weights(), train_);
  row.train_loss = train_eval.mean_loss;
  row.train_acc = train_eval.accuracy;
  row.test_acc = test_ ? evaluate(cfg_.model, server_->weights(), *test_).accuracy
                       : train_eval.accuracy;
  const double samples = static_cast<double>(t) * static_cast<double>(cfg_.batch) *
                         (is_synchronous(cfg_.mode) ? static_cast<double>(cfg_.workers) : 1.0);
  row.throughput = queue_.now() > 0.0 ? samples / queue_.now() : 0.0;
  row.mean_staleness =
      epoch_staleness_n_ == 0 ? 0.0 : epoch_staleness_sum_ / static_cast<double>(epoch_staleness_n_);
  epoch_staleness_sum_ = 0.0;
  epoch_staleness_n_ = 0;
  epochs_.push_back(row);
  trace("server", "epoch", static_cast<std::int64_t>(row.epoch),
        "test_acc=" + format_double(row.test_acc));
}

RunSummary ClusterSim::run() {
  if (begun_) throw ProtocolError("cluster: run() called twice");
  begun_ = true;

  // Initial weight distribution: every worker pulls w_0 before iterating.
  for (std::size_t m = 0; m < cfg_.workers; ++m) {
    std::optional<ParamServer::PullReply> reply = server_->handle_pull(m);
    if (!reply) throw ProtocolError("cluster: initial pull was deferred");
    workers_[m]->begin(std::move(reply->weights), reply->version);
  }
  queue_.run_until_idle();

  RunSummary out;
  out.mode = cfg_.mode;
  out.workers = cfg_.workers;
  out.batch = cfg_.batch;
  out.iterations_per_worker = cfg_.iterations;
  out.warmup_iters = cfg_.mode == Mode::Odsgd ? cfg_.warmup_iters : 0;
  out.elapsed = queue_.now();
  out.throughput = out.elapsed > 0.0
                       ? measure_throughput(cfg_.iterations, cfg_.workers, cfg_.batch, out.elapsed)
                       : 0.0;
  out.final_weights = server_->weights();
  out.epochs = std::move(epochs_);
  out.trace = std::move(trace_);
  out.staleness_histogram = std::move(staleness_histogram_);
  out.push_staleness = std::move(push_staleness_);
  for (const auto& w : workers_) {
    out.iter_starts.push_back(w->iter_starts());
    out.reports.push_back(w->reports());
  }
  return out;
}

RunSummary run_training(const ClusterConfig& cfg, const Dataset& train, const Dataset* test) {
  ClusterSim sim(cfg, train, test);
  return sim.run();
}

double steady_iteration_cost(const RunSummary& summary) {
  if (summary.iter_starts.empty()) throw ProtocolError("steady cost: no workers in summary");
  const std::vector<SimTime>& starts = summary.iter_starts[0];
  std::size_t steady_begin = 0;
  if (summary.mode == Mode::Odsgd && summary.warmup_iters > 0) {
    steady_begin = summary.warmup_iters + 1;
  }
  const std::size_t first = steady_begin + 2;  // two-iteration ramp
  if (starts.size() < first + 3) throw ProtocolError("steady cost: run too short");
  std::size_t last = starts.size() - 1;
  if ((last - first) % 2 != 0) --last;
  const double span = starts[last] - starts[first];
  return span / static_cast<double>(last - first);
}

}  // namespace odlab
