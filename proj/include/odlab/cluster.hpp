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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "odlab/depengine.hpp"
#include "odlab/model.hpp"
#include "odlab/optim.hpp"
#include "odlab/simnet.hpp"
#include "odlab/tensor.hpp"

namespace odlab {

enum class Mode { Ssgd, Asgd, DcasgdC, DcasgdA, Odsgd };
enum class LocalUpdaterKind { None, Sgd, DcasgdC, DcasgdA };
enum class WorkerStage { WarmUp, Switching, Steady };

bool is_synchronous(Mode mode);
const char* to_string(Mode mode);
const char* to_string(WorkerStage stage);
const char* to_string(LocalUpdaterKind kind);

/// One line of the run log: (sim_time, actor, event, round, labels).
struct TraceEvent {
  SimTime at = 0.0;
  std::string actor;
  std::string event;
  std::int64_t round = 0;
  std::string labels;
};

std::string format_trace_line(const TraceEvent& ev);

/// Round-trippable double formatting (%.17g) used by traces and CSV files.
std::string format_double(double v);

struct IterationReport {
  std::size_t index = 0;
  WorkerStage stage = WorkerStage::WarmUp;
  SimTime started_at = 0.0;
  double batch_loss = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  SimTime sim_time = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double throughput = 0.0;
  double mean_staleness = 0.0;
};

struct ClusterConfig {
  Mode mode = Mode::Ssgd;
  std::size_t workers = 1;
  std::size_t devices = 1;
  std::size_t batch = 8;
  std::size_t iterations = 1;  // per worker
  std::size_t warmup_iters = 0;
  std::uint64_t seed = 1;
  ModelSpec model;
  HyperParams global_hp;
  LrSchedule global_lr = LrSchedule::constant(0.1);
  LocalUpdaterKind local_updater = LocalUpdaterKind::Sgd;
  HyperParams local_hp;
  double local_lr = 0.1;
  TimingModel timing;

  void validate(std::size_t dataset_n) const;
};

struct RunSummary {
  Mode mode = Mode::Ssgd;
  std::size_t workers = 0;
  std::size_t batch = 0;
  std::size_t iterations_per_worker = 0;
  std::size_t warmup_iters = 0;
  SimTime elapsed = 0.0;
  double throughput = 0.0;
  ParamStore final_weights;
  std::vector<EpochMetrics> epochs;
  std::vector<TraceEvent> trace;
  std::map<int, std::size_t> staleness_histogram;
  std::vector<std::pair<std::int64_t, int>> push_staleness;  // (server round, staleness)
  std::vector<std::vector<SimTime>> iter_starts;             // per worker
  std::vector<std::vector<IterationReport>> reports;         // per worker
};

/// Measured steady-state cost of one iteration for worker 0, averaged over
/// an even window after a two-iteration ramp. Exact on the virtual clock.
double steady_iteration_cost(const RunSummary& summary);

/// Elementwise mean of the gradients computed by one worker's local devices.
ParamStore intra_node_reduce(const std::vector<ParamStore>& grads);

/// Deterministic per-worker mini-batch schedule: worker m owns the strided
/// shard {m, m+M, ...}, reshuffled each epoch from (seed, worker, epoch).
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t workers, std::size_t batch, std::uint64_t seed);

  std::size_t iters_per_epoch() const { return ipe_; }
  Batch batch_for(std::size_t worker, std::size_t iteration) const;

 private:
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t ipe_;
  std::vector<std::vector<std::size_t>> shards_;
};

/// The global side of the protocol: counts arriving gradients, applies the
/// global update once all M arrived (synchronous modes) or immediately per
/// gradient (asynchronous modes), and answers pull requests - deferring them
/// behind the round barrier when the puller has already contributed.
class ParamServer {
 public:
  ParamServer(Mode mode, std::size_t workers, ParamStore init_weights, HyperParams hp,
              LrSchedule lr, std::size_t lr_rounds_per_epoch, std::size_t total_rounds);

  struct PullReply {
    ParamStore weights;
    std::int64_t version = 0;
  };

  struct PushOutcome {
    bool round_completed = false;
    int staleness = 0;
    std::vector<std::size_t> released_pulls;
  };

  PushOutcome handle_push(std::size_t worker, const ParamStore& grad, std::int64_t base_version);

  /// nullopt means the reply is deferred until the current round completes.
  std::optional<PullReply> handle_pull(std::size_t worker);

  const ParamStore& weights() const { return w_; }
  std::int64_t timestamp() const { return t_; }
  std::size_t pending_count() const { return count_; }

 private:
  void apply_async_update(std::size_t worker, const ParamStore& grad, double lr);
  double current_lr() const;

  Mode mode_;
  std::size_t workers_;
  ParamStore w_;
  ParamStore accum_;
  std::size_t count_ = 0;
  std::int64_t t_ = 0;
  HyperParams hp_;
  LrSchedule lr_;
  std::size_t lr_rounds_per_epoch_;
  std::size_t total_rounds_;
  MomentumState momentum_;
  MeanSquareState ms_;
  std::vector<ParamStore> snapshots_;      // DC-ASGD modes: weights handed per worker
  std::vector<std::int64_t> pushed_round_;  // last round each worker contributed to
  std::vector<bool> deferred_;
};

class ClusterSim;

/// One worker node: an event-driven realization of the warm-up / switching /
/// steady iteration flows. All intra-worker ordering goes through a private
/// dependency engine over the variables comm_buf, comm_bak, grad and the
/// device weights.
class WorkerNode {
 public:
  WorkerNode(ClusterSim& sim, std::size_t id);

  /// Installs the initial pull result and starts iteration 0.
  void begin(ParamStore w0, std::int64_t version);

  /// Entry points for one iteration of each flow. Stage misuse throws.
  void begin_warmup_iteration();  // ProtocolError when already in Steady
  void begin_steady_iteration();  // ProtocolError outside Steady / unseeded comm_bak

  void on_pull_response(ParamStore weights, std::int64_t version);

  WorkerStage stage() const { return stage_; }
  std::size_t iterations_done() const { return num_; }
  bool done() const { return done_; }

  const std::vector<SimTime>& iter_starts() const { return iter_starts_; }
  const std::vector<IterationReport>& reports() const { return reports_; }

 private:
  static constexpr VarId kVarBuf{0};   // comm_buf: push/pull shared buffer
  static constexpr VarId kVarBak{1};   // comm_bak: backup weights
  static constexpr VarId kVarGrad{2};  // freshly reduced gradient
  static constexpr VarId kVarDev{3};   // device weight copies

  Ticket submit_op(const char* label, std::vector<VarId> reads, std::vector<VarId> writes,
                   double duration, std::function<void()> on_start,
                   std::function<void()> on_complete);
  void pump();
  void complete_op(Ticket t);

  void maybe_submit_bak_chain();     // steady: backup copy, once the pull landed
  void submit_steady_local_update();  // steady: compensation step, after compute
  void apply_local_update();
  void finish_warmup_pass();
  void maybe_finish_warmup_pass();
  void finish_steady_pass();
  void advance_stage_after_pass();
  void start_next_iteration();
  void compute_gradient();

  ClusterSim& sim_;
  std::size_t id_;
  DepEngine engine_;
  std::unordered_map<std::uint64_t, std::function<void()>> on_start_;
  std::unordered_map<std::uint64_t, std::function<void()>> on_complete_;

  WorkerStage stage_ = WorkerStage::WarmUp;
  std::size_t num_ = 0;
  bool begun_ = false;
  bool done_ = false;

  ParamStore comm_buf_;
  ParamStore comm_bak_;
  ParamStore grad_;
  ParamStore device_w_;
  ParamStore base_w_;
  ParamStore pending_pull_;
  std::int64_t pending_pull_version_ = 0;
  std::int64_t t_local_ = 0;
  std::int64_t bak_version_ = 0;
  std::int64_t base_version_ = 0;
  bool pull_value_fresh_ = false;
  bool steady_pass_waiting_ = false;
  bool warmup_pull_done_ = false;
  bool warmup_update_done_ = false;
  double iter_loss_ = 0.0;

  MomentumState local_momentum_;
  MeanSquareState local_ms_;

  std::vector<SimTime> iter_starts_;
  std::vector<IterationReport> reports_;
};

/// Wires the server, the workers, the virtual clock and the trace log into
/// one deterministic simulation.
class ClusterSim {
 public:
  ClusterSim(ClusterConfig cfg, const Dataset& train, const Dataset* test);

  RunSummary run();

  WorkerNode& worker(std::size_t m) { return *workers_.at(m); }
  ParamServer& server() { return *server_; }
  EventQueue& queue() { return queue_; }
  const ClusterConfig& config() const { return cfg_; }
  const Dataset& train_data() const { return train_; }
  const BatchSampler& sampler() const { return sampler_; }

  void trace(const std::string& actor, const std::string& event, std::int64_t round,
             std::string labels = {});

  // Worker-to-server messaging (transit times from the timing model).
  void worker_send_push(std::size_t worker, ParamStore grad, std::int64_t base_version);

 private:
  friend class WorkerNode;

  double one_way_transit(std::size_t worker) const;
  void deliver_push(std::size_t worker, ParamStore grad, std::int64_t base_version);
  void deliver_pull_request(std::size_t worker);
  void send_pull_reply(std::size_t worker, ParamServer::PullReply reply);
  void maybe_emit_epoch_metrics();

  ClusterConfig cfg_;
  const Dataset& train_;
  const Dataset* test_;
  BatchSampler sampler_;
  EventQueue queue_;
  std::unique_ptr<ParamServer> server_;
  std::vector<std::unique_ptr<WorkerNode>> workers_;
  std::vector<TraceEvent> trace_;
  std::vector<std::pair<std::int64_t, int>> push_staleness_;
  std::map<int, std::size_t> staleness_histogram_;
  double epoch_staleness_sum_ = 0.0;
  std::size_t epoch_staleness_n_ = 0;
  std::size_t rounds_per_epoch_ = 0;
  std::vector<EpochMetrics> epochs_;
  bool begun_ = false;
};

/// Drives a full experiment on the virtual clock and collects metrics.
RunSummary run_training(const ClusterConfig& cfg, const Dataset& train, const Dataset* test);

}  // namespace odlab
