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

// Acceptance suite: one checked criterion per function, one PASS/FAIL line
// per criterion on stdout, nonzero exit if anything failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "exhaustive_engine.hpp"
#include "odlab/harness.hpp"
#include "odlab/rng.hpp"
#include "oracle.hpp"

using namespace odlab;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::vector<std::pair<std::string, Outcome>> g_results;

void run_criterion(const std::string& name, const std::function<Outcome()>& fn) {
  Outcome outcome;
  try {
    outcome = fn();
  } catch (const std::exception& e) {
    outcome.pass = false;
    outcome.detail = std::string("exception: ") + e.what();
  }
  g_results.emplace_back(name, outcome);
  std::printf("%s  %s%s%s\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
              outcome.detail.empty() ? "" : " -- ", outcome.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Dataset grid_data() { return gen_synthetic(3, 16, 2, 2, 4.0); }

ClusterConfig grid_config(Mode mode, double t_cop, double t_com, double t_com_prime) {
  ClusterConfig cfg;
  cfg.mode = mode;
  cfg.workers = 2;
  cfg.batch = 2;
  cfg.seed = 9;
  cfg.model = ModelSpec{ModelKind::SoftmaxRegression, 2, 2, 0};
  cfg.global_lr = LrSchedule::constant(0.1);
  cfg.timing.t_cop = {t_cop};
  cfg.timing.t_com = t_com;
  cfg.timing.t_com_prime = t_com_prime;
  if (mode == Mode::Odsgd) {
    cfg.warmup_iters = 2;
    cfg.iterations = cfg.warmup_iters + 1 + 19;  // 19 steady iterations
  } else {
    cfg.iterations = 12;
  }
  return cfg;
}

// 1. Timing reconciliation over the full grid, exact on the virtual clock.
Outcome criterion_timing_grid() {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = grid_data();
  std::size_t cells = 0;
  for (double t_cop : {1.0, 2.0, 3.0, 5.0}) {
    for (int t_com_i = 0; t_com_i <= 8; ++t_com_i) {
      const double t_com = t_com_i;
      for (int t_prime_i = 0; t_prime_i <= t_com_i; ++t_prime_i) {
        const double t_prime = t_prime_i;
        ++cells;

        const RunSummary od =
            run_training(grid_config(Mode::Odsgd, t_cop, t_com, t_prime), data, nullptr);
        TimingModel tm;
        tm.t_cop = {t_cop};
        tm.t_com = t_com;
        tm.t_com_prime = t_prime;
        const double od_cost = steady_iteration_cost(od);
        if (od_cost != predict_iter_time(tm)) {
          std::ostringstream os;
          os << "od cost " << od_cost << " != " << predict_iter_time(tm) << " at t_cop=" << t_cop
             << " t_com=" << t_com << " t_com'=" << t_prime;
          return {false, os.str()};
        }

        const RunSummary sync =
            run_training(grid_config(Mode::Ssgd, t_cop, t_com, t_prime), data, nullptr);
        const double sync_cost = steady_iteration_cost(sync);
        if (sync_cost != t_cop + t_prime) {
          std::ostringstream os;
          os << "ssgd cost " << sync_cost << " != " << t_cop + t_prime << " at t_cop=" << t_cop
             << " t_com'=" << t_prime;
          return {false, os.str()};
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream os;
  os << cells << " grid cells, 0 deviations, " << elapsed << " s";
  return {elapsed < 5.0, os.str()};
}

// 2. The drawn 5-vs-3 example.
Outcome criterion_drawn_example() {
  TimingModel tm;
  tm.t_cop = {3.0};
  tm.t_com = 3.0;
  tm.t_com_prime = 2.0;
  const double t_org = tm.t_cop_for(0) + tm.t_com_prime;
  const double t_new = predict_iter_time(tm);
  const double rate = imp_rate(tm);
  const bool ok = std::abs(t_org - 5.0) < 1e-12 && std::abs(t_new - 3.0) < 1e-12 &&
                  std::abs(rate - 0.40) < 1e-12;
  std::ostringstream os;
  os << "T_org=" << t_org << " T_new=" << t_new << " IMP_Rate=" << rate;
  return {ok, os.str()};
}

// 3. Closed-form properties over 10^4 random triples.
Outcome criterion_rate_properties() {
  Rng rng(424242);
  std::size_t invariance_checks = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    TimingModel tm;
    tm.t_cop = {rng.uniform(0.1, 10.0)};
    tm.t_com = rng.uniform(0.1, 10.0);
    tm.t_com_prime = tm.t_com * rng.uniform();  // strictly below t_com
    const double rate = imp_rate(tm);
    if (!(rate < 0.5)) {
      return {false, "rate reached 0.5 with t_com_prime < t_com"};
    }
    if (tm.t_com <= tm.t_cop[0]) {
      TimingModel moved = tm;
      moved.t_com = tm.t_cop[0] * rng.uniform();
      if (moved.t_com >= moved.t_com_prime) {
        if (imp_rate(moved) != rate) {
          return {false, "rate changed with t_com inside [0, t_cop]"};
        }
        ++invariance_checks;
      }
    }
  }
  std::ostringstream os;
  os << "10000 triples, " << invariance_checks << " invariance checks, 0 violations";
  return {true, os.str()};
}

// 4. Synchronous cluster == sequential large-batch descent.
Outcome criterion_large_batch_oracle() {
  const Dataset data = gen_synthetic(77, 1600, 5, 3, 3.0);
  ClusterConfig cfg;
  cfg.mode = Mode::Ssgd;
  cfg.workers = 4;
  cfg.batch = 8;
  cfg.iterations = 50;
  cfg.seed = 1234;
  cfg.model = ModelSpec{ModelKind::SoftmaxRegression, 5, 3, 0};
  cfg.global_hp.momentum = 0.9;
  cfg.global_hp.eta = 0.2;
  cfg.global_lr = LrSchedule::constant(0.2);
  cfg.timing.t_cop = {1.0};
  cfg.timing.t_com = 1.0;
  cfg.timing.t_com_prime = 1.0;
  const RunSummary run = run_training(cfg, data, nullptr);

  const BatchSampler sampler(data.n, cfg.workers, cfg.batch, cfg.seed);
  const ParamStore oracle = test::sequential_sgd_oracle(
      cfg.model, data, sampler, cfg.workers, cfg.global_hp, cfg.global_lr, 50, cfg.seed);
  const double dev = test::max_relative_deviation(run.final_weights, oracle);
  std::ostringstream os;
  os << "max relative deviation " << dev << " over 50 steps (batch 4x8 vs 32)";
  return {dev < 1e-6, os.str()};
}

// 5. Updater scalar hand values.
Outcome criterion_updater_values() {
  // constant-coefficient compensation
  ParamStore base_c;
  base_c.set(ParamKey{0}, DenseTensor::of({1.0}));
  ParamStore cur_c;
  cur_c.set(ParamKey{0}, DenseTensor::of({1.5}));
  ParamStore g_c;
  g_c.set(ParamKey{0}, DenseTensor::of({0.2}));
  HyperParams hp_c;
  hp_c.lambda = 0.04;
  LocalUpdateContext ctx_c{base_c, cur_c, g_c, 1};
  dcasgd_c_update(ctx_c, hp_c, 0.1);
  const double got_c = cur_c.at(ParamKey{0})[0];
  if (std::abs(got_c - 1.47992) > 1e-9) {
    return {false, "constant-lambda case: got " + format_double(got_c) + ", want 1.47992"};
  }

  // adaptive compensation: one mean-square step then the update
  ParamStore base_a;
  base_a.set(ParamKey{0}, DenseTensor::of({1.0}));
  ParamStore cur_a;
  cur_a.set(ParamKey{0}, DenseTensor::of({1.1}));
  ParamStore g_a;
  g_a.set(ParamKey{0}, DenseTensor::of({0.2}));
  HyperParams hp_a;
  hp_a.lambda = 2.0;
  hp_a.ms_decay = 0.95;
  hp_a.epsilon = 1e-7;
  MeanSquareState ms = MeanSquareState::zeros_like(g_a);
  mean_square_step(ms, g_a, hp_a);
  LocalUpdateContext ctx_a{base_a, cur_a, g_a, 1};
  dcasgd_a_update(ctx_a, hp_a, ms, 0.5);
  const double step = 1.1 - cur_a.at(ParamKey{0})[0];
  // hand evaluation: ms = 0.05*0.04, step = 0.5*(g + lambda/sqrt(ms+eps)*g^2*gap)
  const double hand = 0.5 * (0.2 + 2.0 / std::sqrt(0.05 * 0.04 + 1e-7) * 0.04 * 0.1);
  if (std::abs(step - hand) > 1e-9) {
    return {false, "adaptive case: got step " + format_double(step) + ", want " +
                       format_double(hand)};
  }
  if (std::abs(step - 0.189443) > 1e-5) {
    return {false, "adaptive case drifted from the quoted 0.189443"};
  }

  // lambda = 0 reduces both to the plain step
  for (int adaptive = 0; adaptive < 2; ++adaptive) {
    ParamStore base;
    base.set(ParamKey{0}, DenseTensor::of({0.4}));
    ParamStore cur;
    cur.set(ParamKey{0}, DenseTensor::of({0.9}));
    ParamStore g;
    g.set(ParamKey{0}, DenseTensor::of({0.3}));
    HyperParams hp;
    hp.lambda = 0.0;
    LocalUpdateContext ctx{base, cur, g, 1};
    if (adaptive == 0) {
      dcasgd_c_update(ctx, hp, 0.2);
    } else {
      MeanSquareState st = MeanSquareState::zeros_like(g);
      mean_square_step(st, g, hp);
      dcasgd_a_update(ctx, hp, st, 0.2);
    }
    if (std::abs(cur.at(ParamKey{0})[0] - (0.9 - 0.2 * 0.3)) > 1e-12) {
      return {false, "lambda=0 did not reduce to the plain sgd step"};
    }
  }
  std::ostringstream os;
  os << "1.5->" << format_double(got_c) << ", adaptive step " << format_double(step);
  return {true, os.str()};
}

// 6. Analytic gradients vs central differences, 100 draws over both models.
Outcome criterion_gradient_check() {
  const Dataset data = gen_synthetic(55, 80, 4, 3, 2.5);
  Rng rng(8181);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const ModelSpec spec = (draw % 2 == 0) ? ModelSpec{ModelKind::SoftmaxRegression, 4, 3, 0}
                                           : ModelSpec{ModelKind::Mlp1, 4, 3, 5};
    ParamStore params = init_params(spec, 900 + static_cast<std::uint64_t>(draw));
    for (auto& [key, t] : params) {
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.9, 0.9);
    }
    Batch batch;
    for (int j = 0; j < 6; ++j) batch.indices.push_back(rng.index(data.n));
    const LossGrad lg = forward_backward(spec, params, data, batch);
    const ParamStore fd = finite_diff_grad(spec, params, data, batch, 1e-5);
    for (const auto& [key, g] : lg.grads) {
      const DenseTensor& f = fd.at(key);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (std::abs(g[i]) <= 1e-8) continue;
        worst = std::max(worst, std::abs(g[i] - f[i]) / std::abs(g[i]));
      }
    }
  }
  std::ostringstream os;
  os << "100 draws, max relative error " << worst;
  return {worst < 1e-4, os.str()};
}

// 7. Protocol trace: switching actions at wp-1 and wp, staleness exactly 1.
Outcome criterion_protocol_trace() {
  const Dataset data = gen_synthetic(5, 256, 2, 2, 4.0);
  ClusterConfig cfg;
  cfg.mode = Mode::Odsgd;
  cfg.workers = 2;
  cfg.batch = 2;
  cfg.warmup_iters = 5;
  cfg.iterations = cfg.warmup_iters + 1 + 100;
  cfg.seed = 31;
  cfg.model = ModelSpec{ModelKind::SoftmaxRegression, 2, 2, 0};
  cfg.global_lr = LrSchedule::constant(0.1);
  cfg.timing.t_cop = {1.0};
  cfg.timing.t_com = 2.0;
  cfg.timing.t_com_prime = 2.0;
  const RunSummary s = run_training(cfg, data, nullptr);

  std::int64_t first_copy = -1, first_update = -1;
  for (const TraceEvent& ev : s.trace) {
    if (ev.actor != "worker0") continue;
    if (first_copy < 0 && ev.event == "bak_copy") first_copy = ev.round;
    if (first_update < 0 && ev.event == "local_update_start") first_update = ev.round;
  }
  if (first_copy != 4) {
    return {false, "first backup copy at iteration " + std::to_string(first_copy) + ", want 4"};
  }
  if (first_update != 5) {
    return {false, "first local update at iteration " + std::to_string(first_update) +
                       ", want 5"};
  }
  std::size_t steady = 0;
  for (const auto& [round, staleness] : s.push_staleness) {
    if (round <= static_cast<std::int64_t>(cfg.warmup_iters)) {
      if (staleness != 0) return {false, "warm-up staleness was not 0"};
    } else {
      if (staleness != 1) {
        return {false, "steady staleness " + std::to_string(staleness) + " at round " +
                           std::to_string(round)};
      }
      ++steady;
    }
  }
  std::ostringstream os;
  os << "copy@4, update@5, staleness==1 for " << steady / cfg.workers
     << " steady iterations per worker";
  return {steady == 2 * 100, os.str()};
}

// 8. Dependency engine: exhaustive interleavings of all <=5-op programs.
Outcome criterion_engine_exhaustive() {
  const auto t0 = std::chrono::steady_clock::now();
  const test::ExhaustiveStats stats = test::check_all_programs(5);

  // the drawn write/read/read/write queue: both reads concurrently ready
  DepEngine fig;
  const Ticket w1 = fig.submit(OpSpec{"write-1", {}, {VarId{0}}, 0.0});
  const Ticket r2 = fig.submit(OpSpec{"read-2", {VarId{0}}, {}, 0.0});
  const Ticket r3 = fig.submit(OpSpec{"read-3", {VarId{0}}, {}, 0.0});
  fig.submit(OpSpec{"write-4", {}, {VarId{0}}, 0.0});
  fig.start(w1, 0.0);
  fig.complete(w1, 1.0);
  const std::vector<Ticket> ready = fig.ready();
  const bool fig_ok = ready.size() == 2 && ready[0] == r2 && ready[1] == r3;

  const double elapsed = seconds_since(t0);
  std::ostringstream os;
  os << stats.programs << " programs, " << stats.states << " states, " << stats.violations
     << " violations, " << elapsed << " s";
  if (!stats.first_violation.empty()) os << "; first: " << stats.first_violation;
  if (!fig_ok) os << "; drawn-queue readiness failed";
  return {stats.violations == 0 && fig_ok && elapsed < 10.0, os.str()};
}

// 9. Convergence and speed: one-step delay within a point of synchronous
// accuracy, strictly faster on the virtual clock.
Outcome criterion_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "odlab_acceptance";
  fs::create_directories(dir);

  ExperimentConfig ssgd;
  ssgd.mode = Mode::Ssgd;
  ssgd.workers = 4;
  ssgd.batch = 16;
  ssgd.epochs = 30;
  ssgd.seed = 2026;
  ssgd.model_kind = ModelKind::Mlp1;
  ssgd.hidden = 16;
  ssgd.source = ExperimentConfig::DataSource::Synthetic;
  ssgd.n = 2000;
  ssgd.test_n = 400;
  ssgd.d = 20;
  ssgd.k = 4;
  ssgd.separation = 6.0;
  ssgd.global_hp.eta = 0.3;
  ssgd.global_hp.momentum = 0.9;
  ssgd.global_lr = LrSchedule::constant(0.3);
  ssgd.timing.t_cop = {3.0};
  ssgd.timing.t_com = 3.0;
  ssgd.timing.t_com_prime = 2.0;
  ssgd.out = (dir / "conv_ssgd.csv").string();

  ExperimentConfig od = ssgd;
  od.mode = Mode::Odsgd;
  od.wp = 10;
  od.local_updater = LocalUpdaterKind::Sgd;
  od.local_hp.eta = 0.3;
  od.local_hp.momentum = 0.9;
  od.local_lr = 0.3;
  od.out = (dir / "conv_od.csv").string();

  const ExperimentResult rs = run_experiment(ssgd);
  const ExperimentResult ro = run_experiment(od);

  auto smoothed_final = [](const ExperimentResult& r) {
    std::vector<double> acc;
    for (const MetricsRow& row : r.rows) acc.push_back(row.test_acc);
    return smooth_moving_average(acc, 5, 2).back();
  };
  const double acc_s = smoothed_final(rs);
  const double acc_o = smoothed_final(ro);
  const double gap = std::abs(acc_s - acc_o);
  const bool faster = ro.summary.elapsed < rs.summary.elapsed;
  const double elapsed = seconds_since(t0);

  std::ostringstream os;
  os << "ssgd acc " << acc_s << ", od acc " << acc_o << " (gap " << gap * 100.0
     << " pp), sim time " << ro.summary.elapsed << " vs " << rs.summary.elapsed << ", " << elapsed
     << " s";
  return {gap <= 0.01 && faster && elapsed < 60.0, os.str()};
}

// 10. Growth-rate arithmetic against the published throughput pairs.
Outcome criterion_growth_rate() {
  const double up = gr_rate(309.782, 236.78);
  const double down = gr_rate(149.83, 193.43);
  std::ostringstream os;
  os << "30.83 vs " << up << "; -22.54 vs " << down;
  return {std::abs(up - 30.83) <= 0.01 && std::abs(down - (-22.54)) <= 0.01, os.str()};
}

// 11. Byte-identical reruns.
Outcome criterion_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "odlab_acceptance";
  fs::create_directories(dir);
  ExperimentConfig cfg;
  cfg.mode = Mode::Odsgd;
  cfg.workers = 3;
  cfg.batch = 4;
  cfg.epochs = 4;
  cfg.wp = 3;
  cfg.seed = 99;
  cfg.n = 240;
  cfg.test_n = 60;
  cfg.d = 4;
  cfg.k = 3;
  cfg.model_kind = ModelKind::Mlp1;
  cfg.hidden = 6;
  cfg.local_updater = LocalUpdaterKind::DcasgdA;
  cfg.local_hp.lambda = 2.0;
  cfg.local_hp.ms_decay = 0.95;
  cfg.local_lr = 0.1;
  cfg.timing.t_cop = {2.0};
  cfg.timing.t_com = 3.0;
  cfg.timing.t_com_prime = 2.0;

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  cfg.out = (dir / "det_a.csv").string();
  const ExperimentResult a = run_experiment(cfg);
  cfg.out = (dir / "det_b.csv").string();
  const ExperimentResult b = run_experiment(cfg);
  const bool csv_same = slurp(a.csv_path) == slurp(b.csv_path);
  const bool trace_same = slurp(a.trace_path) == slurp(b.trace_path);
  std::ostringstream os;
  os << "metrics " << (csv_same ? "identical" : "DIFFER") << ", trace "
     << (trace_same ? "identical" : "DIFFER") << " (" << a.summary.trace.size() << " events)";
  return {csv_same && trace_same && !a.rows.empty(), os.str()};
}

}  // namespace

int main() {
  run_criterion("1. timing reconciliation over the full grid", criterion_timing_grid);
  run_criterion("2. 5-vs-3 drawn example (T_org, T_new, IMP_Rate)", criterion_drawn_example);
  run_criterion("3. improvement-rate properties, 10^4 triples", criterion_rate_properties);
  run_criterion("4. synchronous == sequential large-batch oracle", criterion_large_batch_oracle);
  run_criterion("5. compensation updater hand values", criterion_updater_values);
  run_criterion("6. analytic vs central-difference gradients", criterion_gradient_check);
  run_criterion("7. switching protocol and unit staleness", criterion_protocol_trace);
  run_criterion("8. dependency engine exhaustive interleavings", criterion_engine_exhaustive);
  run_criterion("9. convergence parity and speed advantage", criterion_convergence);
  run_criterion("10. growth-rate table arithmetic", criterion_growth_rate);
  run_criterion("11. byte-identical reruns", criterion_determinism);

  std::size_t failed = 0;
  for (const auto& [name, outcome] : g_results) {
    if (!outcome.pass) ++failed;
  }
  std::printf("%zu/%zu criteria passed\n", g_results.size() - failed, g_results.size());
  return failed == 0 ? 0 : 1;
}
