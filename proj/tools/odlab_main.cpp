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

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "odlab/harness.hpp"

namespace {

int run_command(const std::string& config_path,
                const std::map<std::string, std::string>& overrides) {
  odlab::ExperimentConfig cfg;
  if (!config_path.empty()) {
    cfg = odlab::parse_config_file(config_path);
  }
  odlab::apply_config_entries(cfg, overrides);

  odlab::ExperimentResult result = odlab::run_experiment(cfg);
  std::printf("mode            %s\n", odlab::to_string(cfg.mode));
  std::printf("iterations      %zu x %zu workers\n", result.summary.iterations_per_worker,
              result.summary.workers);
  std::printf("sim time        %s\n", odlab::format_double(result.summary.elapsed).c_str());
  std::printf("throughput      %.3f samples/unit\n", result.throughput);
  if (!result.rows.empty()) {
    std::printf("final train acc %.4f\n", result.final_train_acc);
    std::printf("final test acc  %.4f\n", result.final_test_acc);
  }
  std::printf("predicted imp   %.4f\n", result.predicted_imp_rate);
  if (result.gr_vs_baseline) {
    std::printf("gr vs baseline  %.2f%%\n", *result.gr_vs_baseline);
  }
  std::printf("metrics csv     %s\n", result.csv_path.c_str());
  std::printf("event trace     %s\n", result.trace_path.c_str());
  return 0;
}

int compare_command(const std::string& baseline, const std::vector<std::string>& others,
                    const std::string& out) {
  const std::vector<odlab::CompareRow> rows = odlab::compare_runs(baseline, others);
  std::cout << odlab::render_comparison(rows);
  if (!out.empty()) {
    odlab::write_comparison_csv(rows, out);
    std::cout << "written: " << out << "\n";
  }
  return 0;
}

int predict_command(double t_cop, double t_com, double t_com_prime) {
  odlab::TimingModel tm;
  tm.t_cop = {t_cop};
  tm.t_com = t_com;
  tm.t_com_prime = t_com_prime;
  tm.validate(1);
  std::printf("T_org     %s\n", odlab::format_double(t_cop + t_com_prime).c_str());
  std::printf("T_new     %s\n", odlab::format_double(odlab::predict_iter_time(tm)).c_str());
  std::printf("IMP_Rate  %s\n", odlab::format_double(odlab::imp_rate(tm)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"odlab: a desk-scale parameter-server training laboratory"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run one experiment and write metrics");
  std::string config_path;
  run->add_option("--config", config_path, "flat key=value config file");
  std::string mode, optimizer_local, out;
  std::int64_t workers = -1, wp = -1, seed = -1, devices = -1, batch = -1, iterations = -1,
               epochs = -1;
  double t_cop = -1.0, t_com = -1.0, t_com_prime = -1.0;
  run->add_option("--mode", mode, "ssgd|asgd|dcasgd-c|dcasgd-a|odsgd");
  run->add_option("--workers", workers, "number of worker nodes");
  run->add_option("--devices", devices, "devices per worker");
  run->add_option("--batch", batch, "per-worker mini-batch size");
  run->add_option("--iterations", iterations, "per-worker iteration count");
  run->add_option("--epochs", epochs, "epoch count (when --iterations is unset)");
  run->add_option("--wp", wp, "warm-up iterations (odsgd)");
  run->add_option("--seed", seed, "run seed");
  run->add_option("--optimizer-local", optimizer_local, "none|sgd|dcasgd-c|dcasgd-a");
  run->add_option("--t-cop", t_cop, "per-iteration compute time");
  run->add_option("--t-com", t_com, "overlapped-mode round-trip time");
  run->add_option("--t-com-prime", t_com_prime, "synchronous round-trip time");
  run->add_option("--out", out, "metrics CSV path");

  // compare
  auto* compare = app.add_subcommand("compare", "compare metric files against a baseline");
  std::string baseline, compare_out;
  std::vector<std::string> others;
  compare->add_option("--baseline", baseline, "baseline metrics CSV")->required();
  compare->add_option("runs", others, "metrics CSVs to compare")->required();
  compare->add_option("--out", compare_out, "comparison CSV path");

  // predict
  auto* predict = app.add_subcommand("predict", "evaluate the iteration-time model");
  double p_cop = 1.0, p_com = 0.0, p_com_prime = 0.0;
  predict->add_option("--t-cop", p_cop)->required();
  predict->add_option("--t-com", p_com)->required();
  predict->add_option("--t-com-prime", p_com_prime)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      std::map<std::string, std::string> overrides;
      if (!mode.empty()) overrides["mode"] = mode;
      if (workers >= 0) overrides["cluster.workers"] = std::to_string(workers);
      if (devices >= 0) overrides["cluster.devices"] = std::to_string(devices);
      if (batch >= 0) overrides["cluster.batch"] = std::to_string(batch);
      if (iterations >= 0) overrides["run.iterations"] = std::to_string(iterations);
      if (epochs >= 0) overrides["run.epochs"] = std::to_string(epochs);
      if (wp >= 0) overrides["cluster.wp"] = std::to_string(wp);
      if (seed >= 0) overrides["run.seed"] = std::to_string(seed);
      if (!optimizer_local.empty()) overrides["local.optimizer"] = optimizer_local;
      if (t_cop >= 0.0) overrides["timing.t_cop"] = odlab::format_double(t_cop);
      if (t_com >= 0.0) overrides["timing.t_com"] = odlab::format_double(t_com);
      if (t_com_prime >= 0.0) overrides["timing.t_com_prime"] = odlab::format_double(t_com_prime);
      if (!out.empty()) overrides["out"] = out;
      return run_command(config_path, overrides);
    }
    if (compare->parsed()) {
      return compare_command(baseline, others, compare_out);
    }
    if (predict->parsed()) {
      return predict_command(p_cop, p_com, p_com_prime);
    }
  } catch (const odlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const odlab::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 3;
  } catch (const odlab::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
