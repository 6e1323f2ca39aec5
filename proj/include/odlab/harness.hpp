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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "odlab/cluster.hpp"

namespace odlab {

/// One CSV row of per-epoch run metrics.
struct MetricsRow {
  std::size_t epoch = 0;
  double sim_time = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double throughput = 0.0;
  double mean_staleness = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "epoch,sim_time,train_loss,train_acc,test_acc,throughput,mean_staleness";

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

/// Throws FormatError naming the offending line on any malformed content.
std::vector<MetricsRow> parse_metrics_csv(const std::string& path);

/// Centered moving average applied from start_index on; the tail shrinks to
/// the available suffix. window must be odd and start_index >= window/2.
std::vector<double> smooth_moving_average(const std::vector<double>& series, std::size_t window,
                                          std::size_t start_index);

/// Full description of one experiment, as loaded from a config file.
struct ExperimentConfig {
  Mode mode = Mode::Ssgd;
  std::size_t workers = 1;
  std::size_t devices = 1;
  std::size_t batch = 8;
  std::optional<std::size_t> iterations;  // direct per-worker iteration count
  std::size_t epochs = 1;                 // used when iterations is unset
  std::size_t wp = 0;                     // warm-up iterations
  std::optional<double> wp_epochs;        // alternative warm-up length in epochs
  std::uint64_t seed = 1;

  ModelKind model_kind = ModelKind::SoftmaxRegression;
  std::size_t hidden = 16;

  enum class DataSource { Synthetic, Idx };
  DataSource source = DataSource::Synthetic;
  std::size_t n = 1000;
  std::size_t test_n = 200;
  std::size_t d = 10;
  std::size_t k = 2;
  double separation = 4.0;
  std::string images, labels, test_images, test_labels;

  HyperParams global_hp;
  LrSchedule global_lr = LrSchedule::constant(0.1);
  LocalUpdaterKind local_updater = LocalUpdaterKind::Sgd;
  HyperParams local_hp;
  double local_lr = 0.1;

  TimingModel timing;

  std::string out = "run.csv";
  std::string baseline;  // optional metrics CSV to report GR_Rate against
};

/// Flat `key = value` file with dotted section keys; '#' starts a comment.
/// Unknown keys and malformed values throw ConfigError naming the key.
ExperimentConfig parse_config_file(const std::string& path);

/// Applies a parsed `key=value` map on top of a config (CLI overrides).
void apply_config_entries(ExperimentConfig& cfg,
                          const std::map<std::string, std::string>& entries);

Mode parse_mode(const std::string& text);
LocalUpdaterKind parse_local_updater(const std::string& text);

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  RunSummary summary;
  std::string csv_path;
  std::string trace_path;
  double final_train_acc = 0.0;
  double final_test_acc = 0.0;
  double throughput = 0.0;
  double predicted_imp_rate = 0.0;
  std::optional<double> gr_vs_baseline;
};

/// Runs the configured experiment, writes `<out>` (metrics CSV) and
/// `<out>.trace` (event log), and echoes the headline numbers.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Measured counterpart of the predicted improvement rate: relative
/// steady-state per-iteration saving of `run` against `baseline`.
double measured_imp_rate(const RunSummary& run, const RunSummary& baseline);

struct CompareRow {
  std::string name;
  double final_test_acc = 0.0;  // smoothed when the series is long enough
  double throughput = 0.0;
  double growth_rate = 0.0;  // percent vs baseline
  bool is_baseline = false;
};

/// Per-run final smoothed accuracy, throughput and growth rate vs baseline.
std::vector<CompareRow> compare_runs(const std::string& baseline_csv,
                                     const std::vector<std::string>& other_csvs);

std::string render_comparison(const std::vector<CompareRow>& rows);
void write_comparison_csv(const std::vector<CompareRow>& rows, const std::string& path);

}  // namespace odlab
