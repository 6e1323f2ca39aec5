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

#include "odlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace odlab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + value + "'");
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size() || v < 0) throw std::invalid_argument("bad");
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a non-negative integer: '" + value + "'");
  }
}

}  // namespace

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) {
    out << r.epoch << ',' << format_double(r.sim_time) << ',' << format_double(r.train_loss)
        << ',' << format_double(r.train_acc) << ',' << format_double(r.test_acc) << ','
        << format_double(r.throughput) << ',' << format_double(r.mean_staleness) << '\n';
  }
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw FormatError(path + ": line 1: missing header");
  ++lineno;
  if (trim(line) != kMetricsHeader) {
    throw FormatError(path + ": line 1: unexpected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(trim(line), ',');
    if (fields.size() != 7) {
      throw FormatError(path + ": line " + std::to_string(lineno) + ": expected 7 fields");
    }
    MetricsRow r;
    try {
      r.epoch = parse_count("epoch", fields[0]);
      r.sim_time = parse_double("sim_time", fields[1]);
      r.train_loss = parse_double("train_loss", fields[2]);
      r.train_acc = parse_double("train_acc", fields[3]);
      r.test_acc = parse_double("test_acc", fields[4]);
      r.throughput = parse_double("throughput", fields[5]);
      r.mean_staleness = parse_double("mean_staleness", fields[6]);
    } catch (const ConfigError& e) {
      throw FormatError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!rows.empty() && r.epoch <= rows.back().epoch) {
      throw FormatError(path + ": line " + std::to_string(lineno) + ": epoch not increasing");
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> smooth_moving_average(const std::vector<double>& series, std::size_t window,
                                          std::size_t start_index) {
  if (window % 2 == 0) throw ConfigError("smooth.window: must be odd");
  const std::size_t half = window / 2;
  if (start_index < half) throw ConfigError("smooth.start_index: must be >= window/2");
  std::vector<double> out = series;
  for (std::size_t i = start_index; i < series.size(); ++i) {
    const std::size_t lo = i - half;
    const std::size_t hi = std::min(series.size() - 1, i + half);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

Mode parse_mode(const std::string& text) {
  if (text == "ssgd") return Mode::Ssgd;
  if (text == "asgd") return Mode::Asgd;
  if (text == "dcasgd-c") return Mode::DcasgdC;
  if (text == "dcasgd-a") return Mode::DcasgdA;
  if (text == "odsgd") return Mode::Odsgd;
  throw ConfigError("mode: unknown value '" + text + "'");
}

LocalUpdaterKind parse_local_updater(const std::string& text) {
  if (text == "none") return LocalUpdaterKind::None;
  if (text == "sgd") return LocalUpdaterKind::Sgd;
  if (text == "dcasgd-c") return LocalUpdaterKind::DcasgdC;
  if (text == "dcasgd-a") return LocalUpdaterKind::DcasgdA;
  throw ConfigError("local.optimizer: unknown value '" + text + "'");
}

namespace {

// Learning-rate schedule assembly is deferred until all optim.lr.* keys are
// seen; this collects them.
struct LrDraft {
  std::string kind = "constant";
  std::vector<double> milestones;
  double factor = 0.1;
  double warmup_start = 0.0;
  double warmup_epochs = 0.0;
  double power = 2.0;
};

LrSchedule build_lr(const LrDraft& draft, double eta) {
  LrSchedule inner = LrSchedule::constant(eta);
  if (draft.kind == "constant") {
    inner = LrSchedule::constant(eta);
  } else if (draft.kind == "step") {
    inner = LrSchedule::step_decay(eta, draft.milestones, draft.factor);
  } else if (draft.kind == "poly") {
    inner = LrSchedule::polynomial(eta, draft.power);
  } else {
    throw ConfigError("optim.lr.kind: unknown value '" + draft.kind + "'");
  }
  if (draft.warmup_epochs > 0.0) {
    if (!(draft.warmup_start > 0.0)) {
      throw ConfigError("optim.lr.warmup_start: must be > 0 when warmup is enabled");
    }
    return LrSchedule::linear_warmup(draft.warmup_start, draft.warmup_epochs, inner);
  }
  return inner;
}

}  // namespace

void apply_config_entries(ExperimentConfig& cfg,
                          const std::map<std::string, std::string>& entries) {
  LrDraft lr;
  bool lr_touched = false;
  for (const auto& [key, value] : entries) {
    if (key == "mode") {
      cfg.mode = parse_mode(value);
    } else if (key == "cluster.workers") {
      cfg.workers = parse_count(key, value);
    } else if (key == "cluster.devices") {
      cfg.devices = parse_count(key, value);
    } else if (key == "cluster.batch") {
      cfg.batch = parse_count(key, value);
    } else if (key == "cluster.wp") {
      cfg.wp = parse_count(key, value);
      cfg.wp_epochs.reset();
    } else if (key == "cluster.wp_epochs") {
      cfg.wp_epochs = parse_double(key, value);
    } else if (key == "run.epochs") {
      cfg.epochs = parse_count(key, value);
    } else if (key == "run.iterations") {
      cfg.iterations = parse_count(key, value);
    } else if (key == "run.seed") {
      cfg.seed = parse_count(key, value);
    } else if (key == "model.kind") {
      if (value == "softmax") {
        cfg.model_kind = ModelKind::SoftmaxRegression;
      } else if (value == "mlp1") {
        cfg.model_kind = ModelKind::Mlp1;
      } else {
        throw ConfigError("model.kind: unknown value '" + value + "'");
      }
    } else if (key == "model.hidden") {
      cfg.hidden = parse_count(key, value);
    } else if (key == "data.source") {
      if (value == "synthetic") {
        cfg.source = ExperimentConfig::DataSource::Synthetic;
      } else if (value == "idx") {
        cfg.source = ExperimentConfig::DataSource::Idx;
      } else {
        throw ConfigError("data.source: unknown value '" + value + "'");
      }
    } else if (key == "data.n") {
      cfg.n = parse_count(key, value);
    } else if (key == "data.test_n") {
      cfg.test_n = parse_count(key, value);
    } else if (key == "data.d") {
      cfg.d = parse_count(key, value);
    } else if (key == "data.k") {
      cfg.k = parse_count(key, value);
    } else if (key == "data.separation") {
      cfg.separation = parse_double(key, value);
    } else if (key == "data.images") {
      cfg.images = value;
    } else if (key == "data.labels") {
      cfg.labels = value;
    } else if (key == "data.test_images") {
      cfg.test_images = value;
    } else if (key == "data.test_labels") {
      cfg.test_labels = value;
    } else if (key == "optim.eta") {
      cfg.global_hp.eta = parse_double(key, value);
    } else if (key == "optim.momentum") {
      cfg.global_hp.momentum = parse_double(key, value);
    } else if (key == "optim.weight_decay") {
      cfg.global_hp.weight_decay = parse_double(key, value);
    } else if (key == "optim.lambda") {
      cfg.global_hp.lambda = parse_double(key, value);
    } else if (key == "optim.ms_decay") {
      cfg.global_hp.ms_decay = parse_double(key, value);
    } else if (key == "optim.epsilon") {
      cfg.global_hp.epsilon = parse_double(key, value);
    } else if (key == "optim.lr.kind") {
      lr.kind = value;
      lr_touched = true;
    } else if (key == "optim.lr.milestones") {
      for (const std::string& tok : split(value, ',')) {
        lr.milestones.push_back(parse_double(key, trim(tok)));
      }
      lr_touched = true;
    } else if (key == "optim.lr.factor") {
      lr.factor = parse_double(key, value);
      lr_touched = true;
    } else if (key == "optim.lr.warmup_start") {
      lr.warmup_start = parse_double(key, value);
      lr_touched = true;
    } else if (key == "optim.lr.warmup_epochs") {
      lr.warmup_epochs = parse_double(key, value);
      lr_touched = true;
    } else if (key == "optim.lr.power") {
      lr.power = parse_double(key, value);
      lr_touched = true;
    } else if (key == "local.optimizer") {
      cfg.local_updater = parse_local_updater(value);
    } else if (key == "local.eta") {
      cfg.local_lr = parse_double(key, value);
      cfg.local_hp.eta = cfg.local_lr;
    } else if (key == "local.momentum") {
      cfg.local_hp.momentum = parse_double(key, value);
    } else if (key == "local.lambda") {
      cfg.local_hp.lambda = parse_double(key, value);
    } else if (key == "local.ms_decay") {
      cfg.local_hp.ms_decay = parse_double(key, value);
    } else if (key == "local.epsilon") {
      cfg.local_hp.epsilon = parse_double(key, value);
    } else if (key == "timing.t_cop") {
      cfg.timing.t_cop.clear();
      for (const std::string& tok : split(value, ',')) {
        cfg.timing.t_cop.push_back(parse_double(key, trim(tok)));
      }
    } else if (key == "timing.t_com") {
      cfg.timing.t_com = parse_double(key, value);
    } else if (key == "timing.t_com_prime") {
      cfg.timing.t_com_prime = parse_double(key, value);
    } else if (key == "timing.local_update_cost") {
      cfg.timing.local_update_cost = parse_double(key, value);
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "baseline") {
      cfg.baseline = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  if (lr_touched) {
    cfg.global_lr = build_lr(lr, cfg.global_hp.eta);
  } else {
    // keep the schedule's base in sync with a plain eta override
    if (cfg.global_lr.kind == LrSchedule::Kind::Constant) {
      cfg.global_lr = LrSchedule::constant(cfg.global_hp.eta);
    }
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line.substr(0, line.find('#')));
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": empty key");
    }
    entries[key] = value;
  }
  ExperimentConfig cfg;
  apply_config_entries(cfg, entries);
  return cfg;
}

namespace {

void require_file(const std::string& field, const std::string& path) {
  if (path.empty()) throw ConfigError(field + ": missing dataset path");
  if (!std::filesystem::exists(path)) throw ConfigError(field + ": file not found: " + path);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  Dataset train, test;
  if (cfg.source == ExperimentConfig::DataSource::Synthetic) {
    if (cfg.test_n == 0) throw ConfigError("data.test_n: must be > 0 for synthetic data");
    Dataset all = gen_synthetic(cfg.seed, cfg.n + cfg.test_n, cfg.d, cfg.k, cfg.separation);
    train.n = cfg.n;
    train.d = all.d;
    train.k = all.k;
    train.features.assign(all.features.begin(),
                          all.features.begin() + static_cast<std::ptrdiff_t>(cfg.n * all.d));
    train.labels.assign(all.labels.begin(),
                        all.labels.begin() + static_cast<std::ptrdiff_t>(cfg.n));
    test.n = cfg.test_n;
    test.d = all.d;
    test.k = all.k;
    test.features.assign(all.features.begin() + static_cast<std::ptrdiff_t>(cfg.n * all.d),
                         all.features.end());
    test.labels.assign(all.labels.begin() + static_cast<std::ptrdiff_t>(cfg.n),
                       all.labels.end());
  } else {
    require_file("data.images", cfg.images);
    require_file("data.labels", cfg.labels);
    require_file("data.test_images", cfg.test_images);
    require_file("data.test_labels", cfg.test_labels);
    train = load_idx(cfg.images, cfg.labels);
    test = load_idx(cfg.test_images, cfg.test_labels);
    if (test.d != train.d) throw ConfigError("data.test_images: dims differ from train set");
    test.k = train.k = std::max(train.k, test.k);
  }

  ClusterConfig run_cfg;
  run_cfg.mode = cfg.mode;
  run_cfg.workers = cfg.workers;
  run_cfg.devices = cfg.devices;
  run_cfg.batch = cfg.batch;
  run_cfg.seed = cfg.seed;
  run_cfg.model.kind = cfg.model_kind;
  run_cfg.model.d = train.d;
  run_cfg.model.k = train.k;
  run_cfg.model.hidden = cfg.hidden;
  run_cfg.global_hp = cfg.global_hp;
  run_cfg.global_lr = cfg.global_lr;
  run_cfg.local_updater = cfg.local_updater;
  run_cfg.local_hp = cfg.local_hp;
  run_cfg.local_lr = cfg.local_lr;
  run_cfg.timing = cfg.timing;

  if (cfg.workers == 0) throw ConfigError("cluster.workers: must be >= 1");
  const std::size_t shard = train.n / cfg.workers;
  if (cfg.batch == 0 || shard / std::max<std::size_t>(cfg.batch, 1) == 0) {
    throw ConfigError("cluster.batch: per-worker shard smaller than one batch");
  }
  const std::size_t ipe = shard / cfg.batch;
  run_cfg.iterations = cfg.iterations ? *cfg.iterations : cfg.epochs * ipe;
  run_cfg.warmup_iters =
      cfg.wp_epochs ? static_cast<std::size_t>(*cfg.wp_epochs * static_cast<double>(ipe))
                    : cfg.wp;

  ExperimentResult result;
  result.summary = run_training(run_cfg, train, &test);

  for (const EpochMetrics& em : result.summary.epochs) {
    MetricsRow r;
    r.epoch = em.epoch;
    r.sim_time = em.sim_time;
    r.train_loss = em.train_loss;
    r.train_acc = em.train_acc;
    r.test_acc = em.test_acc;
    r.throughput = em.throughput;
    r.mean_staleness = em.mean_staleness;
    result.rows.push_back(r);
  }
  result.csv_path = cfg.out;
  result.trace_path = cfg.out + ".trace";
  write_metrics_csv(result.rows, result.csv_path);
  {
    std::ofstream out(result.trace_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + result.trace_path);
    for (const TraceEvent& ev : result.summary.trace) {
      out << format_trace_line(ev) << '\n';
    }
  }

  if (!result.rows.empty()) {
    result.final_train_acc = result.rows.back().train_acc;
    result.final_test_acc = result.rows.back().test_acc;
  }
  result.throughput = result.summary.throughput;
  result.predicted_imp_rate =
      (run_cfg.timing.t_cop_for(0) + run_cfg.timing.t_com_prime) > 0.0
          ? imp_rate(run_cfg.timing)
          : 0.0;
  if (!cfg.baseline.empty()) {
    const std::vector<MetricsRow> base = parse_metrics_csv(cfg.baseline);
    if (!base.empty()) {
      result.gr_vs_baseline = gr_rate(result.throughput, base.back().throughput);
    }
  }
  return result;
}

double measured_imp_rate(const RunSummary& run, const RunSummary& baseline) {
  const double t_run = steady_iteration_cost(run);
  const double t_base = steady_iteration_cost(baseline);
  if (!(t_base > 0.0)) throw ProtocolError("measured_imp_rate: baseline cost is zero");
  return (t_base - t_run) / t_base;
}

namespace {

double final_smoothed_test_acc(const std::vector<MetricsRow>& rows) {
  std::vector<double> acc;
  acc.reserve(rows.size());
  for (const MetricsRow& r : rows) acc.push_back(r.test_acc);
  if (acc.empty()) return 0.0;
  if (acc.size() >= 5) {
    return smooth_moving_average(acc, 5, 2).back();
  }
  return acc.back();
}

}  // namespace

std::vector<CompareRow> compare_runs(const std::string& baseline_csv,
                                     const std::vector<std::string>& other_csvs) {
  const std::vector<MetricsRow> base = parse_metrics_csv(baseline_csv);
  if (base.empty()) throw FormatError(baseline_csv + ": no metric rows");
  CompareRow base_row;
  base_row.name = baseline_csv;
  base_row.final_test_acc = final_smoothed_test_acc(base);
  base_row.throughput = base.back().throughput;
  base_row.growth_rate = 0.0;
  base_row.is_baseline = true;

  std::vector<CompareRow> out{base_row};
  for (const std::string& path : other_csvs) {
    const std::vector<MetricsRow> rows = parse_metrics_csv(path);
    if (rows.empty()) throw FormatError(path + ": no metric rows");
    CompareRow row;
    row.name = path;
    row.final_test_acc = final_smoothed_test_acc(rows);
    row.throughput = rows.back().throughput;
    row.growth_rate = gr_rate(rows.back().throughput, base_row.throughput);
    out.push_back(row);
  }
  return out;
}

std::string render_comparison(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  os << "run,final_test_acc,throughput,gr_rate_pct,baseline\n";
  for (const CompareRow& r : rows) {
    os << r.name << ',' << format_double(r.final_test_acc) << ',' << format_double(r.throughput)
       << ',' << format_double(r.growth_rate) << ',' << (r.is_baseline ? "yes" : "no") << '\n';
  }
  return os.str();
}

void write_comparison_csv(const std::vector<CompareRow>& rows, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << render_comparison(rows);
}

}  // namespace odlab
