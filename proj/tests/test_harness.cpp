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

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "odlab/harness.hpp"
#include "odlab/rng.hpp"

using namespace odlab;

namespace {

namespace fs = std::filesystem;

fs::path test_dir() {
  const fs::path dir = fs::temp_directory_path() / "odlab_harness_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig small_config(Mode mode, const std::string& out) {
  ExperimentConfig cfg;
  cfg.mode = mode;
  cfg.workers = 2;
  cfg.batch = 4;
  cfg.epochs = 3;
  cfg.wp = 2;
  cfg.seed = 5;
  cfg.n = 80;
  cfg.test_n = 40;
  cfg.d = 3;
  cfg.k = 2;
  cfg.separation = 4.0;
  cfg.model_kind = ModelKind::SoftmaxRegression;
  cfg.global_hp.eta = 0.2;
  cfg.global_lr = LrSchedule::constant(0.2);
  cfg.timing.t_cop = {2.0};
  cfg.timing.t_com = 2.0;
  cfg.timing.t_com_prime = 1.0;
  cfg.out = out;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("metrics csv round trip") {
  Rng rng(31);
  std::vector<MetricsRow> rows;
  for (std::size_t e = 1; e <= 8; ++e) {
    MetricsRow r;
    r.epoch = e;
    r.sim_time = rng.uniform(0, 1000);
    r.train_loss = rng.uniform(0, 3);
    r.train_acc = rng.uniform();
    r.test_acc = rng.uniform();
    r.throughput = rng.uniform(0, 500);
    r.mean_staleness = rng.uniform(0, 4);
    rows.push_back(r);
  }
  const std::string path = (test_dir() / "roundtrip.csv").string();
  write_metrics_csv(rows, path);
  const std::vector<MetricsRow> back = parse_metrics_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].epoch == rows[i].epoch);
    CHECK(back[i].sim_time == rows[i].sim_time);
    CHECK(back[i].train_loss == rows[i].train_loss);
    CHECK(back[i].train_acc == rows[i].train_acc);
    CHECK(back[i].test_acc == rows[i].test_acc);
    CHECK(back[i].throughput == rows[i].throughput);
    CHECK(back[i].mean_staleness == rows[i].mean_staleness);
  }
}

TEST_CASE("malformed metrics files name the line") {
  const std::string path = (test_dir() / "bad.csv").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << kMetricsHeader << "\n1,0,0,0,0,0,0\nnot,a,row\n";
  }
  try {
    parse_metrics_csv(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  {
    std::ofstream out(path, std::ios::binary);
    out << kMetricsHeader << "\n2,0,0,0,0,0,0\n1,0,0,0,0,0,0\n";
  }
  try {
    parse_metrics_csv(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("epoch not increasing") != std::string::npos);
  }
}

TEST_CASE("moving average smoothing") {
  SUBCASE("symmetric mean at the start index") {
    const std::vector<double> s{1, 2, 3, 4, 5};
    const std::vector<double> r = smooth_moving_average(s, 5, 2);
    CHECK(r[0] == 1.0);
    CHECK(r[1] == 2.0);
    CHECK(r[2] == doctest::Approx(3.0));
    CHECK(r[3] == doctest::Approx(3.5));  // shrinking tail window
    CHECK(r[4] == doctest::Approx(4.0));
    CHECK(r.size() == s.size());
  }
  SUBCASE("the cited rule: value at 92 averages 90..94") {
    std::vector<double> s(200);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i * i);
    const std::vector<double> r = smooth_moving_average(s, 5, 91);
    const double expect = (s[90] + s[91] + s[92] + s[93] + s[94]) / 5.0;
    CHECK(r[92] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(r[89] == s[89]);  // untouched before the start index
  }
  SUBCASE("constant series are unchanged") {
    const std::vector<double> s(30, 7.5);
    CHECK(smooth_moving_average(s, 5, 2) == s);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(smooth_moving_average({1, 2, 3}, 4, 2), ConfigError);
    CHECK_THROWS_AS(smooth_moving_average({1, 2, 3}, 5, 1), ConfigError);
  }
}

TEST_CASE("config file parsing") {
  const std::string path = (test_dir() / "exp.cfg").string();
  {
    std::ofstream out(path);
    out << "# comment line\n"
        << "mode = odsgd\n"
        << "cluster.workers = 4\n"
        << "cluster.wp = 7\n"
        << "model.kind = mlp1\n"
        << "model.hidden = 12\n"
        << "optim.eta = 0.3\n"
        << "optim.momentum = 0.9\n"
        << "optim.lr.kind = step\n"
        << "optim.lr.milestones = 80, 120\n"
        << "optim.lr.factor = 0.1\n"
        << "local.optimizer = dcasgd-a\n"
        << "local.eta = 0.05\n"
        << "timing.t_cop = 1,2,3,4\n"
        << "timing.t_com = 3\n"
        << "timing.t_com_prime = 2\n"
        << "out = runs/x.csv  # trailing comment\n";
  }
  const ExperimentConfig cfg = parse_config_file(path);
  CHECK(cfg.mode == Mode::Odsgd);
  CHECK(cfg.workers == 4);
  CHECK(cfg.wp == 7);
  CHECK(cfg.model_kind == ModelKind::Mlp1);
  CHECK(cfg.hidden == 12);
  CHECK(cfg.global_hp.eta == 0.3);
  CHECK(cfg.global_hp.momentum == 0.9);
  CHECK(cfg.global_lr.kind == LrSchedule::Kind::StepDecay);
  CHECK(cfg.global_lr.milestones == std::vector<double>{80, 120});
  CHECK(cfg.local_updater == LocalUpdaterKind::DcasgdA);
  CHECK(cfg.local_lr == 0.05);
  CHECK(cfg.timing.t_cop.size() == 4);
  CHECK(cfg.out == "runs/x.csv");
}

TEST_CASE("config errors carry the field path") {
  const fs::path dir = test_dir();
  auto write_cfg = [&](const std::string& body) {
    const std::string path = (dir / "bad.cfg").string();
    std::ofstream out(path);
    out << body;
    return path;
  };
  try {
    parse_config_file(write_cfg("cluster.workers = squid\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cluster.workers") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_file(write_cfg("nonsense.key = 1\n")), ConfigError);
  CHECK_THROWS_AS(parse_config_file(write_cfg("mode odsgd\n")), ConfigError);
}

TEST_CASE("missing dataset path is a config error naming the field") {
  ExperimentConfig cfg = small_config(Mode::Ssgd, (test_dir() / "x.csv").string());
  cfg.source = ExperimentConfig::DataSource::Idx;
  cfg.images = "";  // not provided
  try {
    run_experiment(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("data.images") != std::string::npos);
  }
  cfg.images = (test_dir() / "absent.idx").string();
  try {
    run_experiment(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("data.images") != std::string::npos);
  }
}

TEST_CASE("experiments are byte-identical across reruns") {
  const fs::path dir = test_dir();
  ExperimentConfig cfg = small_config(Mode::Odsgd, (dir / "det_a.csv").string());
  const ExperimentResult a = run_experiment(cfg);
  cfg.out = (dir / "det_b.csv").string();
  const ExperimentResult b = run_experiment(cfg);
  CHECK(slurp(a.csv_path) == slurp(b.csv_path));
  CHECK(slurp(a.trace_path) == slurp(b.trace_path));
  CHECK(!a.rows.empty());
}

TEST_CASE("measured improvement rate reconciles with the prediction") {
  ExperimentConfig ssgd = small_config(Mode::Ssgd, (test_dir() / "imp_ssgd.csv").string());
  ssgd.iterations = 24;
  ssgd.timing.t_cop = {3.0};
  ssgd.timing.t_com = 3.0;
  ssgd.timing.t_com_prime = 2.0;
  ExperimentConfig od = ssgd;
  od.mode = Mode::Odsgd;
  od.wp = 2;
  od.out = (test_dir() / "imp_od.csv").string();

  const ExperimentResult rs = run_experiment(ssgd);
  const ExperimentResult ro = run_experiment(od);
  const double measured = measured_imp_rate(ro.summary, rs.summary);
  CHECK(measured == doctest::Approx(imp_rate(od.timing)).epsilon(1e-9));
}

TEST_CASE("comparing runs") {
  const fs::path dir = test_dir();
  auto write_run = [&](const std::string& name, double speed) {
    std::vector<MetricsRow> rows;
    for (std::size_t e = 1; e <= 6; ++e) {
      MetricsRow r;
      r.epoch = e;
      r.sim_time = 10.0 * static_cast<double>(e);
      r.train_loss = 1.0 / static_cast<double>(e);
      r.train_acc = 0.9;
      r.test_acc = 0.8 + 0.01 * static_cast<double>(e);
      r.throughput = speed;
      r.mean_staleness = 0.0;
      rows.push_back(r);
    }
    const std::string path = (dir / name).string();
    write_metrics_csv(rows, path);
    return path;
  };
  const std::string base = write_run("base.csv", 236.78);
  const std::string fast = write_run("fast.csv", 309.782);
  const std::string same = write_run("same.csv", 236.78);

  const std::vector<CompareRow> rows = compare_runs(base, {fast, same});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].is_baseline);
  CHECK(rows[0].growth_rate == 0.0);
  CHECK(rows[1].growth_rate == doctest::Approx(30.83).epsilon(0.0004));
  CHECK(rows[2].growth_rate == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_FALSE(rows[1].is_baseline);

  const std::string table = render_comparison(rows);
  CHECK(table.find("base.csv") != std::string::npos);
  CHECK(table.find("yes") != std::string::npos);

  const std::string out = (dir / "cmp.csv").string();
  write_comparison_csv(rows, out);
  CHECK(slurp(out) == table);
}

TEST_CASE("comparison growth rates recompute consistently when swapped") {
  const fs::path dir = test_dir();
  auto one_row = [&](const std::string& name, double speed) {
    std::vector<MetricsRow> rows(1);
    rows[0].epoch = 1;
    rows[0].throughput = speed;
    const std::string path = (dir / name).string();
    write_metrics_csv(rows, path);
    return path;
  };
  const std::string a = one_row("sw_a.csv", 100.0);
  const std::string b = one_row("sw_b.csv", 125.0);
  const double ab = compare_runs(a, {b})[1].growth_rate;
  const double ba = compare_runs(b, {a})[1].growth_rate;
  CHECK(ab == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(ba == doctest::Approx(-20.0).epsilon(1e-12));
  // numerically antisymmetric only through recomputation, not negation
  CHECK(ab != -ba);
}

}  // TEST_SUITE
