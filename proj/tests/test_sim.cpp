#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "storage_dr/error.hpp"
#include "storage_dr/sim.hpp"
#include "storage_dr/selftest.hpp"

using namespace storage_dr;
namespace fs = std::filesystem;

namespace {

const fs::path kData = STORAGE_DR_DATA_DIR;

std::size_t count_lines(const fs::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "storage_dr_test_sim";
  fs::create_directories(dir);
  return dir / name;
}

class FixedSource : public ExogenousSource {
 public:
  explicit FixedSource(ExogenousSample x) : x_(x) {}
  ExogenousSample next(std::size_t, double) override { return x_; }

 private:
  ExogenousSample x_;
};

}  // namespace

TEST_CASE("single greedy slot") {
  const SystemParams p;
  const DisutilitySpec d{{{"H", 1.0, 12.0}}};
  FixedSource src({4, 4, 0, 0, std::nullopt});
  SimOptions opts;
  opts.slots = 1;
  const auto res = run_simulation(ControllerKind::greedy, src, p, d, make_controller_config(p, 5), opts);
  REQUIRE(res.trace.size() == 1);
  CHECK(res.trace[0].a == greedy_decide({4, 4, 0, 0, std::nullopt}, d, p));
  CHECK(res.trace[0].a.l_tilde == doctest::Approx(10));
  CHECK(res.metrics.average_cost == doctest::Approx(44));
}

TEST_CASE("reference run is clean and reproducible") {
  const auto sc = build_reference_scenario();
  const auto cfg = make_controller_config(sc.params, 5);
  SimOptions opts;
  const auto a = run_simulation(ControllerKind::dresm, sc, cfg, opts, 7);
  const auto b = run_simulation(ControllerKind::dresm, sc, cfg, opts, 7);
  REQUIRE(a.trace.size() == 10000);
  bool identical = true;
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    identical = identical && a.trace[i].a == b.trace[i].a && a.trace[i].x == b.trace[i].x &&
                a.trace[i].e_after == b.trace[i].e_after && a.trace[i].cost == b.trace[i].cost;
  }
  CHECK(identical);
  CHECK(a.metrics.average_cost == b.metrics.average_cost);

  CHECK(a.metrics.bound_violations == 0);
  CHECK(a.metrics.ea_violations == 0);
  CHECK(a.metrics.monotonic_violations == 0);
  CHECK(a.metrics.drift_violations == 0);
  CHECK(a.metrics.max_energy <= cfg.capacity);
  CHECK(a.metrics.min_energy >= 0);
  CHECK(monitor_invariants(a.trace, sc.params, cfg).clean());
  CHECK(check_trace_consistency(a.trace, sc.params, &sc.disutility, CostMode::demand_response).clean());
  const auto drift = drift_check(a.trace, cfg, sc.params);
  CHECK(drift.passed);
  CHECK(drift.b_const == doctest::Approx(158.58));
  CHECK(drift.min_margin == doctest::Approx(a.metrics.drift_min_margin));

  double total = 0;
  for (const auto& r : a.trace) total += r.cost;
  CHECK(a.metrics.average_cost == doctest::Approx(total / 10000).epsilon(1e-12));
  const auto again = summarize(a.trace, sc.params, cfg, true);
  CHECK(again.average_cost == doctest::Approx(a.metrics.average_cost).epsilon(1e-12));
  CHECK(again.max_energy == a.metrics.max_energy);
}

TEST_CASE("load-serving ESM run is clean") {
  const auto sc = load_scenario_config(kData / "load_serving.json");
  for (double v : {2.0, 20.0}) {
    const auto cfg = make_controller_config(sc.params, v);
    SimOptions opts;
    opts.slots = 5000;
    opts.e0 = cfg.capacity;
    const auto r = run_simulation(ControllerKind::esm, sc, cfg, opts, 3);
    CHECK(monitor_invariants(r.trace, sc.params, cfg).clean());
    CHECK(drift_check(r.trace, cfg, sc.params).passed);
    CHECK(check_trace_consistency(r.trace, sc.params, &sc.disutility, CostMode::load_serving).clean());
  }
  const auto ref = build_reference_scenario();
  CHECK_THROWS_AS(run_simulation(ControllerKind::esm, ref, make_controller_config(ref.params, 5), {}, 1),
                  ConfigError);
}

TEST_CASE("adversarial inputs keep ESM and DR-ESM within bounds") {
  const SystemParams p;
  const DisutilitySpec d{{{"H", 1.0, 12.0}, {"L", 1.0, 8.0}}};
  for (double v : {1.0, 5.0, 50.0}) {
    const auto cfg = make_controller_config(p, v);
    AdversarialOptions ao{cfg.theta, p.eta_e * std::min(p.l_max, p.c_dis), 3};
    for (ControllerKind k : {ControllerKind::esm, ControllerKind::dresm}) {
      auto src = make_adversarial_source(p, 2, ao, k == ControllerKind::esm, Rng(5));
      SimOptions opts;
      opts.slots = 3000;
      const auto r = run_simulation(k, *src, p, d, cfg, opts);
      CHECK(monitor_invariants(r.trace, p, cfg).clean());
      CHECK(drift_check(r.trace, cfg, p).passed);
    }
  }
}

TEST_CASE("invalid starts are rejected") {
  const auto sc = build_reference_scenario();
  const auto cfg = make_controller_config(sc.params, 5);
  SimOptions opts;
  opts.e0 = cfg.capacity + 1;
  CHECK_THROWS_AS(run_simulation(ControllerKind::dresm, sc, cfg, opts, 1), ConfigError);
  opts.e0 = 0;
  opts.slots = 0;
  CHECK_THROWS_AS(run_simulation(ControllerKind::dresm, sc, cfg, opts, 1), ConfigError);
}

TEST_CASE("monitor flags hand-built violations") {
  const SystemParams p;
  const auto cfg = make_controller_config(p, 5);

  TraceRecord over;
  over.e_before = cfg.capacity + 1;
  over.e_after = cfg.capacity + 1;
  auto rep = monitor_invariants({over}, p, cfg);
  CHECK(rep.count(InvariantKind::upper_bound) == 1);

  TraceRecord ea;
  ea.e_before = 5;
  ea.a = {5, 0, 0, 5, 0, 0};
  ea.e_after = 5 - 6.25;
  rep = monitor_invariants({ea}, p, cfg);
  CHECK(rep.count(InvariantKind::energy_availability) == 1);
  CHECK(rep.count(InvariantKind::lower_bound) == 1);

  TraceRecord fell;
  fell.e_before = 10;
  fell.a = {4, 0, 0, 4, 0, 0};
  fell.e_after = 5;
  CHECK(monitor_invariants({fell}, p, cfg).count(InvariantKind::monotone_near_empty) == 1);

  TraceRecord rose;
  rose.e_before = cfg.theta + 1;
  rose.a = {0, 0, 5, 0, 0, 0};
  rose.e_after = cfg.theta + 5;
  CHECK(monitor_invariants({rose}, p, cfg).count(InvariantKind::monotone_near_full) == 1);

  TraceRecord fine;
  fine.e_before = fine.e_after = 50;
  CHECK(monitor_invariants({fine}, p, cfg).clean());
}

TEST_CASE("drift check arithmetic") {
  const SystemParams p;
  const auto cfg = make_controller_config(p, 5);
  TraceRecord idle;
  idle.e_before = idle.e_after = 40;
  auto d = drift_check({idle}, cfg, p);
  CHECK(d.lhs[0] == 0);
  CHECK(d.rhs[0] == doctest::Approx(158.58));
  CHECK(d.passed);

  TraceRecord full;
  full.e_before = cfg.theta;
  full.a = {12, 0, 0, 12, 0, 0};
  full.e_after = cfg.theta - 15;
  d = drift_check({full}, cfg, p);
  CHECK(d.lhs[0] == doctest::Approx(112.5));
  CHECK(d.lhs[0] <= d.rhs[0]);
  CHECK(d.g[0] == 0);

  // Below theta, falling energy raises the queue backlog.
  TraceRecord jump = idle;
  jump.e_after = idle.e_before - 30;
  CHECK_FALSE(drift_check({jump}, cfg, p).passed);
}

TEST_CASE("comparisons") {
  CHECK(savings_percent(8.24, -1.61) == doctest::Approx(119.54).epsilon(1e-4));
  CHECK(savings_percent(10, 10) == 0);
  CHECK(savings_percent(10, 5) == 50);
  CHECK(savings_percent(-4, -6) == 50);

  Metrics base, alg;
  base.average_cost = 8.24;
  alg.average_cost = -1.61;
  std::vector<RunSummary> runs = {{ControllerKind::greedy, 2, "ref", 1, base},
                                  {ControllerKind::dresm, 2, "ref", 1, alg},
                                  {ControllerKind::dresm, 5, "ref", 1, base}};
  const auto rows = compare_runs(runs);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].savings_percent == 0);
  CHECK(rows[1].savings_percent == doctest::Approx(119.54).epsilon(1e-4));
  CHECK(rows[2].savings_percent == 0);

  runs[2].seed = 2;
  CHECK_THROWS_AS(compare_runs(runs), ConfigError);
  runs[2].seed = 1;
  runs[2].scenario = "other";
  CHECK_THROWS_AS(compare_runs(runs), ConfigError);
  CHECK_THROWS_AS(compare_runs({{ControllerKind::dresm, 2, "ref", 1, alg}}), ConfigError);
}

TEST_CASE("trace files") {
  const auto sc = build_reference_scenario();
  const auto cfg = make_controller_config(sc.params, 10);
  SimOptions opts;
  opts.slots = 3;
  const auto small = run_simulation(ControllerKind::dresm, sc, cfg, opts, 2);
  const auto path = scratch("trace3.csv");
  write_trace_csv(small.trace, sc.disutility, path);
  CHECK(count_lines(path) == 4);
  {
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == kTraceHeader);
  }

  opts.slots = 1000;
  const auto run = run_simulation(ControllerKind::dresm, sc, cfg, opts, 2);
  write_trace_csv(run.trace, sc.disutility, path);
  const auto back = read_trace_csv(path, sc.disutility);
  REQUIRE(back.size() == run.trace.size());
  bool same = true;
  double total = 0;
  for (std::size_t i = 0; i < back.size(); ++i) {
    same = same && back[i].t == run.trace[i].t && back[i].x == run.trace[i].x && back[i].a == run.trace[i].a &&
           back[i].e_before == run.trace[i].e_before && back[i].e_after == run.trace[i].e_after &&
           back[i].cost == run.trace[i].cost;
    total += back[i].cost;
  }
  CHECK(same);
  CHECK(total / 1000 == doctest::Approx(run.metrics.average_cost).epsilon(1e-9));

  const auto series = energy_series(run.trace, 101, 400);
  REQUIRE(series.size() == 300);
  CHECK(series.front().first == 101);
  CHECK(series.back().first == 400);
  const auto spath = scratch("energy.csv");
  write_energy_series(run.trace, 101, 400, spath);
  CHECK(count_lines(spath) == 301);

  const auto mpath = scratch("metrics.json");
  write_metrics_json(run.metrics, mpath);
  CHECK(count_lines(mpath) > 5);

  // A regular file cannot serve as a parent directory, even for root.
  const std::filesystem::path blocker = scratch("blocker");
  write_metrics_json(run.metrics, blocker);
  CHECK_THROWS(write_trace_csv(run.trace, sc.disutility, blocker / "trace.csv"));
  CHECK_THROWS(read_trace_csv(scratch("missing.csv"), sc.disutility));
}

TEST_CASE("tampered traces are detected") {
  const auto sc = build_reference_scenario();
  const auto cfg = make_controller_config(sc.params, 5);
  SimOptions opts;
  opts.slots = 200;
  auto trace = run_simulation(ControllerKind::dresm, sc, cfg, opts, 4).trace;
  CHECK(check_trace_consistency(trace, sc.params, &sc.disutility, CostMode::demand_response).clean());

  auto t1 = trace;
  t1[50].e_after += 0.25;
  const auto r1 = check_trace_consistency(t1, sc.params, &sc.disutility, CostMode::demand_response);
  CHECK(r1.count(InvariantKind::dynamics_mismatch) == 1);
  CHECK(r1.count(InvariantKind::continuity) == 1);

  auto t2 = trace;
  t2[10].cost += 1;
  CHECK(check_trace_consistency(t2, sc.params, &sc.disutility, CostMode::demand_response)
            .count(InvariantKind::cost_mismatch) == 1);

  auto t3 = trace;
  t3[20].a.d_l += 1;
  CHECK_FALSE(check_trace_consistency(t3, sc.params, nullptr, CostMode::demand_response).clean());
}

TEST_CASE("parallel runner keeps result order") {
  setenv("STORAGE_DR_THREADS", "3", 1);
  CHECK(worker_threads() <= 3);
  std::vector<std::size_t> out(50, 0);
  run_parallel(out.size(), [&](std::size_t i) { out[i] = i * i; });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == i * i);
  CHECK_THROWS_AS(run_parallel(4, [](std::size_t i) {
                    if (i == 2) throw ConfigError("boom");
                  }),
                  ConfigError);
  unsetenv("STORAGE_DR_THREADS");
}
