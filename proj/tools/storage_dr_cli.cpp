// storage-dr: run controllers against scenarios, sweep V, compare against the
// DP oracle and re-verify saved traces.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "storage_dr/controllers.hpp"
#include "storage_dr/dp.hpp"
#include "storage_dr/error.hpp"
#include "storage_dr/model.hpp"
#include "storage_dr/scenario.hpp"
#include "storage_dr/selftest.hpp"
#include "storage_dr/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace storage_dr;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kViolation = 3 };

const std::vector<std::string> kControllers = {"esm", "dresm", "greedy"};

struct SimulateArgs {
  std::string controller = "dresm";
  std::string scenario;
  std::size_t slots = 10'000;
  std::uint64_t seed = 0;
  double v = 5.0;
  double e0 = 0.0;
  std::string out = "out";
  std::size_t window_first = 101;
  std::size_t window_last = 400;
};

struct SweepArgs {
  std::vector<double> v_list = {2, 5, 10, 20, 50};
  std::string scenario;
  std::string controller = "dresm";
  std::string baseline = "greedy";
  std::size_t slots = 10'000;
  std::uint64_t seed = 0;
  std::string out;
};

struct OracleArgs {
  std::string scenario;
  double delta_e = 0.5;
  double delta_a = 0.5;
  double v = 5.0;
  std::size_t slots = 100'000;
  std::uint64_t seed = 0;
};

struct VerifyArgs {
  std::string trace;
  std::string scenario;
  std::optional<double> v;
  std::optional<std::string> controller;
};

struct SelftestArgs {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double step = 0.01;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

void print_metrics(const std::string& label, const Metrics& m) {
  std::printf("%-10s avg_cost=%.6f se=%.6f E=[%.4f, %.4f] violations: bound=%zu ea=%zu monotone=%zu drift=%zu\n",
              label.c_str(), m.average_cost, m.cost_se, m.min_energy, m.max_energy, m.bound_violations,
              m.ea_violations, m.monotonic_violations, m.drift_violations);
}

bool has_violations(const Metrics& m) {
  return m.bound_violations + m.ea_violations + m.monotonic_violations + m.drift_violations > 0;
}

int cmd_simulate(const SimulateArgs& a) {
  const ScenarioConfig sc = load_scenario_config(a.scenario);
  const ControllerKind kind = parse_controller(a.controller);
  const ControllerConfig cfg = make_controller_config(sc.params, a.v);
  SimOptions opts;
  opts.slots = a.slots;
  opts.e0 = a.e0;
  const SimResult res = run_simulation(kind, sc, cfg, opts, a.seed);

  const fs::path dir(a.out);
  ensure_dir(dir);
  write_trace_csv(res.trace, sc.disutility, dir / "trace.csv");
  write_energy_series(res.trace, a.window_first, a.window_last, dir / "energy_series.csv");
  write_metrics_json(res.metrics, dir / "metrics.json");
  const json run = {{"controller", a.controller}, {"v", a.v},       {"seed", a.seed},
                    {"slots", a.slots},           {"e0", a.e0},     {"scenario", a.scenario},
                    {"theta", cfg.theta},         {"capacity", cfg.capacity}};
  write_text(dir / "run.json", run.dump(2) + "\n");

  std::printf("controller=%s V=%g theta=%.4f capacity=%.4f slots=%zu seed=%llu\n", a.controller.c_str(),
              a.v, cfg.theta, cfg.capacity, a.slots, static_cast<unsigned long long>(a.seed));
  print_metrics(a.controller, res.metrics);
  return has_violations(res.metrics) ? kViolation : kOk;
}

int cmd_sweep(const SweepArgs& a) {
  const ScenarioConfig sc = load_scenario_config(a.scenario);
  const ControllerKind kind = parse_controller(a.controller);
  const ControllerKind base = parse_controller(a.baseline);
  if (a.v_list.empty()) throw ConfigError("--v-list is empty");

  // One baseline run (at the first V) followed by one run per V.
  std::vector<RunSummary> runs(a.v_list.size() + 1);
  run_parallel(runs.size(), [&](std::size_t i) {
    const bool is_base = i == 0;
    const double v = is_base ? a.v_list.front() : a.v_list[i - 1];
    const ControllerKind k = is_base ? base : kind;
    SimOptions opts;
    opts.slots = a.slots;
    opts.keep_trace = false;
    const SimResult res = run_simulation(k, sc, make_controller_config(sc.params, v), opts, a.seed);
    runs[i] = {k, v, a.scenario, a.seed, res.metrics};
  });

  const auto rows = compare_runs(runs, base);
  std::printf("%-8s %8s %14s %12s %10s\n", "ctrl", "V", "avg_cost", "se", "savings%");
  for (const auto& r : rows) {
    std::printf("%-8s %8g %14.6f %12.6f %10.2f\n", to_string(r.controller), r.v, r.average_cost,
                r.cost_se, r.savings_percent);
  }
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    ensure_dir(dir);
    write_cost_vs_v(rows, dir / "avg_cost_vs_v.csv");
    write_comparison_csv(rows, dir / "comparison.csv");
  }
  bool bad = false;
  for (const auto& r : runs) bad = bad || has_violations(r.metrics);
  return bad ? kViolation : kOk;
}

int cmd_oracle_gap(const OracleArgs& a) {
  const ScenarioConfig sc = load_scenario_config(a.scenario);
  const ControllerConfig cfg = make_controller_config(sc.params, a.v);
  const StorageMdp mdp = discretize(sc, cfg.capacity, a.delta_e, a.delta_a);
  const RviResult rvi = relative_value_iteration(mdp.mdp);

  SimOptions opts;
  opts.slots = a.slots;
  opts.keep_trace = false;
  const Metrics m = run_simulation(ControllerKind::dresm, sc, cfg, opts, a.seed).metrics;

  const double b_eps = drift_constant(sc.params) * cfg.epsilon;
  const double slack = 0.05 * std::fabs(rvi.gain) + 3.0 * m.cost_se;
  const double lo = rvi.gain - slack;
  const double hi = rvi.gain + b_eps + slack;
  const bool inside = m.average_cost >= lo && m.average_cost <= hi;
  std::printf("states=%zu rvi_iterations=%zu gain=%.6f\n", mdp.mdp.size(), rvi.iterations, rvi.gain);
  std::printf("dresm V=%g capacity=%.4f avg_cost=%.6f se=%.6f\n", a.v, cfg.capacity, m.average_cost,
              m.cost_se);
  std::printf("band [%.6f, %.6f] (B*eps=%.6f slack=%.6f): %s\n", lo, hi, b_eps, slack,
              inside ? "inside" : "OUTSIDE");
  return inside ? kOk : kViolation;
}

int cmd_verify(const VerifyArgs& a) {
  const ScenarioConfig sc = load_scenario_config(a.scenario);
  std::optional<double> v = a.v;
  std::string controller = a.controller.value_or("");
  const fs::path run_file = fs::path(a.trace).parent_path() / "run.json";
  if ((!v || controller.empty()) && fs::exists(run_file)) {
    std::ifstream in(run_file);
    json run;
    try {
      in >> run;
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + run_file.string() + ": " + e.what());
    }
    if (!v && run.contains("v")) v = run.at("v").get<double>();
    if (controller.empty() && run.contains("controller")) controller = run.at("controller").get<std::string>();
  }
  if (!v) throw ConfigError("--v not given and no run.json next to the trace");
  if (controller.empty()) controller = "dresm";
  const ControllerKind kind = parse_controller(controller);
  const ControllerConfig cfg = make_controller_config(sc.params, *v);

  const auto trace = read_trace_csv(a.trace, sc.disutility);
  std::vector<InvariantViolation> all;
  const auto consistency = check_trace_consistency(trace, sc.params, &sc.disutility, cost_mode_for(kind));
  all.insert(all.end(), consistency.violations.begin(), consistency.violations.end());
  std::size_t drift_failures = 0;
  if (kind != ControllerKind::greedy) {
    const auto inv = monitor_invariants(trace, sc.params, cfg);
    all.insert(all.end(), inv.violations.begin(), inv.violations.end());
    const auto drift = drift_check(trace, cfg, sc.params);
    drift_failures = drift.failures;
    std::printf("drift: B=%.4f min_margin=%.6g failures=%zu\n", drift.b_const, drift.min_margin,
                drift.failures);
  }
  std::printf("slots=%zu controller=%s V=%g violations=%zu\n", trace.size(), controller.c_str(), *v,
              all.size());
  const std::size_t shown = std::min<std::size_t>(all.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) {
    std::printf("  slot %zu %s: %s\n", all[i].slot, to_string(all[i].kind), all[i].detail.c_str());
  }
  return all.empty() && drift_failures == 0 ? kOk : kViolation;
}

int cmd_lp_selftest(const SelftestArgs& a) {
  const auto rep = lp_selftest(a.n, a.seed, a.step);
  std::printf("instances=%zu below_oracle=%zu not_optimal=%zu residual_fail=%zu worst_gap=%.3g worst_residual=%.3g\n",
              rep.instances, rep.below_oracle, rep.not_optimal, rep.residual_fail, rep.worst_gap,
              rep.worst_residual);
  return rep.passed() ? kOk : kViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online storage control for demand response"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run one controller on a scenario and write outputs");
  simulate->add_option("--controller", sim.controller, "esm, dresm or greedy")
      ->check(CLI::IsMember(kControllers));
  simulate->add_option("--scenario", sim.scenario, "Scenario JSON file")->required();
  simulate->add_option("--slots", sim.slots, "Number of slots")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--v", sim.v, "Control parameter V")->check(CLI::PositiveNumber);
  simulate->add_option("--e0", sim.e0, "Initial stored energy");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_option("--window-first", sim.window_first, "First slot of the energy series");
  simulate->add_option("--window-last", sim.window_last, "Last slot of the energy series");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run a controller over several V against a baseline");
  sweep->add_option("--v-list", sw.v_list, "Comma separated V values")->delimiter(',');
  sweep->add_option("--scenario", sw.scenario, "Scenario JSON file")->required();
  sweep->add_option("--controller", sw.controller, "Controller under test")
      ->check(CLI::IsMember(kControllers));
  sweep->add_option("--baseline", sw.baseline, "Baseline controller")->check(CLI::IsMember(kControllers));
  sweep->add_option("--slots", sw.slots, "Slots per run")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sw.seed, "RNG seed shared by all runs");
  sweep->add_option("--out", sw.out, "Directory for avg_cost_vs_v.csv and comparison.csv");

  OracleArgs og;
  auto* oracle = app.add_subcommand("oracle-gap", "Compare DR-ESM with the DP optimum of a small instance");
  oracle->add_option("--scenario", og.scenario, "Scenario JSON file")->required();
  oracle->add_option("--delta-e", og.delta_e, "Energy grid step")->check(CLI::PositiveNumber);
  oracle->add_option("--delta-a", og.delta_a, "Action grid step")->check(CLI::PositiveNumber);
  oracle->add_option("--v", og.v, "Control parameter V")->check(CLI::PositiveNumber);
  oracle->add_option("--slots", og.slots, "Rollout length")->check(CLI::PositiveNumber);
  oracle->add_option("--seed", og.seed, "RNG seed");

  VerifyArgs vf;
  auto* verify = app.add_subcommand("verify", "Re-run the monitors and drift check on a saved trace");
  verify->add_option("--trace", vf.trace, "trace.csv")->required()->check(CLI::ExistingFile);
  verify->add_option("--scenario", vf.scenario, "Scenario JSON file")->required();
  verify->add_option("--v", vf.v, "Control parameter V (default: from run.json)");
  verify->add_option("--controller", vf.controller, "Controller (default: from run.json)")
      ->check(CLI::IsMember(kControllers));

  SelftestArgs st;
  auto* selftest = app.add_subcommand("lp-selftest", "Check the LP solver against the grid oracle");
  selftest->add_option("--n", st.n, "Number of random instances");
  selftest->add_option("--seed", st.seed, "RNG seed");
  selftest->add_option("--step", st.step, "Oracle grid step")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*sweep) return cmd_sweep(sw);
    if (*oracle) return cmd_oracle_gap(og);
    if (*verify) return cmd_verify(vf);
    if (*selftest) return cmd_lp_selftest(st);
  } catch (const TheoremViolation& e) {
    std::fprintf(stderr, "theorem violation: %s\n", e.what());
    return kViolation;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfig;
  }
  return kUsage;
}
