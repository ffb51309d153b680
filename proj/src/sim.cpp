#include "storage_dr/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "storage_dr/error.hpp"

namespace storage_dr {

namespace {

bool is_storage(ControllerKind kind) { return kind != ControllerKind::greedy; }

double low_energy_threshold(const SystemParams& p) { return p.eta_e * std::min(p.l_max, p.c_dis); }

double batch_se(const std::vector<double>& costs) {
  const std::size_t n = costs.size();
  if (n < 2) return 0.0;
  std::size_t batches = n >= 200 ? 20 : n;
  const std::size_t per = n / batches;
  std::vector<double> means;
  means.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) s += costs[i];
    means.push_back(s / static_cast<double>(per));
  }
  double mean = 0.0;
  for (double m : means) mean += m;
  mean /= static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

double drift_lhs(double e_before, double e_after, double theta) {
  return 0.5 * (e_after - theta) * (e_after - theta) - 0.5 * (e_before - theta) * (e_before - theta);
}

double drift_rhs(const TraceRecord& rec, double theta, double b, const SystemParams& p) {
  return b - (rec.e_before - theta) * (p.eta_e * rec.a.discharge() - p.eta_i * rec.a.charge());
}

// Per-slot sample-path checks shared by the simulator and the monitor.
template <typename Report>
void check_slot(const TraceRecord& rec, const SystemParams& p, const ControllerConfig& cfg,
                Report&& report) {
  const double e = rec.e_before;
  const double next = rec.e_after;
  char buf[160];
  if (e < -kBoundSlack || next < -kBoundSlack) {
    std::snprintf(buf, sizeof buf, "E below 0 (%.17g -> %.17g)", e, next);
    report(InvariantKind::lower_bound, buf);
  }
  if (e > cfg.capacity + kBoundSlack || next > cfg.capacity + kBoundSlack) {
    std::snprintf(buf, sizeof buf, "E above capacity %.17g (%.17g -> %.17g)", cfg.capacity, e, next);
    report(InvariantKind::upper_bound, buf);
  }
  if (p.eta_e * rec.a.discharge() > e + kBoundSlack) {
    std::snprintf(buf, sizeof buf, "discharge needs %.17g but E = %.17g",
                  p.eta_e * rec.a.discharge(), e);
    report(InvariantKind::energy_availability, buf);
  }
  if (e < low_energy_threshold(p) && next < e - kBoundSlack) {
    std::snprintf(buf, sizeof buf, "E fell from %.17g to %.17g below the low-energy threshold", e, next);
    report(InvariantKind::monotone_near_empty, buf);
  }
  if (e > cfg.theta && next > e + kBoundSlack) {
    std::snprintf(buf, sizeof buf, "E rose from %.17g to %.17g above theta", e, next);
    report(InvariantKind::monotone_near_full, buf);
  }
}

}  // namespace

CostMode cost_mode_for(ControllerKind kind) {
  return kind == ControllerKind::esm ? CostMode::load_serving : CostMode::demand_response;
}

const char* to_string(InvariantKind kind) {
  switch (kind) {
    case InvariantKind::lower_bound: return "lower_bound";
    case InvariantKind::upper_bound: return "upper_bound";
    case InvariantKind::energy_availability: return "energy_availability";
    case InvariantKind::monotone_near_empty: return "monotone_near_empty";
    case InvariantKind::monotone_near_full: return "monotone_near_full";
    case InvariantKind::dynamics_mismatch: return "dynamics_mismatch";
    case InvariantKind::continuity: return "continuity";
    case InvariantKind::infeasible_action: return "infeasible_action";
    case InvariantKind::cost_mismatch: return "cost_mismatch";
  }
  return "unknown";
}

std::size_t InvariantReport::count(InvariantKind kind) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [kind](const auto& v) { return v.kind == kind; }));
}

SimResult run_simulation(ControllerKind kind, ExogenousSource& source, const SystemParams& params,
                         const DisutilitySpec& d, const ControllerConfig& cfg,
                         const SimOptions& opts) {
  require_valid(params);
  if (opts.slots < 1) throw ConfigError("simulation needs at least one slot");
  const bool storage = is_storage(kind);
  if (storage && !(opts.e0 >= 0.0 && opts.e0 <= cfg.capacity)) {
    throw ConfigError("initial energy must lie in [0, capacity]");
  }
  const CostMode mode = cost_mode_for(kind);
  const double b = drift_constant(params);

  SimResult result;
  if (opts.keep_trace) result.trace.reserve(opts.slots);
  std::vector<double> costs;
  costs.reserve(opts.slots);

  Metrics& m = result.metrics;
  m.slots = opts.slots;
  double e = storage ? opts.e0 : 0.0;
  m.min_energy = m.max_energy = e;
  m.drift_min_margin = std::numeric_limits<double>::infinity();
  double total = 0.0;

  for (std::size_t t = 0; t < opts.slots; ++t) {
    const ExogenousSample x = source.next(t, e);
    ControlAction a;
    switch (kind) {
      case ControllerKind::esm: a = esm_decide(e, x, cfg, params); break;
      case ControllerKind::dresm: a = dresm_decide(e, x, cfg, params, d); break;
      case ControllerKind::greedy: a = greedy_decide(x, d, params); break;
    }

    const auto bad = check_feasibility(a, x, e, params);
    if (!bad.empty()) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "infeasible action: " << to_string(bad.front().kind) << " (" << bad.front().detail
          << ": " << bad.front().lhs << " vs " << bad.front().bound << ")";
      throw TheoremViolation(t, msg.str());
    }

    TraceRecord rec;
    rec.t = t;
    rec.x = x;
    rec.a = a;
    rec.e_before = e;
    try {
      rec.e_after = apply_storage_dynamics(e, a, params);
    } catch (const InfeasibleError& err) {
      throw TheoremViolation(t, err.what());
    }
    rec.cost = slot_cost(a, x, d, mode);

    if (storage) {
      check_slot(rec, params, cfg, [t](InvariantKind k, const std::string& what) {
        throw TheoremViolation(t, std::string(to_string(k)) + ": " + what);
      });
      const double margin = drift_rhs(rec, cfg.theta, b, params) -
                            drift_lhs(rec.e_before, rec.e_after, cfg.theta);
      m.drift_min_margin = std::min(m.drift_min_margin, margin);
      if (margin < -kDriftTol) ++m.drift_violations;
    }

    total += rec.cost;
    costs.push_back(rec.cost);
    e = rec.e_after;
    m.min_energy = std::min(m.min_energy, e);
    m.max_energy = std::max(m.max_energy, e);
    if (opts.keep_trace) result.trace.push_back(rec);
  }

  if (!storage) m.drift_min_margin = 0.0;
  m.average_cost = total / static_cast<double>(opts.slots);
  m.cost_se = batch_se(costs);
  return result;
}

SimResult run_simulation(ControllerKind kind, const ScenarioConfig& scenario,
                         const ControllerConfig& cfg, const SimOptions& opts, std::uint64_t seed) {
  if (kind == ControllerKind::esm && !scenario.has_exogenous_load()) {
    throw ConfigError("ESM needs a scenario with an exogenous load in every outcome");
  }
  auto source = make_source(scenario, Rng(seed));
  return run_simulation(kind, *source, scenario.params, scenario.disutility, cfg, opts);
}

InvariantReport monitor_invariants(const std::vector<TraceRecord>& trace, const SystemParams& params,
                                   const ControllerConfig& cfg) {
  InvariantReport report;
  for (const auto& rec : trace) {
    check_slot(rec, params, cfg, [&](InvariantKind k, const std::string& what) {
      report.violations.push_back({rec.t, k, what});
    });
  }
  return report;
}

InvariantReport check_trace_consistency(const std::vector<TraceRecord>& trace,
                                        const SystemParams& params, const DisutilitySpec* d,
                                        CostMode mode) {
  InvariantReport report;
  auto flag = [&](std::size_t t, InvariantKind k, std::string what) {
    report.violations.push_back({t, k, std::move(what)});
  };
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& rec = trace[i];
    const double expect = rec.e_before - params.eta_e * rec.a.discharge() + params.eta_i * rec.a.charge();
    if (std::abs(expect - rec.e_after) > kBoundSlack * std::max(1.0, std::abs(expect))) {
      flag(rec.t, InvariantKind::dynamics_mismatch, "logged e_after disagrees with the storage dynamics");
    }
    if (i > 0 && std::abs(trace[i - 1].e_after - rec.e_before) > kBoundSlack * std::max(1.0, std::abs(rec.e_before))) {
      flag(rec.t, InvariantKind::continuity, "e_before differs from previous e_after");
    }
    if (i > 0 && rec.t != trace[i - 1].t + 1) {
      flag(rec.t, InvariantKind::continuity, "slot indices are not consecutive");
    }
    for (const auto& v : check_feasibility(rec.a, rec.x, rec.e_before, params)) {
      if (v.kind == ConstraintKind::energy_availability) continue;  // reported by the monitor
      flag(rec.t, InvariantKind::infeasible_action, std::string(to_string(v.kind)) + ": " + v.detail);
    }
    if (mode == CostMode::load_serving && rec.x.exo_load &&
        std::abs(*rec.x.exo_load - rec.a.l_tilde) > kEqTol) {
      flag(rec.t, InvariantKind::infeasible_action, "consumption differs from the given load");
    }
    if (d != nullptr) {
      const double cost = slot_cost(rec.a, rec.x, *d, mode);
      if (std::abs(cost - rec.cost) > 1e-9 * std::max(1.0, std::abs(cost))) {
        flag(rec.t, InvariantKind::cost_mismatch, "logged cost disagrees with the cost model");
      }
    }
  }
  return report;
}

DriftDiagnostics drift_check(const std::vector<TraceRecord>& trace, const ControllerConfig& cfg,
                             const SystemParams& params, double tol) {
  DriftDiagnostics diag;
  diag.b_const = drift_constant(params);
  diag.min_margin = std::numeric_limits<double>::infinity();
  diag.g.reserve(trace.size());
  diag.lhs.reserve(trace.size());
  diag.rhs.reserve(trace.size());
  for (const auto& rec : trace) {
    const double gap = rec.e_before - cfg.theta;
    diag.g.push_back(0.5 * gap * gap);
    const double lhs = drift_lhs(rec.e_before, rec.e_after, cfg.theta);
    const double rhs = drift_rhs(rec, cfg.theta, diag.b_const, params);
    diag.lhs.push_back(lhs);
    diag.rhs.push_back(rhs);
    diag.min_margin = std::min(diag.min_margin, rhs - lhs);
    if (lhs > rhs + tol) ++diag.failures;
  }
  if (trace.empty()) diag.min_margin = 0.0;
  diag.passed = diag.failures == 0;
  return diag;
}

Metrics summarize(const std::vector<TraceRecord>& trace, const SystemParams& params,
                  const ControllerConfig& cfg, bool storage_controller) {
  Metrics m;
  m.slots = trace.size();
  if (trace.empty()) return m;
  std::vector<double> costs;
  costs.reserve(trace.size());
  m.min_energy = m.max_energy = trace.front().e_before;
  double total = 0.0;
  for (const auto& rec : trace) {
    total += rec.cost;
    costs.push_back(rec.cost);
    m.min_energy = std::min({m.min_energy, rec.e_before, rec.e_after});
    m.max_energy = std::max({m.max_energy, rec.e_before, rec.e_after});
  }
  m.average_cost = total / static_cast<double>(trace.size());
  m.cost_se = batch_se(costs);
  if (storage_controller) {
    const auto report = monitor_invariants(trace, params, cfg);
    m.bound_violations = report.count(InvariantKind::lower_bound) + report.count(InvariantKind::upper_bound);
    m.ea_violations = report.count(InvariantKind::energy_availability);
    m.monotonic_violations = report.count(InvariantKind::monotone_near_empty) +
                             report.count(InvariantKind::monotone_near_full);
    const auto drift = drift_check(trace, cfg, params);
    m.drift_violations = drift.failures;
    m.drift_min_margin = drift.min_margin;
  }
  return m;
}

double savings_percent(double base_cost, double alg_cost) {
  if (base_cost == 0.0) return alg_cost == 0.0 ? 0.0 : (alg_cost < 0.0 ? INFINITY : -INFINITY);
  return (base_cost - alg_cost) / std::abs(base_cost) * 100.0;
}

std::vector<ComparisonRow> compare_runs(const std::vector<RunSummary>& runs, ControllerKind baseline) {
  if (runs.empty()) return {};
  for (const auto& r : runs) {
    if (r.scenario != runs.front().scenario || r.seed != runs.front().seed) {
      throw ConfigError("compare_runs: runs do not share scenario and seed");
    }
  }
  const auto base = std::find_if(runs.begin(), runs.end(),
                                 [baseline](const RunSummary& r) { return r.controller == baseline; });
  if (base == runs.end()) throw ConfigError("compare_runs: no baseline run");
  std::vector<ComparisonRow> rows;
  for (const auto& r : runs) {
    rows.push_back({r.controller, r.v, r.metrics.average_cost, r.metrics.cost_se,
                    savings_percent(base->metrics.average_cost, r.metrics.average_cost)});
  }
  return rows;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const std::vector<TraceRecord>& trace, const DisutilitySpec& d,
                     const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.t << ',' << fmt17(r.x.p) << ',' << fmt17(r.x.q) << ',' << fmt17(r.x.r) << ','
        << d.at(r.x.s).name << ',' << fmt17(r.a.l_tilde) << ',' << fmt17(r.a.d_l) << ','
        << fmt17(r.a.d_c) << ',' << fmt17(r.a.d_s) << ',' << fmt17(r.a.h_s) << ','
        << fmt17(r.a.r_c) << ',' << fmt17(r.e_before) << ',' << fmt17(r.e_after) << ','
        << fmt17(r.cost) << '\n';
  }
  finish(out, path);
}

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path, const DisutilitySpec& d) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw ConfigError(path.string() + ": line 1: unexpected trace header");
  }
  std::vector<TraceRecord> trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    auto where = [&] { return path.string() + ": line " + std::to_string(lineno); };
    if (cells.size() != 14) throw ConfigError(where() + ": expected 14 fields");
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument("trailing characters");
        return v;
      } catch (const std::exception&) {
        throw ConfigError(where() + ": field " + std::to_string(i + 1) + " is not a number");
      }
    };
    TraceRecord r;
    r.t = static_cast<std::size_t>(num(0));
    r.x.p = num(1);
    r.x.q = num(2);
    r.x.r = num(3);
    const auto id = d.find(cells[4]);
    if (!id) throw ConfigError(where() + ": unknown state '" + cells[4] + "'");
    r.x.s = *id;
    r.a = {num(5), num(6), num(7), num(8), num(9), num(10)};
    r.e_before = num(11);
    r.e_after = num(12);
    r.cost = num(13);
    trace.push_back(r);
  }
  return trace;
}

std::vector<std::pair<std::size_t, double>> energy_series(const std::vector<TraceRecord>& trace,
                                                          std::size_t first, std::size_t last) {
  std::vector<std::pair<std::size_t, double>> rows;
  for (const auto& r : trace) {
    if (r.t >= first && r.t <= last) rows.emplace_back(r.t, r.e_before);
  }
  return rows;
}

void write_energy_series(const std::vector<TraceRecord>& trace, std::size_t first, std::size_t last,
                         const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "t,energy\n";
  for (const auto& [t, e] : energy_series(trace, first, last)) out << t << ',' << fmt17(e) << '\n';
  finish(out, path);
}

void write_cost_vs_v(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "v,average_cost\n";
  for (const auto& r : rows) {
    if (r.controller == ControllerKind::greedy) continue;
    out << fmt17(r.v) << ',' << fmt17(r.average_cost) << '\n';
  }
  finish(out, path);
}

void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "controller,v,average_cost,cost_se,savings_percent\n";
  for (const auto& r : rows) {
    out << to_string(r.controller) << ',' << fmt17(r.v) << ',' << fmt17(r.average_cost) << ','
        << fmt17(r.cost_se) << ',' << fmt17(r.savings_percent) << '\n';
  }
  finish(out, path);
}

void write_metrics_json(const Metrics& m, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "{\n"
      << "  \"slots\": " << m.slots << ",\n"
      << "  \"average_cost\": " << fmt17(m.average_cost) << ",\n"
      << "  \"cost_se\": " << fmt17(m.cost_se) << ",\n"
      << "  \"min_energy\": " << fmt17(m.min_energy) << ",\n"
      << "  \"max_energy\": " << fmt17(m.max_energy) << ",\n"
      << "  \"bound_violations\": " << m.bound_violations << ",\n"
      << "  \"ea_violations\": " << m.ea_violations << ",\n"
      << "  \"monotonic_violations\": " << m.monotonic_violations << ",\n"
      << "  \"drift_violations\": " << m.drift_violations << ",\n"
      << "  \"drift_min_margin\": " << fmt17(m.drift_min_margin) << "\n"
      << "}\n";
  finish(out, path);
}

std::size_t worker_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STORAGE_DR_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

void run_parallel(std::size_t count, const std::function<void(std::size_t)>& task) {
  const std::size_t threads = std::min(worker_threads(), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace storage_dr
