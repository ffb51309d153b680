#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "storage_dr/controllers.hpp"
#include "storage_dr/model.hpp"
#include "storage_dr/scenario.hpp"

namespace storage_dr {

inline constexpr double kBoundSlack = 1e-9;  // exact sample-path bounds
inline constexpr double kDriftTol = 1e-6;    // drift inequality, absolute

struct TraceRecord {
  std::size_t t = 0;
  ExogenousSample x;
  ControlAction a;
  double e_before = 0.0;
  double e_after = 0.0;
  double cost = 0.0;
};

struct Metrics {
  std::size_t slots = 0;
  double average_cost = 0.0;
  double cost_se = 0.0;  // batch-means standard error of average_cost
  double min_energy = 0.0;
  double max_energy = 0.0;
  std::size_t bound_violations = 0;
  std::size_t ea_violations = 0;
  std::size_t monotonic_violations = 0;
  std::size_t drift_violations = 0;
  double drift_min_margin = 0.0;  // min over slots of RHS - LHS
};

struct SimOptions {
  std::size_t slots = 10'000;
  double e0 = 0.0;
  bool keep_trace = true;
};

struct SimResult {
  Metrics metrics;
  std::vector<TraceRecord> trace;
};

CostMode cost_mode_for(ControllerKind kind);

/// Sequential rollout: sample, decide, assert feasibility and bounds, cost,
/// dynamics. Any violated constraint or sample-path bound throws
/// TheoremViolation carrying the slot index.
SimResult run_simulation(ControllerKind kind, ExogenousSource& source, const SystemParams& params,
                         const DisutilitySpec& d, const ControllerConfig& cfg,
                         const SimOptions& opts);

SimResult run_simulation(ControllerKind kind, const ScenarioConfig& scenario,
                         const ControllerConfig& cfg, const SimOptions& opts, std::uint64_t seed);

enum class InvariantKind {
  lower_bound,
  upper_bound,
  energy_availability,
  monotone_near_empty,
  monotone_near_full,
  dynamics_mismatch,
  continuity,
  infeasible_action,
  cost_mismatch,
};

const char* to_string(InvariantKind kind);

struct InvariantViolation {
  std::size_t slot;
  InvariantKind kind;
  std::string detail;
};

struct InvariantReport {
  std::vector<InvariantViolation> violations;

  bool clean() const { return violations.empty(); }
  std::size_t count(InvariantKind kind) const;
};

/// Storage bounds, energy availability and both monotonicity properties.
InvariantReport monitor_invariants(const std::vector<TraceRecord>& trace, const SystemParams& params,
                                   const ControllerConfig& cfg);

/// Trace self-consistency: logged dynamics, slot-to-slot continuity, per-slot
/// feasibility and (when a disutility is given) logged cost.
InvariantReport check_trace_consistency(const std::vector<TraceRecord>& trace,
                                        const SystemParams& params, const DisutilitySpec* d,
                                        CostMode mode);

struct DriftDiagnostics {
  double b_const = 0.0;
  std::vector<double> g;    // (E(t) - theta)^2 / 2
  std::vector<double> lhs;  // G(t+1) - G(t)
  std::vector<double> rhs;  // B - (E - theta)(eta_e(d_s+h_s) - eta_i(d_c+r_c))
  double min_margin = 0.0;
  std::size_t failures = 0;
  bool passed = true;
};

DriftDiagnostics drift_check(const std::vector<TraceRecord>& trace, const ControllerConfig& cfg,
                             const SystemParams& params, double tol = kDriftTol);

Metrics summarize(const std::vector<TraceRecord>& trace, const SystemParams& params,
                  const ControllerConfig& cfg, bool storage_controller);

struct RunSummary {
  ControllerKind controller = ControllerKind::dresm;
  double v = 0.0;
  std::string scenario;
  std::uint64_t seed = 0;
  Metrics metrics;
};

struct ComparisonRow {
  ControllerKind controller;
  double v;
  double average_cost;
  double cost_se;
  double savings_percent;  // relative to the baseline run
};

/// (base - alg) / |base| * 100.
double savings_percent(double base_cost, double alg_cost);

/// Savings of every run against the first run of `baseline` controller.
/// Throws ConfigError when runs disagree on scenario or seed, or when there
/// is no baseline run.
std::vector<ComparisonRow> compare_runs(const std::vector<RunSummary>& runs,
                                        ControllerKind baseline = ControllerKind::greedy);

// Output files.
inline constexpr const char* kTraceHeader =
    "t,p,q,r,s,l_tilde,d_l,d_c,d_s,h_s,r_c,e_before,e_after,cost";

void write_trace_csv(const std::vector<TraceRecord>& trace, const DisutilitySpec& d,
                     const std::filesystem::path& path);
std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path, const DisutilitySpec& d);

/// Rows (t, e_before) for first <= t <= last.
std::vector<std::pair<std::size_t, double>> energy_series(const std::vector<TraceRecord>& trace,
                                                          std::size_t first, std::size_t last);
void write_energy_series(const std::vector<TraceRecord>& trace, std::size_t first, std::size_t last,
                         const std::filesystem::path& path);
void write_cost_vs_v(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path);
/// Full comparison table: controller,v,average_cost,cost_se,savings_percent.
void write_comparison_csv(const std::vector<ComparisonRow>& rows, const std::filesystem::path& path);
void write_metrics_json(const Metrics& m, const std::filesystem::path& path);

/// Runs tasks on up to STORAGE_DR_THREADS worker threads (default: hardware
/// concurrency). Results are stored by index, so output order is fixed.
void run_parallel(std::size_t count, const std::function<void(std::size_t)>& task);
std::size_t worker_threads();

}  // namespace storage_dr
