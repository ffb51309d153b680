#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace storage_dr {

// All power quantities are kW over a one-hour slot, so kW and kWh coincide.

/// Absolute tolerance for the load-balance equality and other feasibility
/// comparisons of solver output.
inline constexpr double kEqTol = 1e-9;

inline double pos(double x) { return x > 0.0 ? x : 0.0; }

struct SystemParams {
  double eta_e = 1.25;  // discharge coefficient, >= 1
  double eta_i = 0.8;   // charge coefficient, in (0, 1]
  double c_grid = 20.0;
  double c_char = 12.0;
  double c_dis = 12.0;
  double l_max = 12.0;
  double r_max = 9.0;
  double p_max = 14.4;
  double q_max = 14.4;

  bool operator==(const SystemParams&) const = default;
};

/// Index into DisutilitySpec::states.
using StateId = std::size_t;

struct ExogenousSample {
  double p = 0.0;  // buy price
  double q = 0.0;  // sell price
  double r = 0.0;  // renewable power
  StateId s = 0;
  std::optional<double> exo_load;  // given load in load-serving mode

  bool operator==(const ExogenousSample&) const = default;
};

struct ControlAction {
  double l_tilde = 0.0;
  double d_l = 0.0;  // grid -> load
  double d_c = 0.0;  // grid -> storage
  double d_s = 0.0;  // storage -> load
  double h_s = 0.0;  // storage -> grid (sold)
  double r_c = 0.0;  // renewable -> storage

  double discharge() const { return d_s + h_s; }
  double charge() const { return d_c + r_c; }

  bool operator==(const ControlAction&) const = default;
};

struct BatteryState {
  double e = 0.0;
  double capacity = 0.0;

  bool in_bounds(double slack = 0.0) const { return e >= -slack && e <= capacity + slack; }
};

struct DisutilityState {
  std::string name;
  double beta = 1.0;    // curvature
  double target = 0.0;  // target consumption

  bool operator==(const DisutilityState&) const = default;
};

/// Quadratic disutility beta_s * (target_s - l)^2 per system state.
struct DisutilitySpec {
  std::vector<DisutilityState> states;

  const DisutilityState& at(StateId s) const;
  std::optional<StateId> find(const std::string& name) const;

  bool operator==(const DisutilitySpec&) const = default;
};

enum class CostMode { load_serving, demand_response };

enum class ConstraintKind {
  nonnegativity,
  load_balance,
  grid_limit,
  charge_limit,
  discharge_limit,
  renewable_surplus,
  energy_availability,
  consumption_limit,
};

const char* to_string(ConstraintKind kind);

struct Violation {
  ConstraintKind kind;
  double lhs;    // constrained quantity
  double bound;  // what it had to satisfy
  std::string detail;
};

struct ParamViolation {
  std::string field;
  std::string detail;
};

double residual_load(double l_tilde, double r);

/// E(t+1) = E - eta_e (d_s + h_s) + eta_i (d_c + r_c). Throws InfeasibleError
/// when the discharge exceeds the stored energy (beyond kEqTol).
double apply_storage_dynamics(double e, const ControlAction& a, const SystemParams& params);

/// Every violated per-slot constraint; empty means feasible. Uses the action's
/// own l_tilde to form the residual load.
std::vector<Violation> check_feasibility(const ControlAction& a, const ExogenousSample& x, double e,
                                         const SystemParams& params, double tol = kEqTol);

double disutility(double l_tilde, StateId s, const DisutilitySpec& d);

double slot_cost(const ControlAction& a, const ExogenousSample& x, const DisutilitySpec& d,
                 CostMode mode);

std::vector<ParamViolation> validate_params(const SystemParams& params);
std::vector<ParamViolation> validate_disutility(const DisutilitySpec& d, const SystemParams& params);

/// Throws ConfigError listing every violation, if any.
void require_valid(const SystemParams& params);

/// Bound checks for one exogenous sample against the parameter envelope.
std::vector<ParamViolation> validate_sample(const ExogenousSample& x, const SystemParams& params,
                                            std::size_t num_states);

}  // namespace storage_dr
