#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "storage_dr/model.hpp"
#include "storage_dr/scenario.hpp"

namespace storage_dr {

/// Finite average-cost MDP with sparse transitions.
struct FiniteMdp {
  struct Action {
    double cost = 0.0;
    std::vector<std::pair<std::size_t, double>> next;  // (state, probability)
  };
  std::vector<std::vector<Action>> actions;  // per state

  std::size_t size() const { return actions.size(); }
};

/// Storage control problem on an energy grid. State index is
/// level * outcome_count + outcome; the exogenous outcome of the current slot
/// is observed before acting.
struct StorageMdp {
  FiniteMdp mdp;
  std::vector<double> levels;                          // energy grid, kWh
  std::size_t outcome_count = 0;
  std::vector<std::vector<ControlAction>> controls;    // per state, per action
  CostMode mode = CostMode::demand_response;

  std::size_t state_index(std::size_t level, std::size_t outcome) const {
    return level * outcome_count + outcome;
  }
  std::size_t nearest_level(double e) const;
};

struct DiscretizeOptions {
  std::size_t max_states = 1'000'000;
  std::size_t max_raw_actions = 50'000'000;
};

/// Builds the grid MDP for storage size `capacity`. Every control variable
/// takes values on a delta_a grid (range endpoints included), energy moves
/// to the nearest of the levels {0, delta_e, 2 delta_e, ...} plus `capacity`,
/// and actions that violate energy availability or overflow the storage are
/// dropped. Throws ResourceError above the configured budget.
StorageMdp discretize(const ScenarioConfig& scenario, double capacity, double delta_e,
                      double delta_a, const DiscretizeOptions& opts = {});

struct RviResult {
  double gain = 0.0;
  std::vector<double> bias;
  std::vector<std::size_t> policy;  // minimizing action per state
  std::size_t iterations = 0;
  double span = 0.0;                // span(T h - h) at termination
};

/// Relative value iteration with the aperiodicity transform
/// h <- h + damping (T h - h). Stops when span(T h - h) <= tol; the gain is
/// the midpoint of the bracketing bounds min/max (T h - h). Throws
/// ResourceError when max_iter is reached first.
RviResult relative_value_iteration(const FiniteMdp& mdp, double tol = 1e-9,
                                   std::size_t max_iter = 1'000'000, double damping = 0.5);

using Policy = std::function<ControlAction(double e, const ExogenousSample& x)>;

/// Greedy policy of an RVI solution, acting on the nearest energy level.
Policy policy_from_rvi(const StorageMdp& mdp, const RviResult& rvi, const ScenarioConfig& scenario);

struct RolloutResult {
  double average_cost = 0.0;
  double cost_se = 0.0;
};

/// Average per-slot cost of `policy` under continuous storage dynamics.
/// Throws TheoremViolation with the slot index if the policy emits an
/// infeasible action.
RolloutResult rollout_policy(const Policy& policy, const ScenarioConfig& scenario, CostMode mode,
                             std::size_t slots, std::uint64_t seed, double e0 = 0.0);

}  // namespace storage_dr
