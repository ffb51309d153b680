#pragma once

#include <cstddef>

#include "storage_dr/model.hpp"

namespace storage_dr {

/// The per-slot storage program
///
///   max  h_s*w_h + d_s*w_s - d_c*w_c - r_c*w_r
///   s.t. d_l + d_s = l_plus,  d_l + d_c <= c_grid,  d_c + r_c <= c_char,
///        h_s + d_s <= c_dis,  r_c <= l_minus,  all variables >= 0.
struct StorageLP {
  double w_h = 0.0;
  double w_s = 0.0;
  double w_c = 0.0;
  double w_r = 0.0;
  double l_plus = 0.0;
  double l_minus = 0.0;
  SystemParams params;
};

struct LPSolution {
  double d_l = 0.0;
  double d_c = 0.0;
  double d_s = 0.0;
  double h_s = 0.0;
  double r_c = 0.0;
  double objective = 0.0;

  ControlAction to_action(double l_tilde) const { return {l_tilde, d_l, d_c, d_s, h_s, r_c}; }
};

/// Objective of the storage program at an arbitrary point.
double lp_objective(const StorageLP& lp, const LPSolution& x);

/// Largest violation of the program's constraints at x (0 when feasible).
double lp_residual(const StorageLP& lp, const LPSolution& x);

/// Exact global maximizer by enumerating all bases of the reduced program.
/// Among optimal vertices the lexicographically smallest
/// (d_c, h_s, d_s, r_c, d_l) is returned.
///
/// Throws InfeasibleError if l_plus > c_grid and std::invalid_argument if the
/// residual-load inputs are inconsistent (negative, both positive, or beyond
/// L_max / r_max).
LPSolution solve_storage_lp(const StorageLP& lp);

/// Value of the program only; same work as solve_storage_lp.
double storage_lp_value(const StorageLP& lp);

/// Grid-scan verification oracle at resolution `step`. Independent of the
/// basis enumeration above. Throws ResourceError when the grid would exceed
/// `max_points` evaluations.
LPSolution brute_force_lp(const StorageLP& lp, double step, std::size_t max_points = 200'000'000);

/// Slack allowed between brute_force_lp and the true optimum.
double brute_force_slack(const StorageLP& lp, double step);

/// True iff x is a feasible vertex of the program and no extreme ray of its
/// cone of feasible directions improves the objective.
bool verify_optimality(const LPSolution& x, const StorageLP& lp, double tol = 1e-9);

}  // namespace storage_dr
