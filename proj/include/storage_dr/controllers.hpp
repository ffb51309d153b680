#pragma once

#include <string>

#include "storage_dr/lp.hpp"
#include "storage_dr/model.hpp"

namespace storage_dr {

enum class ControllerKind { esm, dresm, greedy };

const char* to_string(ControllerKind kind);
ControllerKind parse_controller(const std::string& name);  // throws ConfigError

struct ControllerConfig {
  double v = 1.0;        // cost weight V
  double epsilon = 1.0;  // 1 / V
  double theta = 0.0;    // energy offset of the Lyapunov function
  double capacity = 0.0; // provisioned storage, theta + eta_i * c_char
};

/// theta = max(p_max, q_max) / (epsilon * eta_i) + eta_e * min(L_max, c_dis).
double compute_theta(const SystemParams& params, double epsilon);

/// Builds a consistent configuration for V. Throws ConfigError for V <= 0.
ControllerConfig make_controller_config(const SystemParams& params, double v);

/// Drift constant B = (eta_e^2 c_dis^2 + eta_i^2 c_char^2) / 2.
double drift_constant(const SystemParams& params);

/// Signed per-slot weights. ESM fills w_s; DR-ESM fills w_l and w_d.
struct WeightSet {
  double w_h = 0.0;
  double w_s = 0.0;
  double w_c = 0.0;
  double w_r = 0.0;
  double w_l = 0.0;
  double w_d = 0.0;
};

WeightSet esm_weights(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                      const SystemParams& params);

/// Load-serving controller; needs x.exo_load.
ControlAction esm_decide(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                         const SystemParams& params);

WeightSet dresm_weights(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                        const SystemParams& params);

/// Per-slot DR-ESM objective
///   V D(l, s) - w_d [l - r]+ - h_s w_h + d_l w_l + d_c w_c + r_c w_r
/// evaluated at an arbitrary action.
double dresm_objective(const ControlAction& a, double e, const ExogenousSample& x,
                       const ControllerConfig& cfg, const SystemParams& params,
                       const DisutilitySpec& d);

/// Exact joint minimizer over (l_tilde, storage action); smallest optimal
/// l_tilde on ties.
ControlAction dresm_decide(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                           const SystemParams& params, const DisutilitySpec& d);

struct OracleOptions {
  /// After the grid scan, run golden-section search on each convex branch
  /// (l <= r and l >= r) inside the grid cell that brackets its best point.
  bool refine = false;
  std::size_t max_points = 10'000'000;
};

/// Verification oracle: scan l_tilde over [0, L_max] at `step` with an exact
/// inner storage program at each point.
ControlAction dresm_oracle(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                           const SystemParams& params, const DisutilitySpec& d, double step,
                           OracleOptions opts = {});

/// Lipschitz bound of the DR-ESM objective in l_tilde, used for grid slack.
double dresm_lipschitz(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                       const SystemParams& params, const DisutilitySpec& d);

/// Storage-free myopic baseline.
ControlAction greedy_decide(const ExogenousSample& x, const DisutilitySpec& d,
                            const SystemParams& params);

}  // namespace storage_dr
