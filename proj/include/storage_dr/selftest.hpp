#pragma once

#include <cstddef>
#include <cstdint>

#include "storage_dr/controllers.hpp"
#include "storage_dr/lp.hpp"
#include "storage_dr/model.hpp"
#include "storage_dr/rng.hpp"

namespace storage_dr {

/// Random parameters satisfying every SystemParams invariant, with
/// c_dis <= L_max.
SystemParams random_params(Rng& rng);

/// Random storage program: residual load positive, negative or zero with
/// equal odds; weights in [-10, 10] with occasional zeros and ties.
StorageLP random_storage_lp(Rng& rng);

/// One DR-ESM decision problem: random parameters, V in [0.5, 50], stored
/// energy uniform on [0, capacity], a random in-bounds sample and two
/// quadratic disutility states.
struct DrInstance {
  SystemParams params;
  ControllerConfig cfg;
  double e = 0.0;
  ExogenousSample x;
  DisutilitySpec d;
};

DrInstance random_dr_instance(Rng& rng);

struct LpSelftestReport {
  std::size_t instances = 0;
  std::size_t below_oracle = 0;   // solver worse than brute force - slack
  std::size_t not_optimal = 0;    // verify_optimality rejected the solution
  std::size_t residual_fail = 0;  // feasibility residual above 1e-9
  double worst_gap = 0.0;         // max(oracle - solver), may be negative
  double worst_residual = 0.0;

  bool passed() const { return below_oracle == 0 && not_optimal == 0 && residual_fail == 0; }
};

LpSelftestReport lp_selftest(std::size_t n, std::uint64_t seed, double step = 0.01);

}  // namespace storage_dr
