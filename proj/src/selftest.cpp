#include "storage_dr/selftest.hpp"

#include <algorithm>
#include <limits>

namespace storage_dr {

namespace {

double between(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

}  // namespace

SystemParams random_params(Rng& rng) {
  SystemParams p;
  p.eta_e = between(rng, 1.0, 1.5);
  p.eta_i = between(rng, 0.6, 1.0);
  p.l_max = between(rng, 1.0, 15.0);
  p.c_dis = between(rng, 0.5, 1.0) * p.l_max;
  p.c_char = between(rng, 1.0, 15.0);
  p.c_grid = p.eta_e * p.l_max / p.eta_i * between(rng, 1.0, 1.5);
  p.r_max = between(rng, 1.0, 12.0);
  p.p_max = between(rng, 1.0, 20.0);
  p.q_max = between(rng, 1.0, 20.0);
  return p;
}

StorageLP random_storage_lp(Rng& rng) {
  StorageLP lp;
  lp.params = random_params(rng);
  switch (rng.below(3)) {
    case 0: lp.l_plus = between(rng, 0.0, lp.params.l_max); break;
    case 1: lp.l_minus = between(rng, 0.0, lp.params.r_max); break;
    default: break;
  }
  double* w[] = {&lp.w_h, &lp.w_s, &lp.w_c, &lp.w_r};
  for (double* x : w) *x = between(rng, -10.0, 10.0);
  if (rng.uniform() < 0.1) *w[rng.below(4)] = 0.0;
  if (rng.uniform() < 0.1) *w[rng.below(4)] = *w[rng.below(4)];
  return lp;
}

DrInstance random_dr_instance(Rng& rng) {
  DrInstance in;
  in.params = random_params(rng);
  in.cfg = make_controller_config(in.params, between(rng, 0.5, 50.0));
  in.e = between(rng, 0.0, in.cfg.capacity);
  in.x.p = between(rng, 0.0, in.params.p_max);
  in.x.q = between(rng, 0.0, in.params.q_max);
  in.x.r = between(rng, 0.0, in.params.r_max);
  in.x.s = rng.below(2);
  in.d.states = {{"A", between(rng, 0.05, 3.0), between(rng, 0.0, in.params.l_max)},
                 {"B", between(rng, 0.05, 3.0), between(rng, 0.0, in.params.l_max)}};
  return in;
}

LpSelftestReport lp_selftest(std::size_t n, std::uint64_t seed, double step) {
  LpSelftestReport rep;
  Rng rng(seed);
  rep.worst_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const StorageLP lp = random_storage_lp(rng);
    const LPSolution exact = solve_storage_lp(lp);
    const LPSolution grid = brute_force_lp(lp, step);
    const double gap = grid.objective - exact.objective;
    rep.worst_gap = std::max(rep.worst_gap, gap);
    if (exact.objective < grid.objective - brute_force_slack(lp, step)) ++rep.below_oracle;
    if (!verify_optimality(exact, lp)) ++rep.not_optimal;
    const double res = lp_residual(lp, exact);
    rep.worst_residual = std::max(rep.worst_residual, res);
    if (res > 1e-9) ++rep.residual_fail;
    ++rep.instances;
  }
  if (n == 0) rep.worst_gap = 0.0;
  return rep;
}

}  // namespace storage_dr
