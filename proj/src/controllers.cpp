#include "storage_dr/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "storage_dr/error.hpp"

namespace storage_dr {

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::esm: return "esm";
    case ControllerKind::dresm: return "dresm";
    case ControllerKind::greedy: return "greedy";
  }
  return "unknown";
}

ControllerKind parse_controller(const std::string& name) {
  if (name == "esm") return ControllerKind::esm;
  if (name == "dresm") return ControllerKind::dresm;
  if (name == "greedy") return ControllerKind::greedy;
  throw ConfigError("unknown controller '" + name + "' (expected esm, dresm or greedy)");
}

double compute_theta(const SystemParams& params, double epsilon) {
  return std::max(params.p_max, params.q_max) / (epsilon * params.eta_i) +
         params.eta_e * std::min(params.l_max, params.c_dis);
}

ControllerConfig make_controller_config(const SystemParams& params, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("V must be a positive finite number");
  ControllerConfig cfg;
  cfg.v = v;
  cfg.epsilon = 1.0 / v;
  cfg.theta = compute_theta(params, cfg.epsilon);
  cfg.capacity = cfg.theta + params.eta_i * params.c_char;
  return cfg;
}

double drift_constant(const SystemParams& p) {
  return 0.5 * (p.eta_e * p.eta_e * p.c_dis * p.c_dis + p.eta_i * p.eta_i * p.c_char * p.c_char);
}

WeightSet esm_weights(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                      const SystemParams& params) {
  const double out_gap = params.eta_e * (e - cfg.theta);
  const double in_gap = params.eta_i * (e - cfg.theta);
  WeightSet w;
  w.w_h = out_gap + x.q / cfg.epsilon;
  w.w_s = out_gap + x.p / cfg.epsilon;
  w.w_c = in_gap + x.p / cfg.epsilon;
  w.w_r = in_gap;
  return w;
}

WeightSet dresm_weights(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                        const SystemParams& params) {
  const double out_gap = params.eta_e * (e - cfg.theta);
  const double in_gap = params.eta_i * (e - cfg.theta);
  WeightSet w;
  w.w_h = out_gap + x.q / cfg.epsilon;
  w.w_l = out_gap + x.p / cfg.epsilon;
  w.w_c = in_gap + x.p / cfg.epsilon;
  w.w_r = in_gap;
  w.w_d = out_gap;
  return w;
}

namespace {

StorageLP make_lp(const WeightSet& w, double w_s, double residual, const SystemParams& params) {
  StorageLP lp;
  lp.w_h = w.w_h;
  lp.w_s = w_s;
  lp.w_c = w.w_c;
  lp.w_r = w.w_r;
  lp.l_plus = pos(residual);
  lp.l_minus = pos(-residual);
  lp.params = params;
  return lp;
}

// Substituting d_l = [L]+ - d_s, the DR-ESM objective at fixed l_tilde equals
//   V D(l) + V p [l - r]+ - Phi(l)
// where Phi is the value of the storage program with w_s = w_l.
class DrObjective {
 public:
  DrObjective(double e, const ExogenousSample& x, const ControllerConfig& cfg,
              const SystemParams& params, const DisutilitySpec& d)
      : x_(x), cfg_(cfg), params_(params), d_(d), w_(dresm_weights(e, x, cfg, params)) {}

  LPSolution inner(double l) const {
    return solve_storage_lp(make_lp(w_, w_.w_l, residual_load(l, x_.r), params_));
  }

  double phi(double l) const { return inner(l).objective; }

  double value(double l) const { return value_with(l, phi(l)); }

  double value_with(double l, double phi_l) const {
    return cfg_.v * disutility(l, x_.s, d_) + cfg_.v * x_.p * pos(l - x_.r) - phi_l;
  }

  const WeightSet& weights() const { return w_; }
  const ExogenousSample& sample() const { return x_; }

 private:
  ExogenousSample x_;
  ControllerConfig cfg_;
  SystemParams params_;
  const DisutilitySpec& d_;
  WeightSet w_;
};

// Picks the smallest l among near-minimal values.
struct Argmin {
  double l = 0.0;
  double value = std::numeric_limits<double>::infinity();
  bool found = false;

  void offer(double cand_l, double cand_value) {
    const double tol = 1e-12 * (1.0 + std::abs(cand_value) + std::abs(value));
    if (!found || cand_value < value - tol || (cand_value <= value + tol && cand_l < l)) {
      if (found && cand_value > value) cand_value = value;
      l = cand_l;
      value = cand_value;
      found = true;
    }
  }
};

}  // namespace

ControlAction esm_decide(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                         const SystemParams& params) {
  if (!x.exo_load) throw ConfigError("ESM requires an exogenous load in every sample");
  const WeightSet w = esm_weights(e, x, cfg, params);
  const double l = *x.exo_load;
  return solve_storage_lp(make_lp(w, w.w_s, residual_load(l, x.r), params)).to_action(l);
}

double dresm_objective(const ControlAction& a, double e, const ExogenousSample& x,
                       const ControllerConfig& cfg, const SystemParams& params,
                       const DisutilitySpec& d) {
  const WeightSet w = dresm_weights(e, x, cfg, params);
  return cfg.v * disutility(a.l_tilde, x.s, d) - w.w_d * pos(a.l_tilde - x.r) - a.h_s * w.w_h +
         a.d_l * w.w_l + a.d_c * w.w_c + a.r_c * w.w_r;
}

ControlAction dresm_decide(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                           const SystemParams& params, const DisutilitySpec& d) {
  const DrObjective obj(e, x, cfg, params, d);
  const double l_max = params.l_max;
  const double r = x.r;

  // The storage program's constraint matrix is totally unimodular, so its
  // value is piecewise linear in the residual load with kinks only where
  // |L| = sG*c_grid + sC*c_char + sD*c_dis, s in {-1, 0, 1}.
  std::vector<double> points{0.0, l_max};
  if (r > 0.0 && r < l_max) points.push_back(r);
  for (int sg = -1; sg <= 1; ++sg)
    for (int sc = -1; sc <= 1; ++sc)
      for (int sd = -1; sd <= 1; ++sd) {
        const double k = sg * params.c_grid + sc * params.c_char + sd * params.c_dis;
        if (k <= 0.0) continue;
        for (double l : {r + k, r - k}) {
          if (l > 0.0 && l < l_max) points.push_back(l);
        }
      }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end(),
                           [](double a, double b) { return b - a <= 1e-12; }),
               points.end());

  std::vector<double> phis(points.size());
  Argmin best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    phis[i] = obj.phi(points[i]);
    best.offer(points[i], obj.value_with(points[i], phis[i]));
  }

  // On each segment Phi is affine, so the objective is a convex quadratic.
  const auto& st = d.at(x.s);
  const double curvature = cfg.v * st.beta;
  for (std::size_t i = 0; i + 1 < points.size() && curvature > 0.0; ++i) {
    const double lo = points[i];
    const double hi = points[i + 1];
    const double slope_phi = (phis[i + 1] - phis[i]) / (hi - lo);
    const double buy = lo >= r ? cfg.v * x.p : 0.0;
    const double linear = buy - slope_phi;
    const double stationary = st.target - linear / (2.0 * curvature);
    if (stationary > lo && stationary < hi) best.offer(stationary, obj.value(stationary));
  }

  return obj.inner(best.l).to_action(best.l);
}

ControlAction dresm_oracle(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                           const SystemParams& params, const DisutilitySpec& d, double step,
                           OracleOptions opts) {
  if (!(step > 0.0)) throw std::invalid_argument("dresm_oracle: step must be > 0");
  const double l_max = params.l_max;
  const double cells = std::floor(l_max / step + 1e-12);
  if (cells + 2.0 > static_cast<double>(opts.max_points)) {
    throw ResourceError("dresm_oracle: grid exceeds evaluation budget");
  }
  const DrObjective obj(e, x, cfg, params, d);

  std::vector<double> grid;
  for (std::size_t k = 0; k <= static_cast<std::size_t>(cells); ++k) {
    grid.push_back(std::min(l_max, static_cast<double>(k) * step));
  }
  if (l_max - grid.back() > 1e-12) grid.push_back(l_max);
  if (opts.refine && x.r > 0.0 && x.r < l_max) {
    grid.insert(std::upper_bound(grid.begin(), grid.end(), x.r), x.r);
  }

  std::vector<double> values(grid.size());
  Argmin best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = obj.value(grid[i]);
    best.offer(grid[i], values[i]);
  }

  if (opts.refine) {
    // The objective is convex on each side of l = r, so its minimizer on a
    // branch lies within one cell of the best grid point of that branch.
    auto refine_branch = [&](double lo_bound, double hi_bound) {
      std::size_t arg = grid.size();
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < lo_bound || grid[i] > hi_bound) continue;
        if (arg == grid.size() || values[i] < values[arg]) arg = i;
      }
      if (arg == grid.size()) return;
      double a = arg > 0 ? std::max(grid[arg - 1], lo_bound) : grid[arg];
      double b = arg + 1 < grid.size() ? std::min(grid[arg + 1], hi_bound) : grid[arg];
      const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
      double c = b - ratio * (b - a);
      double dd = a + ratio * (b - a);
      double fc = obj.value(c);
      double fd = obj.value(dd);
      for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        if (fc <= fd) {
          b = dd;
          dd = c;
          fd = fc;
          c = b - ratio * (b - a);
          fc = obj.value(c);
        } else {
          a = c;
          c = dd;
          fc = fd;
          dd = a + ratio * (b - a);
          fd = obj.value(dd);
        }
      }
      const double l = 0.5 * (a + b);
      best.offer(l, obj.value(l));
    };
    const double r = std::clamp(x.r, 0.0, l_max);
    refine_branch(0.0, r);
    refine_branch(r, l_max);
  }

  return obj.inner(best.l).to_action(best.l);
}

double dresm_lipschitz(double e, const ExogenousSample& x, const ControllerConfig& cfg,
                       const SystemParams& params, const DisutilitySpec& d) {
  const WeightSet w = dresm_weights(e, x, cfg, params);
  const auto& st = d.at(x.s);
  return cfg.v * (2.0 * st.beta * params.l_max + x.p) + std::abs(w.w_h) + std::abs(w.w_l) +
         std::abs(w.w_c) + std::abs(w.w_r);
}

ControlAction greedy_decide(const ExogenousSample& x, const DisutilitySpec& d,
                            const SystemParams& params) {
  const auto& st = d.at(x.s);
  double l = 0.0;
  if (st.beta > 0.0) {
    // Convex in l: disutility plus a hinge on purchases above r.
    l = st.target <= x.r ? st.target : std::max(x.r, st.target - x.p / (2.0 * st.beta));
    l = std::clamp(l, 0.0, params.l_max);
  }
  ControlAction a;
  a.l_tilde = l;
  a.d_l = pos(l - x.r);
  return a;
}

}  // namespace storage_dr
