#include "storage_dr/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "storage_dr/error.hpp"

namespace storage_dr {

namespace {

std::vector<double> grid_points(double hi, double step) {
  std::vector<double> pts;
  if (hi < -1e-12) return pts;
  hi = std::max(hi, 0.0);
  const auto n = static_cast<std::size_t>(std::floor(hi / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) pts.push_back(std::min(hi, static_cast<double>(k) * step));
  if (hi - pts.back() > 1e-9) pts.push_back(hi);
  return pts;
}

struct Move {
  double need = 0.0;   // energy that must be stored to discharge
  double delta = 0.0;  // net energy change
  double cost = 0.0;
  ControlAction control;
};

std::vector<Move> enumerate_moves(const ExogenousSample& x, const ScenarioConfig& sc, CostMode mode,
                                  double step, std::size_t& budget) {
  const auto& p = sc.params;
  std::vector<double> loads;
  if (mode == CostMode::load_serving) {
    loads.push_back(*x.exo_load);
  } else {
    loads = grid_points(p.l_max, step);
  }

  // Keep the cheapest control for each (need, delta) pair.
  std::map<std::pair<long long, long long>, Move> best;
  auto key = [](double v) { return static_cast<long long>(std::llround(v * 1e9)); };
  for (double l : loads) {
    const double a = pos(l - x.r);
    const double b = pos(x.r - l);
    if (a > p.c_grid) continue;
    for (double d_s : grid_points(std::min(a, p.c_dis), step)) {
      const double d_l = a - d_s;
      for (double h_s : grid_points(p.c_dis - d_s, step)) {
        for (double d_c : grid_points(std::min(p.c_char, p.c_grid - d_l), step)) {
          for (double r_c : grid_points(std::min(b, p.c_char - d_c), step)) {
            if (budget == 0) throw ResourceError("discretize: action enumeration exceeds budget");
            --budget;
            const ControlAction u{l, d_l, d_c, d_s, h_s, r_c};
            Move m;
            m.need = p.eta_e * u.discharge();
            m.delta = -m.need + p.eta_i * u.charge();
            m.cost = slot_cost(u, x, sc.disutility, mode);
            m.control = u;
            auto [it, inserted] = best.try_emplace({key(m.need), key(m.delta)}, m);
            if (!inserted && m.cost < it->second.cost) it->second = m;
          }
        }
      }
    }
  }
  std::vector<Move> out;
  out.reserve(best.size());
  for (auto& [k, m] : best) out.push_back(m);
  return out;
}

}  // namespace

std::size_t StorageMdp::nearest_level(double e) const {
  const auto it = std::lower_bound(levels.begin(), levels.end(), e);
  if (it == levels.begin()) return 0;
  if (it == levels.end()) return levels.size() - 1;
  const auto hi = static_cast<std::size_t>(it - levels.begin());
  return (e - levels[hi - 1] <= levels[hi] - e) ? hi - 1 : hi;
}

StorageMdp discretize(const ScenarioConfig& sc, double capacity, double delta_e, double delta_a,
                      const DiscretizeOptions& opts) {
  if (!(delta_e > 0.0) || !(delta_a > 0.0)) throw ConfigError("discretize: steps must be > 0");
  if (!(capacity >= 0.0)) throw ConfigError("discretize: capacity must be >= 0");

  StorageMdp out;
  out.mode = sc.has_exogenous_load() ? CostMode::load_serving : CostMode::demand_response;
  out.levels = grid_points(capacity, delta_e);
  out.outcome_count = sc.outcome_count();
  const std::size_t n_states = out.levels.size() * out.outcome_count;
  if (n_states > opts.max_states) {
    throw ResourceError("discretize: " + std::to_string(n_states) + " states exceed the budget of " +
                        std::to_string(opts.max_states));
  }

  std::size_t budget = opts.max_raw_actions;
  std::vector<std::vector<Move>> moves(out.outcome_count);
  for (std::size_t o = 0; o < out.outcome_count; ++o) {
    moves[o] = enumerate_moves(sc.outcome_sample(o), sc, out.mode, delta_a, budget);
  }

  out.mdp.actions.resize(n_states);
  out.controls.resize(n_states);
  for (std::size_t i = 0; i < out.levels.size(); ++i) {
    const double e = out.levels[i];
    for (std::size_t o = 0; o < out.outcome_count; ++o) {
      // Cheapest move per landing level.
      std::map<std::size_t, const Move*> by_level;
      for (const auto& m : moves[o]) {
        if (m.need > e + 1e-9) continue;
        const double next = e + m.delta;
        if (next < -1e-9 || next > capacity + 1e-9) continue;
        const std::size_t j = out.nearest_level(next);
        auto [it, inserted] = by_level.try_emplace(j, &m);
        if (!inserted && m.cost < it->second->cost) it->second = &m;
      }
      const std::size_t s = out.state_index(i, o);
      for (const auto& [j, m] : by_level) {
        FiniteMdp::Action act;
        act.cost = m->cost;
        for (std::size_t o2 = 0; o2 < out.outcome_count; ++o2) {
          const double pr = sc.transition_probability(o, o2);
          if (pr > 0.0) act.next.emplace_back(out.state_index(j, o2), pr);
        }
        out.mdp.actions[s].push_back(std::move(act));
        out.controls[s].push_back(m->control);
      }
      if (out.mdp.actions[s].empty()) {
        throw ConfigError("discretize: no admissible action at level " + std::to_string(e));
      }
    }
  }
  return out;
}

RviResult relative_value_iteration(const FiniteMdp& mdp, double tol, std::size_t max_iter,
                                   double damping) {
  const std::size_t n = mdp.size();
  if (n == 0) throw ConfigError("relative_value_iteration: empty MDP");
  for (std::size_t s = 0; s < n; ++s) {
    if (mdp.actions[s].empty()) throw ConfigError("relative_value_iteration: state without actions");
  }
  RviResult res;
  res.bias.assign(n, 0.0);
  res.policy.assign(n, 0);
  std::vector<double> th(n);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    // Synchronous sweep in fixed state order.
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t s = 0; s < n; ++s) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t a = 0; a < mdp.actions[s].size(); ++a) {
        const auto& act = mdp.actions[s][a];
        double v = act.cost;
        for (const auto& [j, pr] : act.next) v += pr * res.bias[j];
        if (v < best) {
          best = v;
          arg = a;
        }
      }
      th[s] = best;
      res.policy[s] = arg;
      const double d = best - res.bias[s];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    res.iterations = it;
    res.span = hi - lo;
    if (res.span <= tol) {
      res.gain = 0.5 * (lo + hi);
      return res;
    }
    const double ref = res.bias[0] + damping * (th[0] - res.bias[0]);
    for (std::size_t s = 0; s < n; ++s) {
      res.bias[s] = res.bias[s] + damping * (th[s] - res.bias[s]) - ref;
    }
  }
  std::ostringstream msg;
  msg << "relative_value_iteration: no convergence after " << max_iter << " iterations (span "
      << res.span << ")";
  throw ResourceError(msg.str());
}

Policy policy_from_rvi(const StorageMdp& mdp, const RviResult& rvi, const ScenarioConfig& scenario) {
  std::vector<ExogenousSample> samples;
  for (std::size_t o = 0; o < scenario.outcome_count(); ++o) samples.push_back(scenario.outcome_sample(o));
  return [&mdp, &rvi, samples](double e, const ExogenousSample& x) {
    const auto it = std::find(samples.begin(), samples.end(), x);
    if (it == samples.end()) throw ConfigError("policy_from_rvi: sample not in the outcome table");
    const std::size_t o = static_cast<std::size_t>(it - samples.begin());
    const std::size_t s = mdp.state_index(mdp.nearest_level(e), o);
    return mdp.controls[s][rvi.policy[s]];
  };
}

RolloutResult rollout_policy(const Policy& policy, const ScenarioConfig& scenario, CostMode mode,
                             std::size_t slots, std::uint64_t seed, double e0) {
  if (slots < 1) throw ConfigError("rollout_policy: need at least one slot");
  auto source = make_source(scenario, Rng(seed));
  double e = e0;
  double total = 0.0;
  const std::size_t batches = slots >= 200 ? 20 : 1;
  const std::size_t per = slots / batches;
  std::vector<double> batch_sums(batches, 0.0);
  for (std::size_t t = 0; t < slots; ++t) {
    const ExogenousSample x = source->next(t, e);
    const ControlAction a = policy(e, x);
    const auto bad = check_feasibility(a, x, e, scenario.params);
    if (!bad.empty()) {
      throw TheoremViolation(t, std::string("policy emitted an infeasible action: ") +
                                    to_string(bad.front().kind));
    }
    const double c = slot_cost(a, x, scenario.disutility, mode);
    total += c;
    if (t / per < batches) batch_sums[t / per] += c;
    e = apply_storage_dynamics(e, a, scenario.params);
  }
  RolloutResult r;
  r.average_cost = total / static_cast<double>(slots);
  if (batches > 1) {
    double mean = 0.0;
    for (double s : batch_sums) mean += s / static_cast<double>(per);
    mean /= static_cast<double>(batches);
    double var = 0.0;
    for (double s : batch_sums) {
      const double m = s / static_cast<double>(per);
      var += (m - mean) * (m - mean);
    }
    r.cost_se = std::sqrt(var / static_cast<double>(batches - 1) / static_cast<double>(batches));
  }
  return r;
}

}  // namespace storage_dr
