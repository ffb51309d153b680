#include "storage_dr/model.hpp"

#include <cmath>
#include <sstream>

#include "storage_dr/error.hpp"

namespace storage_dr {

const DisutilityState& DisutilitySpec::at(StateId s) const {
  if (s >= states.size()) {
    throw ConfigError("unknown system state index " + std::to_string(s));
  }
  return states[s];
}

std::optional<StateId> DisutilitySpec::find(const std::string& name) const {
  for (StateId i = 0; i < states.size(); ++i) {
    if (states[i].name == name) return i;
  }
  return std::nullopt;
}

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::nonnegativity: return "nonnegativity";
    case ConstraintKind::load_balance: return "load_balance";
    case ConstraintKind::grid_limit: return "grid_limit";
    case ConstraintKind::charge_limit: return "charge_limit";
    case ConstraintKind::discharge_limit: return "discharge_limit";
    case ConstraintKind::renewable_surplus: return "renewable_surplus";
    case ConstraintKind::energy_availability: return "energy_availability";
    case ConstraintKind::consumption_limit: return "consumption_limit";
  }
  return "unknown";
}

double residual_load(double l_tilde, double r) { return l_tilde - r; }

double apply_storage_dynamics(double e, const ControlAction& a, const SystemParams& params) {
  const double out = params.eta_e * a.discharge();
  if (out > e + kEqTol) {
    std::ostringstream msg;
    msg << "energy availability violated: discharge needs " << out << " but only " << e
        << " is stored";
    throw InfeasibleError(msg.str());
  }
  return e - out + params.eta_i * a.charge();
}

std::vector<Violation> check_feasibility(const ControlAction& a, const ExogenousSample& x, double e,
                                         const SystemParams& params, double tol) {
  std::vector<Violation> out;
  auto flag = [&](ConstraintKind kind, double lhs, double bound, std::string detail) {
    out.push_back({kind, lhs, bound, std::move(detail)});
  };

  const struct {
    const char* name;
    double value;
  } fields[] = {{"l_tilde", a.l_tilde}, {"d_l", a.d_l}, {"d_c", a.d_c},
                {"d_s", a.d_s},         {"h_s", a.h_s}, {"r_c", a.r_c}};
  for (const auto& f : fields) {
    if (f.value < -tol) flag(ConstraintKind::nonnegativity, f.value, 0.0, f.name);
  }
  if (a.l_tilde > params.l_max + tol) {
    flag(ConstraintKind::consumption_limit, a.l_tilde, params.l_max, "l_tilde <= L_max");
  }

  const double residual = residual_load(a.l_tilde, x.r);
  const double l_plus = pos(residual);
  const double l_minus = pos(-residual);

  if (std::abs(a.d_l + a.d_s - l_plus) > tol) {
    flag(ConstraintKind::load_balance, a.d_l + a.d_s, l_plus, "d_l + d_s == [L]+");
  }
  if (a.d_l + a.d_c > params.c_grid + tol) {
    flag(ConstraintKind::grid_limit, a.d_l + a.d_c, params.c_grid, "d_l + d_c <= c_grid");
  }
  if (a.d_c + a.r_c > params.c_char + tol) {
    flag(ConstraintKind::charge_limit, a.d_c + a.r_c, params.c_char, "d_c + r_c <= c_char");
  }
  if (a.h_s + a.d_s > params.c_dis + tol) {
    flag(ConstraintKind::discharge_limit, a.h_s + a.d_s, params.c_dis, "h_s + d_s <= c_dis");
  }
  if (a.r_c > l_minus + tol) {
    flag(ConstraintKind::renewable_surplus, a.r_c, l_minus, "r_c <= [-L]+");
  }
  if (params.eta_e * a.discharge() > e + tol) {
    flag(ConstraintKind::energy_availability, params.eta_e * a.discharge(), e,
         "eta_e (d_s + h_s) <= E");
  }
  return out;
}

double disutility(double l_tilde, StateId s, const DisutilitySpec& d) {
  const auto& st = d.at(s);
  const double gap = st.target - l_tilde;
  return st.beta * gap * gap;
}

double slot_cost(const ControlAction& a, const ExogenousSample& x, const DisutilitySpec& d,
                 CostMode mode) {
  const double market = x.p * (a.d_l + a.d_c) - x.q * a.h_s;
  if (mode == CostMode::load_serving) return market;
  return disutility(a.l_tilde, x.s, d) + market;
}

std::vector<ParamViolation> validate_params(const SystemParams& p) {
  std::vector<ParamViolation> out;
  auto need = [&](bool ok, const char* field, std::string detail) {
    if (!ok) out.push_back({field, std::move(detail)});
  };
  auto finite = [](double v) { return std::isfinite(v); };

  need(finite(p.eta_e) && p.eta_e >= 1.0, "eta_e", "must be >= 1");
  need(finite(p.eta_i) && p.eta_i > 0.0 && p.eta_i <= 1.0, "eta_i", "must lie in (0, 1]");
  need(finite(p.c_grid) && p.c_grid > 0.0, "c_grid", "must be > 0");
  need(finite(p.c_char) && p.c_char > 0.0, "c_char", "must be > 0");
  need(finite(p.c_dis) && p.c_dis > 0.0, "c_dis", "must be > 0");
  need(finite(p.l_max) && p.l_max > 0.0, "l_max", "must be > 0");
  need(finite(p.r_max) && p.r_max > 0.0, "r_max", "must be > 0");
  need(finite(p.p_max) && p.p_max >= 0.0, "p_max", "must be >= 0");
  need(finite(p.q_max) && p.q_max >= 0.0, "q_max", "must be >= 0");
  if (out.empty()) {
    std::ostringstream msg;
    msg << "capacity assumption eta_i*c_grid >= eta_e*L_max fails: " << p.eta_i * p.c_grid
        << " < " << p.eta_e * p.l_max;
    need(p.eta_i * p.c_grid >= p.eta_e * p.l_max, "c_grid", msg.str());
  }
  return out;
}

std::vector<ParamViolation> validate_disutility(const DisutilitySpec& d, const SystemParams& params) {
  std::vector<ParamViolation> out;
  if (d.states.empty()) out.push_back({"disutility.states", "at least one state required"});
  for (std::size_t i = 0; i < d.states.size(); ++i) {
    const auto& s = d.states[i];
    const std::string field = "disutility.states[" + std::to_string(i) + "]";
    if (!(s.beta >= 0.0)) out.push_back({field + ".beta", "must be >= 0"});
    if (!(s.target >= 0.0 && s.target <= params.l_max)) {
      out.push_back({field + ".target", "must lie in [0, L_max]"});
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (d.states[j].name == s.name) out.push_back({field + ".name", "duplicate name " + s.name});
    }
  }
  return out;
}

void require_valid(const SystemParams& params) {
  const auto violations = validate_params(params);
  if (violations.empty()) return;
  std::string msg = "invalid system parameters:";
  for (const auto& v : violations) msg += " " + v.field + " (" + v.detail + ");";
  throw ConfigError(msg);
}

std::vector<ParamViolation> validate_sample(const ExogenousSample& x, const SystemParams& params,
                                            std::size_t num_states) {
  std::vector<ParamViolation> out;
  if (!(x.p >= 0.0 && x.p <= params.p_max)) out.push_back({"p", "must lie in [0, p_max]"});
  if (!(x.q >= 0.0 && x.q <= params.q_max)) out.push_back({"q", "must lie in [0, q_max]"});
  if (!(x.r >= 0.0 && x.r <= params.r_max)) out.push_back({"r", "must lie in [0, r_max]"});
  if (x.s >= num_states) out.push_back({"s", "unknown system state"});
  if (x.exo_load && !(*x.exo_load >= 0.0 && *x.exo_load <= params.l_max)) {
    out.push_back({"load", "must lie in [0, L_max]"});
  }
  return out;
}

}  // namespace storage_dr
