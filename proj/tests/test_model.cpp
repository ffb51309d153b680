#include <doctest.h>

#include <algorithm>

#include "storage_dr/error.hpp"
#include "storage_dr/model.hpp"
#include "storage_dr/rng.hpp"
#include "storage_dr/selftest.hpp"

using namespace storage_dr;

namespace {

DisutilitySpec two_states() { return {{{"H", 1.0, 12.0}, {"L", 1.0, 8.0}}}; }

bool has_kind(const std::vector<Violation>& v, ConstraintKind k) {
  return std::any_of(v.begin(), v.end(), [k](const Violation& x) { return x.kind == k; });
}

}  // namespace

TEST_CASE("residual load") {
  CHECK(residual_load(12, 9) == 3);
  CHECK(residual_load(5, 5) == 0);
  CHECK(residual_load(0, 9) == -9);
}

TEST_CASE("storage dynamics") {
  const SystemParams p;
  CHECK(apply_storage_dynamics(50, {0, 0, 0, 4, 0, 2}, p) == doctest::Approx(46.6).epsilon(1e-12));
  CHECK(apply_storage_dynamics(50, {}, p) == 50);
  CHECK(apply_storage_dynamics(0, {0, 0, 6, 0, 0, 6}, p) == doctest::Approx(9.6).epsilon(1e-12));
  CHECK_THROWS_AS(apply_storage_dynamics(5, {5, 0, 0, 5, 0, 0}, p), InfeasibleError);
}

TEST_CASE("feasibility predicates") {
  const SystemParams p;
  ExogenousSample x;
  CHECK(check_feasibility({}, x, 0, p).empty());

  const auto ea = check_feasibility({5, 0, 0, 5, 0, 0}, x, 5, p);
  REQUIRE(ea.size() == 1);
  CHECK(ea[0].kind == ConstraintKind::energy_availability);
  CHECK(ea[0].lhs == doctest::Approx(6.25));

  const auto lb = check_feasibility({5, 3, 0, 1, 0, 0}, x, 100, p);
  CHECK(has_kind(lb, ConstraintKind::load_balance));

  x.r = 4;
  CHECK(has_kind(check_feasibility({0, 0, 0, 0, 0, 5}, x, 0, p), ConstraintKind::renewable_surplus));
  CHECK(has_kind(check_feasibility({12, 12, 9, 0, 0, 0}, x, 0, p), ConstraintKind::grid_limit));
  CHECK(has_kind(check_feasibility({4, 0, 9, 0, 0, 4}, x, 0, p), ConstraintKind::charge_limit));
  CHECK(has_kind(check_feasibility({4, 0, 0, 0, 13, 0}, x, 100, p), ConstraintKind::discharge_limit));
  CHECK(has_kind(check_feasibility({4, 0, -1, 0, 0, 0}, x, 0, p), ConstraintKind::nonnegativity));
  CHECK(has_kind(check_feasibility({13, 9, 0, 0, 0, 0}, x, 0, p), ConstraintKind::consumption_limit));
}

TEST_CASE("feasibility reports are re-derivable") {
  const SystemParams p;
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    ExogenousSample x;
    x.r = rng.uniform() * p.r_max;
    ControlAction a{rng.uniform() * p.l_max, rng.uniform() * 8, rng.uniform() * 8,
                    rng.uniform() * 8,       rng.uniform() * 8, rng.uniform() * 8};
    const double e = rng.uniform() * 40;
    const double res = residual_load(a.l_tilde, x.r);
    const bool balance = std::abs(a.d_l + a.d_s - pos(res)) <= kEqTol;
    const bool grid = a.d_l + a.d_c <= p.c_grid;
    const bool charge = a.d_c + a.r_c <= p.c_char;
    const bool dis = a.h_s + a.d_s <= p.c_dis;
    const bool surplus = a.r_c <= pos(-res);
    const bool avail = p.eta_e * (a.d_s + a.h_s) <= e;
    const auto v = check_feasibility(a, x, e, p);
    CHECK(has_kind(v, ConstraintKind::load_balance) == !balance);
    CHECK(has_kind(v, ConstraintKind::grid_limit) == !grid);
    CHECK(has_kind(v, ConstraintKind::charge_limit) == !charge);
    CHECK(has_kind(v, ConstraintKind::discharge_limit) == !dis);
    CHECK(has_kind(v, ConstraintKind::renewable_surplus) == !surplus);
    CHECK(has_kind(v, ConstraintKind::energy_availability) == !avail);
    CHECK(v.empty() == (balance && grid && charge && dis && surplus && avail));
  }
}

TEST_CASE("slot cost") {
  const auto d = two_states();
  ExogenousSample x{10, 5, 0, 0, std::nullopt};
  CHECK(slot_cost({3, 2, 1, 0, 0, 0}, x, d, CostMode::load_serving) == 30);
  CHECK(slot_cost({0, 0, 0, 0, 4, 0}, x, d, CostMode::load_serving) == -20);
  ExogenousSample y{4, 4, 0, 0, std::nullopt};
  CHECK(slot_cost({10, 10, 0, 0, 0, 0}, y, d, CostMode::demand_response) == 44);
}

TEST_CASE("load-serving cost is linear in purchases and sales") {
  const DisutilitySpec d = two_states();
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    ExogenousSample x{rng.uniform() * 14, rng.uniform() * 14, 0, 0, std::nullopt};
    ControlAction a{0, rng.uniform() * 5, rng.uniform() * 5, 0, rng.uniform() * 5, 0};
    ControlAction b{0, rng.uniform() * 5, rng.uniform() * 5, 0, rng.uniform() * 5, 0};
    ControlAction sum{0, a.d_l + b.d_l, a.d_c + b.d_c, 0, a.h_s + b.h_s, 0};
    const double ca = slot_cost(a, x, d, CostMode::load_serving);
    const double cb = slot_cost(b, x, d, CostMode::load_serving);
    CHECK(slot_cost(sum, x, d, CostMode::load_serving) == doctest::Approx(ca + cb).epsilon(1e-12));
    CHECK(ca == doctest::Approx(x.p * (a.d_l + a.d_c) - x.q * a.h_s).epsilon(1e-12));
  }
}

TEST_CASE("disutility") {
  const auto d = two_states();
  CHECK(disutility(12, 0, d) == 0);
  CHECK(disutility(8, 1, d) == 0);
  CHECK(disutility(10, 0, d) == 4);
  CHECK_THROWS_AS(disutility(10, 5, d), ConfigError);
}

TEST_CASE("parameter validation") {
  SystemParams p;
  CHECK(validate_params(p).empty());
  p.c_grid = 10;
  CHECK_FALSE(validate_params(p).empty());
  CHECK_THROWS_AS(require_valid(p), ConfigError);
  p = SystemParams{};
  p.eta_i = 1.2;
  CHECK_FALSE(validate_params(p).empty());
  p = SystemParams{};
  p.eta_e = 0.9;
  CHECK_FALSE(validate_params(p).empty());
  p = SystemParams{};
  p.c_char = 0;
  CHECK_FALSE(validate_params(p).empty());
  p = SystemParams{};
  p.q_max = -1;
  CHECK_FALSE(validate_params(p).empty());

  DisutilitySpec d{{{"H", -1.0, 12.0}}};
  CHECK_FALSE(validate_disutility(d, SystemParams{}).empty());
  d.states[0] = {"H", 1.0, 13.0};
  CHECK_FALSE(validate_disutility(d, SystemParams{}).empty());
}

TEST_CASE("storage stays nonnegative under feasible random actions") {
  Rng rng(21);
  for (int run = 0; run < 50; ++run) {
    const SystemParams p = random_params(rng);
    double e = rng.uniform() * 10;
    for (int t = 0; t < 200; ++t) {
      ControlAction a;
      a.h_s = std::min(rng.uniform() * p.c_dis, e / p.eta_e);
      a.r_c = rng.uniform() * p.c_char;
      a.l_tilde = 0;
      ExogenousSample x;
      x.r = a.r_c;
      REQUIRE(check_feasibility(a, x, e, p).empty());
      e = apply_storage_dynamics(e, a, p);
      CHECK(e >= 0.0);
    }
  }
}
