#include "storage_dr/lp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "storage_dr/error.hpp"

namespace storage_dr {
namespace {

// Reduced program over x = (d_c, d_s, h_s, r_c) with d_l = l_plus - d_s,
// written as A x <= rhs. The matrix is totally unimodular and independent of
// the parameters, so every basis inverse is an integer matrix computed once.
constexpr int kVars = 4;
constexpr int kRows = 9;
using Vec4 = std::array<double, kVars>;

constexpr std::array<std::array<int, kVars>, kRows> kA{{
    {0, 1, 0, 0},    // d_s <= l_plus          (d_l >= 0)
    {1, -1, 0, 0},   // d_c - d_s <= c_grid - l_plus
    {1, 0, 0, 1},    // d_c + r_c <= c_char
    {0, 1, 1, 0},    // d_s + h_s <= c_dis
    {0, 0, 0, 1},    // r_c <= l_minus
    {-1, 0, 0, 0},   // d_c >= 0
    {0, -1, 0, 0},   // d_s >= 0
    {0, 0, -1, 0},   // h_s >= 0
    {0, 0, 0, -1},   // r_c >= 0
}};

struct Basis {
  std::array<int, kVars> rows;
  std::array<std::array<int, kVars>, kVars> inv;  // x = inv * rhs[rows]
};

// Gauss-Jordan on the small integer matrix; TU guarantees det in {-1, 0, 1}.
bool invert(const std::array<int, kVars>& rows, std::array<std::array<int, kVars>, kVars>& inv) {
  double m[kVars][2 * kVars] = {};
  for (int i = 0; i < kVars; ++i) {
    for (int j = 0; j < kVars; ++j) m[i][j] = kA[rows[i]][j];
    m[i][kVars + i] = 1.0;
  }
  for (int col = 0; col < kVars; ++col) {
    int piv = -1;
    for (int i = col; i < kVars; ++i) {
      if (std::abs(m[i][col]) > 0.5 && (piv < 0 || std::abs(m[i][col]) > std::abs(m[piv][col]))) {
        piv = i;
      }
    }
    if (piv < 0) return false;
    for (int j = 0; j < 2 * kVars; ++j) std::swap(m[col][j], m[piv][j]);
    const double d = m[col][col];
    for (int j = 0; j < 2 * kVars; ++j) m[col][j] /= d;
    for (int i = 0; i < kVars; ++i) {
      if (i == col || m[i][col] == 0.0) continue;
      const double f = m[i][col];
      for (int j = 0; j < 2 * kVars; ++j) m[i][j] -= f * m[col][j];
    }
  }
  for (int i = 0; i < kVars; ++i) {
    for (int j = 0; j < kVars; ++j) inv[i][j] = static_cast<int>(std::lround(m[i][kVars + j]));
  }
  return true;
}

const std::vector<Basis>& bases() {
  static const std::vector<Basis> all = [] {
    std::vector<Basis> out;
    std::array<int, kVars> rows{};
    for (rows[0] = 0; rows[0] < kRows; ++rows[0])
      for (rows[1] = rows[0] + 1; rows[1] < kRows; ++rows[1])
        for (rows[2] = rows[1] + 1; rows[2] < kRows; ++rows[2])
          for (rows[3] = rows[2] + 1; rows[3] < kRows; ++rows[3]) {
            Basis b{rows, {}};
            if (invert(rows, b.inv)) out.push_back(b);
          }
    return out;
  }();
  return all;
}

std::array<double, kRows> rhs_of(const StorageLP& lp) {
  const auto& p = lp.params;
  return {lp.l_plus, p.c_grid - lp.l_plus, p.c_char, p.c_dis, lp.l_minus, 0.0, 0.0, 0.0, 0.0};
}

Vec4 objective_of(const StorageLP& lp) { return {-lp.w_c, lp.w_s, lp.w_h, -lp.w_r}; }

double dot(const Vec4& a, const Vec4& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

double row_dot(int row, const Vec4& x) {
  double s = 0.0;
  for (int j = 0; j < kVars; ++j) s += kA[row][j] * x[j];
  return s;
}

double scale_of(const StorageLP& lp) {
  const auto& p = lp.params;
  return std::max({1.0, p.c_grid, p.c_char, p.c_dis, lp.l_plus, lp.l_minus});
}

void check_inputs(const StorageLP& lp) {
  const auto& p = lp.params;
  if (!(lp.l_plus >= 0.0 && lp.l_minus >= 0.0)) {
    throw std::invalid_argument("storage LP: l_plus and l_minus must be >= 0");
  }
  if (lp.l_plus > 0.0 && lp.l_minus > 0.0) {
    throw std::invalid_argument("storage LP: l_plus and l_minus cannot both be positive");
  }
  if (lp.l_plus > p.l_max + kEqTol || lp.l_minus > p.r_max + kEqTol) {
    throw std::invalid_argument("storage LP: residual load outside [-r_max, L_max]");
  }
  if (lp.l_plus > p.c_grid) {
    throw InfeasibleError("storage LP: residual load exceeds c_grid");
  }
}

LPSolution from_reduced(const StorageLP& lp, const Vec4& x) {
  LPSolution s;
  s.d_c = x[0];
  s.d_s = x[1];
  s.h_s = x[2];
  s.r_c = x[3];
  s.d_l = std::max(0.0, lp.l_plus - s.d_s);
  s.objective = lp_objective(lp, s);
  return s;
}

// Lexicographic order on (d_c, h_s, d_s, r_c, d_l); d_l follows from d_s.
bool lex_less(const Vec4& a, const Vec4& b, double tol) {
  for (int k : {0, 2, 1, 3}) {
    if (a[k] < b[k] - tol) return true;
    if (a[k] > b[k] + tol) return false;
  }
  return false;
}

Vec4 enumerate(const StorageLP& lp) {
  check_inputs(lp);
  const auto rhs = rhs_of(lp);
  const Vec4 c = objective_of(lp);
  const double scale = scale_of(lp);
  const double feas_tol = 1e-12 * scale;
  const double obj_tol =
      1e-12 * scale * (std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]));

  std::array<Vec4, 128> vertices;
  std::array<double, 128> values;
  std::size_t count = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (const Basis& b : bases()) {
    Vec4 x{};
    for (int i = 0; i < kVars; ++i) {
      double v = 0.0;
      for (int j = 0; j < kVars; ++j) v += b.inv[i][j] * rhs[b.rows[j]];
      x[i] = std::abs(v) < feas_tol ? 0.0 : v;
    }
    bool feasible = true;
    for (int r = 0; r < kRows && feasible; ++r) feasible = row_dot(r, x) <= rhs[r] + feas_tol;
    if (!feasible) continue;
    vertices[count] = x;
    values[count] = dot(c, x);
    best_value = std::max(best_value, values[count]);
    ++count;
  }
  if (count == 0) throw InfeasibleError("storage LP: no feasible vertex");

  const Vec4* winner = nullptr;
  for (std::size_t i = 0; i < count; ++i) {
    if (values[i] < best_value - obj_tol) continue;
    if (winner == nullptr || lex_less(vertices[i], *winner, feas_tol)) winner = &vertices[i];
  }
  return *winner;
}

}  // namespace

double lp_objective(const StorageLP& lp, const LPSolution& x) {
  return x.h_s * lp.w_h + x.d_s * lp.w_s - x.d_c * lp.w_c - x.r_c * lp.w_r;
}

double lp_residual(const StorageLP& lp, const LPSolution& x) {
  const auto& p = lp.params;
  double worst = 0.0;
  auto over = [&](double v) { worst = std::max(worst, v); };
  over(-x.d_l);
  over(-x.d_c);
  over(-x.d_s);
  over(-x.h_s);
  over(-x.r_c);
  over(std::abs(x.d_l + x.d_s - lp.l_plus));
  over(x.d_l + x.d_c - p.c_grid);
  over(x.d_c + x.r_c - p.c_char);
  over(x.h_s + x.d_s - p.c_dis);
  over(x.r_c - lp.l_minus);
  return worst;
}

LPSolution solve_storage_lp(const StorageLP& lp) { return from_reduced(lp, enumerate(lp)); }

double storage_lp_value(const StorageLP& lp) { return solve_storage_lp(lp).objective; }

double brute_force_slack(const StorageLP& lp, double step) {
  const double w = std::max({std::abs(lp.w_h), std::abs(lp.w_s), std::abs(lp.w_c), std::abs(lp.w_r)});
  return w * step * 5.0;
}

LPSolution brute_force_lp(const StorageLP& lp, double step, std::size_t max_points) {
  if (!(step > 0.0)) throw std::invalid_argument("brute_force_lp: step must be > 0");
  check_inputs(lp);
  const auto& p = lp.params;

  // Grid points on [0, hi], always including hi itself.
  auto grid = [step](double hi) {
    std::vector<double> pts;
    if (hi < 0.0) return pts;
    const auto n = static_cast<std::size_t>(std::floor(hi / step + 1e-12));
    pts.reserve(n + 2);
    for (std::size_t k = 0; k <= n; ++k) pts.push_back(std::min(hi, static_cast<double>(k) * step));
    if (hi - pts.back() > 1e-12) pts.push_back(hi);
    return pts;
  };

  const double ds_hi = std::min(lp.l_plus, p.c_dis);
  const double rc_hi = std::min(lp.l_minus, p.c_char);
  auto count = [step](double hi) { return hi < 0.0 ? 0.0 : std::floor(hi / step) + 2.0; };
  if (count(ds_hi) * count(rc_hi) > static_cast<double>(max_points)) {
    throw ResourceError("brute_force_lp: grid exceeds evaluation budget");
  }
  const auto ds_grid = grid(ds_hi);
  const auto rc_grid = grid(rc_hi);

  // For fixed (d_s, r_c), h_s and d_c each range over an interval and enter
  // the objective linearly, so the best grid point in each is an endpoint.
  LPSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (double d_s : ds_grid) {
    const double h_hi = p.c_dis - d_s;
    const double h_s = (lp.w_h > 0.0 && h_hi > 0.0) ? h_hi : 0.0;
    const double d_l = lp.l_plus - d_s;
    for (double r_c : rc_grid) {
      const double c_hi = std::min(p.c_char - r_c, p.c_grid - d_l);
      if (c_hi < 0.0) continue;
      const double d_c = (lp.w_c < 0.0) ? c_hi : 0.0;
      LPSolution cand{d_l, d_c, d_s, h_s, r_c, 0.0};
      cand.objective = lp_objective(lp, cand);
      if (!found || cand.objective > best.objective) {
        best = cand;
        found = true;
      }
    }
  }
  if (!found) throw InfeasibleError("brute_force_lp: no feasible grid point");
  return best;
}

bool verify_optimality(const LPSolution& sol, const StorageLP& lp, double tol) {
  if (lp_residual(lp, sol) > tol) return false;
  const auto rhs = rhs_of(lp);
  const Vec4 x{sol.d_c, sol.d_s, sol.h_s, sol.r_c};
  const Vec4 c = objective_of(lp);

  std::vector<int> active;
  for (int r = 0; r < kRows; ++r) {
    if (std::abs(row_dot(r, x) - rhs[r]) <= tol) active.push_back(r);
  }

  // Vertex test: the active rows must span R^4.
  bool vertex = false;
  const int n = static_cast<int>(active.size());
  for (int a = 0; a < n && !vertex; ++a)
    for (int b = a + 1; b < n && !vertex; ++b)
      for (int d = b + 1; d < n && !vertex; ++d)
        for (int e = d + 1; e < n && !vertex; ++e) {
          std::array<std::array<int, kVars>, kVars> inv{};
          vertex = invert({active[a], active[b], active[d], active[e]}, inv);
        }
  if (!vertex) return false;

  // Extreme rays of {dir : A_active dir <= 0} are spanned by the null space of
  // three linearly independent active rows.
  auto minor3 = [](const std::array<std::array<double, 3>, 3>& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int d = b + 1; d < n; ++d) {
        const int rows[3] = {active[a], active[b], active[d]};
        Vec4 ray{};
        for (int col = 0; col < kVars; ++col) {
          std::array<std::array<double, 3>, 3> m{};
          for (int i = 0; i < 3; ++i) {
            int k = 0;
            for (int j = 0; j < kVars; ++j) {
              if (j != col) m[i][k++] = kA[rows[i]][j];
            }
          }
          ray[col] = ((col % 2 == 0) ? 1.0 : -1.0) * minor3(m);
        }
        if (std::abs(ray[0]) + std::abs(ray[1]) + std::abs(ray[2]) + std::abs(ray[3]) < 0.5) continue;
        for (double sign : {1.0, -1.0}) {
          Vec4 dir{sign * ray[0], sign * ray[1], sign * ray[2], sign * ray[3]};
          bool admissible = true;
          for (int r : active) {
            if (row_dot(r, dir) > tol) {
              admissible = false;
              break;
            }
          }
          const double cscale = std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]);
          if (admissible && dot(c, dir) > tol * std::max(1.0, cscale)) return false;
        }
      }
  return true;
}

}  // namespace storage_dr
