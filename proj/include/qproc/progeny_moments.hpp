#pragma once

// Moments of the total progeny S_n and the generating functions of the
// conjugate (subcritical) system used by the limit theorems:
//   h(x)   = E x^V,            h = x f_q(h)
//   h_n(x) = E x^{V_n},        h_0 = 1, h_{n+1} = x f_q(h_n)
//   u(x)   = x f_q'(h(x)),     v(x) = x f_q''(h(x)) / (2 u(x))
//   Delta_n(x) = h(x) - h_n(x), R_n(s;x) = h(x) - H_n(s;x).

#include <qproc/errors.hpp>
#include <qproc/offspring_law.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <string_view>
#include <vector>

namespace qproc {

/// E S_n = (1 + gamma_q) n - gamma_q (1 - beta^n) / (1 - beta).
inline double expected_Sn(const SystemParams& params, int n) {
  if (n <= 0) return 0.0;
  const double b = params.beta;
  const double geom = (1.0 - std::pow(b, n)) / (1.0 - b);
  return (1.0 + params.gamma_q) * n - params.gamma_q * geom;
}

struct MomentReport {
  int n = 0;
  double mean = 0.0;      // E S_n
  double second = 0.0;    // E S_n^2
  double variance = 0.0;  // Var S_n
  double mean_W = 1.0;    // E W(n)
  double beta_pow = 1.0;  // beta^n
};

/// Exact moments of S_n from W(0) = 1 by propagating the derivatives of
/// H_k(s;x) at (1,1) through H_{k+1} = x f_q(H_k), and reading them off
/// J_n = (s / beta^n) dH_n/ds. All s-derivatives carry H_s = beta^k and are
/// stored divided by beta^k, so nothing underflows for large n.
inline MomentReport moment_recursion(const SystemParams& params, int n) {
  if (!(params.beta < 1.0))
    throw Error(ErrorKind::CriticalLawUnsupported, "beta must be below 1");
  const double beta = params.beta, b = params.b_q, t = params.third_q;
  double hx = 0.0;    // H_x
  double hxx = 0.0;   // H_xx
  double hsx = 0.0;   // H_sx / beta^k
  double hsxx = 0.0;  // H_sxx / beta^k
  double hss = 0.0;   // H_ss / beta^k
  double bpow = 1.0;  // beta^k
  for (int k = 0; k < n; ++k) {
    const double hx1 = 1.0 + beta * hx;
    const double hxx1 = 2.0 * beta * hx + b * hx * hx + beta * hxx;
    const double hsx1 = (beta + b * hx + beta * hsx) / beta;
    const double hsxx1 = (2.0 * b * hx + 2.0 * beta * hsx + t * hx * hx + b * hxx +
                          2.0 * b * hx * hsx + beta * hsxx) /
                         beta;
    const double hss1 = b * bpow / beta + hss;
    hx = hx1;
    hxx = hxx1;
    hsx = hsx1;
    hsxx = hsxx1;
    hss = hss1;
    bpow *= beta;
  }
  MomentReport r;
  r.n = n;
  r.mean = hsx;
  r.second = hsxx + hsx;
  r.variance = std::max(0.0, hsxx + hsx - hsx * hsx);
  r.mean_W = 1.0 + hss;
  r.beta_pow = bpow;
  return r;
}

inline MomentReport moment_recursion(const SystemParams& params, const OffspringLaw&, int n) {
  return moment_recursion(params, n);
}

namespace detail {

/// (f(a) - f(b)) / (a - b) for a polynomial f, without cancellation.
inline double divided_difference(const OffspringLaw& law, double a, double b) {
  const auto p = law.probs();
  double e = 1.0;     // sum_{i<k} a^i b^(k-1-i) at k = 1
  double apow = 1.0;  // a^(k-1)
  double acc = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    acc += p[k] * e;
    apow *= a;
    e = apow + b * e;
  }
  return acc;
}

}  // namespace detail

inline constexpr int kFixedPointCap = 100000;

/// Minimal solution of h = x f_q(h): monotone iteration from 0, then Newton
/// once the step falls below 1e-4.
inline double h_of_x(const OffspringLaw& law_q, double x) {
  if (!(x > 0.0)) return 0.0;
  double h = 0.0;
  int it = 0;
  for (; it < kFixedPointCap; ++it) {
    const double next = x * pgf_eval(law_q, h);
    const double step = next - h;
    h = next;
    if (!std::isfinite(h) || h > 1e6)
      throw Error(ErrorKind::ConvergenceFailure, "h(x) iteration diverged");
    if (std::abs(step) < 1e-4) break;
  }
  for (int k = 0; k < 50; ++k) {
    const double g = x * pgf_eval(law_q, h) - h;
    if (std::abs(g) < 1e-16) break;
    const double d = x * pgf_eval(law_q, h, 1) - 1.0;
    if (d == 0.0) break;
    const double next = h - g / d;
    if (next == h) break;
    h = next;
  }
  if (!(std::abs(h - x * pgf_eval(law_q, h)) < 1e-14))
    throw Error(ErrorKind::ConvergenceFailure, "h(x) residual above 1e-14");
  return h;
}

/// h_n(x) = E x^{V_n} with h_0 = 1 (V_0 = 0).
inline double h_n_of_x(const OffspringLaw& law_q, int n, double x) {
  double h = 1.0;
  for (int k = 0; k < n; ++k) h = x * pgf_eval(law_q, h);
  return h;
}

/// Delta_n(x) = h(x) - h_n(x), propagated as Delta_{k+1} = x Delta_k D(h, h_k)
/// with D the divided difference of f_q, which keeps full relative accuracy
/// after h_n has converged to h in floating point.
inline std::vector<double> delta_sequence(const OffspringLaw& law_q, int n, double x) {
  const double h = h_of_x(law_q, x);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  double d = h - 1.0;
  double hk = 1.0;
  out.push_back(d);
  for (int k = 0; k < n; ++k) {
    d = x * d * detail::divided_difference(law_q, h, hk);
    hk = x * pgf_eval(law_q, hk);
    out.push_back(d);
  }
  return out;
}

inline double delta_n(const OffspringLaw& law_q, int n, double x) {
  return delta_sequence(law_q, n, x).back();
}

inline double u_of_x(const OffspringLaw& law_q, double x) {
  return x * pgf_eval(law_q, h_of_x(law_q, x), 1);
}

inline double v_of_x(const OffspringLaw& law_q, double x) {
  const double h = h_of_x(law_q, x);
  const double u = x * pgf_eval(law_q, h, 1);
  if (u == 0.0) throw Error(ErrorKind::DivisionByZero, "u(x) = 0");
  return x * pgf_eval(law_q, h, 2) / (2.0 * u);
}

/// C_rho = (1/2) d^2/dtheta^2 [u(e^theta)/beta] at 0, by the chain rule from
/// the closed-form boundary derivatives of h.
inline double c_rho(const OffspringLaw& law_q) {
  const double beta = pgf_eval(law_q, 1.0, 1);
  if (!(beta < 1.0)) throw Error(ErrorKind::CriticalLawUnsupported, "conjugate law must be subcritical");
  const double value =
      detail::c_rho_closed_form(beta, pgf_eval(law_q, 1.0, 2), pgf_eval(law_q, 1.0, 3));
  if (!(value > 0.0)) throw Error(ErrorKind::NonpositiveCRho, "C_rho must be positive");
  return value;
}

inline double c_rho(const SystemParams& params, const OffspringLaw& law_q) {
  (void)params;
  return c_rho(law_q);
}

/// Centered second differences of u(e^theta)/beta at theta1 and theta2,
/// Richardson-combined for the O(theta^2) error term.
inline double c_rho_finite_difference(const OffspringLaw& law_q, double theta1 = 1e-3,
                                      double theta2 = 1e-4) {
  const double beta = pgf_eval(law_q, 1.0, 1);
  auto g = [&](double th) { return u_of_x(law_q, std::exp(th)) / beta; };
  const double g0 = g(0.0);
  auto second = [&](double th) { return (g(th) - 2.0 * g0 + g(-th)) / (th * th); };
  const double r = (theta1 / theta2) * (theta1 / theta2);
  const double d2 = (r * second(theta2) - second(theta1)) / (r - 1.0);
  return 0.5 * d2;
}

enum class LemmaId { L1, L2, L3, L4, L5, L6 };

inline std::string_view to_string(LemmaId id) {
  static constexpr std::string_view names[] = {"L1", "L2", "L3", "L4", "L5", "L6"};
  return names[static_cast<int>(id)];
}

struct ExpansionReport {
  LemmaId lemma = LemmaId::L1;
  std::vector<double> grid;
  std::vector<double> fitted;
  std::vector<double> target;
  std::vector<double> residuals;  // relative: (fitted - target) / |target|

  double max_abs_residual() const {
    double m = 0.0;
    for (double r : residuals) m = std::max(m, std::abs(r));
    return m;
  }
};

namespace detail {

/// Richardson extrapolation to t -> 0 of samples D(t_k) on a geometric grid
/// t_k = t_0 / r^k, assuming D(t) = a_0 + a_1 t + a_2 t^2 + ...
inline double richardson(const std::vector<double>& t, const std::vector<double>& d,
                         std::size_t max_order = 4) {
  if (d.empty()) return std::nan("");
  if (d.size() == 1) return d[0];
  const double ratio = t[0] / t[1];
  std::vector<double> col = d;
  const std::size_t order = std::min(max_order, d.size() - 1);
  double factor = 1.0;
  for (std::size_t m = 1; m <= order; ++m) {
    factor *= ratio;
    std::vector<double> next(col.size() - 1);
    for (std::size_t k = 0; k + 1 < col.size(); ++k)
      next[k] = (factor * col[k + 1] - col[k]) / (factor - 1.0);
    col = std::move(next);
  }
  return col.back();
}

/// For g(t) = a_1 t + a_2 t^2 + ..., estimates (a_1, a_2) on a geometric grid.
template <class G>
std::pair<double, double> fit_first_two(G&& g, const std::vector<double>& grid) {
  std::vector<double> d1(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) d1[k] = g(grid[k]) / grid[k];
  std::vector<double> t2(grid.size() - 1), d2(grid.size() - 1);
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    t2[k] = grid[k];
    d2[k] = (d1[k] - d1[k + 1]) / (grid[k] - grid[k + 1]);
  }
  return {richardson(grid, d1), richardson(t2, d2)};
}

inline double rel_residual(double fitted, double target) {
  return target == 0.0 ? fitted : (fitted - target) / std::abs(target);
}

}  // namespace detail

/// Geometric grid t0 / 2^k, k = 0..count-1.
inline std::vector<double> geometric_grid(double t0, int count) {
  std::vector<double> g;
  for (int k = 0; k < count; ++k) g.push_back(std::ldexp(t0, -k));
  return g;
}

inline std::vector<double> default_lemma_grid(LemmaId id) {
  if (id == LemmaId::L6) return {1e-3};
  return geometric_grid(0x1p-5, 9);
}

/// Fits the local expansion of one lemma over `grid` and reports it against
/// its closed-form coefficients. The grid holds t = 1 - x for L1-L2 and theta
/// (x = e^theta) for L3-L6; L5 and L6 use the horizon n.
inline ExpansionReport verify_lemma(const OffspringLaw& law, LemmaId id, std::vector<double> grid = {},
                                    int n = 20) {
  const SystemParams sp = derive_params(law);
  const OffspringLaw law_q = conjugate_law(law, sp.q);
  const double beta = sp.beta, gamma = sp.gamma_q, b = sp.b_q;
  if (grid.empty()) grid = default_lemma_grid(id);

  ExpansionReport rep;
  rep.lemma = id;
  rep.grid = grid;
  auto finish = [&] {
    for (std::size_t k = 0; k < rep.fitted.size(); ++k)
      rep.residuals.push_back(detail::rel_residual(rep.fitted[k], rep.target[k]));
  };

  switch (id) {
    case LemmaId::L1: {
      // 1 - h(x) ~ c1 (1-x) - c2 (1-x)^2
      auto [a1, a2] = detail::fit_first_two([&](double t) { return 1.0 - h_of_x(law_q, 1.0 - t); }, grid);
      rep.fitted = {a1, -a2};
      rep.target = {1.0 / (1.0 - beta), (2.0 * beta * (1.0 - beta) + b) / (2.0 * std::pow(1.0 - beta, 3))};
      break;
    }
    case LemmaId::L2: {
      // u(x) = beta x [1 - gamma (1-x)] + rho(x), rho / (1-x)^2 -> const
      auto [a1, a2] = detail::fit_first_two([&](double t) { return beta - u_of_x(law_q, 1.0 - t); }, grid);
      (void)a2;
      std::vector<double> ratio(grid.size());
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const double rho = u_of_x(law_q, 1.0 - t) - beta * (1.0 - t) * (1.0 - gamma * t);
        ratio[k] = rho / (t * t);
      }
      const double h1 = 1.0 / (1.0 - beta);
      const double h2 = (2.0 * beta * (1.0 - beta) + b) / std::pow(1.0 - beta, 3);
      const double u2 = 2.0 * b * h1 + sp.third_q * h1 * h1 + b * h2;
      rep.fitted = {a1, detail::richardson(grid, ratio)};
      rep.target = {beta * (1.0 + gamma), 0.5 * u2 - beta * gamma};
      break;
    }
    case LemmaId::L3: {
      // h(e^theta) - 1 ~ theta/(1-beta) + (2 + beta gamma) / (2 (1-beta)^2) theta^2
      auto [a1, a2] = detail::fit_first_two([&](double th) { return h_of_x(law_q, std::exp(th)) - 1.0; }, grid);
      rep.fitted = {a1, a2};
      rep.target = {1.0 / (1.0 - beta), (2.0 + beta * gamma) / (2.0 * (1.0 - beta) * (1.0 - beta))};
      break;
    }
    case LemmaId::L4: {
      // u(e^theta)/beta - 1 = (1 + gamma) theta + C_rho theta^2 + o(theta^2)
      auto [a1, a2] =
          detail::fit_first_two([&](double th) { return u_of_x(law_q, std::exp(th)) / beta - 1.0; }, grid);
      rep.fitted = {a1, a2};
      rep.target = {1.0 + gamma, sp.c_rho};
      break;
    }
    case LemmaId::L5: {
      // Delta_n(e^theta) / u^n(e^theta) = theta / (1-beta) + O(theta^2)
      auto g = [&](double th) {
        const double x = std::exp(th);
        return delta_n(law_q, n, x) / std::pow(u_of_x(law_q, x), n);
      };
      auto [a1, a2] = detail::fit_first_two(g, grid);
      (void)a2;
      rep.fitted = {a1};
      rep.target = {1.0 / (1.0 - beta)};
      break;
    }
    case LemmaId::L6: {
      // ln prod u_k(e^theta) vs -(1 - u/beta) n - gamma theta sum u^k
      for (double th : grid) {
        const double x = std::exp(th);
        double lhs = 0.0, hk = 1.0;
        for (int k = 0; k < n; ++k) {
          lhs += std::log(x * pgf_eval(law_q, hk, 1) / beta);
          hk = x * pgf_eval(law_q, hk);
        }
        const double u = u_of_x(law_q, x);
        double geom = 0.0, upow = 1.0;
        for (int k = 0; k < n; ++k) {
          geom += upow;
          upow *= u;
        }
        rep.fitted.push_back(lhs);
        rep.target.push_back(-(1.0 - u / beta) * n - gamma * th * geom);
      }
      break;
    }
  }
  finish();
  return rep;
}

/// Evaluation of R_n(s;x) on a grid of points and its reciprocal representation.
struct RepresentationPoint {
  double s = 0.0, x = 0.0;
  std::vector<double> r;         // R_0 .. R_n
  std::vector<double> residual;  // res_1 .. res_n
  bool bound_ok = true;          // |R_m| <= beta^(m-k) |R_k| for k in {0, m/2}
  bool nonzero = true;           // R_m never vanishes
  bool cauchy_ok = true;         // |res_{m+1} - res_m| nonincreasing beyond m = 10
};

struct RepresentationReport {
  int n = 0;
  std::vector<RepresentationPoint> points;

  bool all_bounds_ok() const {
    return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.bound_ok; });
  }
  bool all_nonzero() const {
    return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.nonzero; });
  }
  bool all_cauchy() const {
    return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.cauchy_ok; });
  }
};

inline std::vector<std::pair<double, double>> default_representation_grid() {
  std::vector<std::pair<double, double>> g;
  for (double s : {0.0, 0.25, 0.5, 1.0})
    for (double x : {0.5, 0.8, 0.95}) g.emplace_back(s, x);
  return g;
}

/// Checks the geometric bound on R_n and the convergence of
///   res_n = u^n / R_n - 1 / R_0 - v (1 - u^n) / (1 - u),
/// which equals the accumulated sum of the remainder terms eps_k u^k.
inline RepresentationReport check_representation(const OffspringLaw& law, int n,
                                                 std::vector<std::pair<double, double>> grid = {}) {
  const SystemParams sp = derive_params(law);
  const OffspringLaw law_q = conjugate_law(law, sp.q);
  if (grid.empty()) grid = default_representation_grid();
  RepresentationReport rep;
  rep.n = n;
  for (auto [s, x] : grid) {
    RepresentationPoint pt;
    pt.s = s;
    pt.x = x;
    const double h = h_of_x(law_q, x);
    const double u = x * pgf_eval(law_q, h, 1);
    const double v = x * pgf_eval(law_q, h, 2) / (2.0 * u);
    double r = h - s, hk = s;
    pt.r.push_back(r);
    for (int k = 0; k < n; ++k) {
      r = x * r * detail::divided_difference(law_q, h, hk);
      hk = x * pgf_eval(law_q, hk);
      pt.r.push_back(r);
    }
    for (double rv : pt.r)
      if (rv == 0.0) pt.nonzero = false;
    for (int m = 1; m <= n; ++m) {
      for (int k : {0, m / 2}) {
        const double bound = std::pow(sp.beta, m - k) * std::abs(pt.r[static_cast<std::size_t>(k)]);
        if (std::abs(pt.r[static_cast<std::size_t>(m)]) > bound * (1.0 + 1e-12)) pt.bound_ok = false;
      }
    }
    if (pt.nonzero) {
      for (int m = 1; m <= n; ++m) {
        const double um = std::pow(u, m);
        pt.residual.push_back(um / pt.r[static_cast<std::size_t>(m)] - 1.0 / pt.r[0] -
                              v * (1.0 - um) / (1.0 - u));
      }
      // Differences shrink geometrically until they hit the rounding floor.
      double prev = std::numeric_limits<double>::infinity();
      for (int m = 10; m + 1 < n; ++m) {
        const double a = pt.residual[static_cast<std::size_t>(m)];
        const double bnext = pt.residual[static_cast<std::size_t>(m - 1)];
        const double diff = std::abs(a - bnext);
        const double floor = 1e-12 * std::max(1.0, std::abs(a));
        if (diff > prev && diff > floor) pt.cauchy_ok = false;
        prev = std::max(diff, floor);
      }
    } else {
      pt.cauchy_ok = false;
    }
    rep.points.push_back(std::move(pt));
  }
  return rep;
}

}  // namespace qproc
