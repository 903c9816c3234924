#pragma once

// Truncated power series in one (s) and two (s, x) variables, and the
// generating-function iterations built on them: f_n(s), [f_n(s)]^i,
// H_{n+1}(s;x) = x f_q(H_n(s;x)) and J_n(s;x) = (s / beta^n) dH_n/ds.
//
// Coefficients of degree <= the truncation are exact (up to rounding); mass
// pushed beyond the truncation is never renormalised back and shows up as
// leakage() = 1 - sum of coefficients.

#include <qproc/errors.hpp>
#include <qproc/format.hpp>
#include <qproc/offspring_law.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace qproc {

inline constexpr std::size_t kDefaultTruncationCap = 4096;

namespace detail {

inline void check_trunc(std::size_t n, std::size_t cap) {
  if (n > cap)
    throw Error(ErrorKind::TruncationOverflow,
                "truncation " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
}

inline double kahan_sum(std::span<const double> v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace detail

/// Coefficients c_0..c_N of a power series in s, truncated at degree N.
class UniSeries {
 public:
  explicit UniSeries(std::size_t trunc) : c_(trunc + 1, 0.0) {}
  explicit UniSeries(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    if (c_.empty()) c_.push_back(0.0);
  }

  static UniSeries identity(std::size_t trunc) {
    UniSeries s(trunc);
    if (trunc >= 1) s.c_[1] = 1.0;
    return s;
  }
  static UniSeries constant(double v, std::size_t trunc) {
    UniSeries s(trunc);
    s.c_[0] = v;
    return s;
  }

  std::size_t trunc() const noexcept { return c_.size() - 1; }
  std::span<const double> coeffs() const noexcept { return c_; }
  double operator[](std::size_t j) const noexcept { return j < c_.size() ? c_[j] : 0.0; }
  double& at(std::size_t j) { return c_.at(j); }
  double* data() noexcept { return c_.data(); }

  double total() const { return detail::kahan_sum(c_); }
  double leakage() const { return 1.0 - total(); }

  double eval(double s) const {
    double acc = 0.0;
    for (std::size_t j = c_.size(); j-- > 0;) acc = acc * s + c_[j];
    return acc;
  }

  /// Highest index with a nonzero coefficient (0 for the zero series).
  std::size_t extent() const noexcept {
    std::size_t e = c_.size();
    while (e > 1 && c_[e - 1] == 0.0) --e;
    return e - 1;
  }

 private:
  std::vector<double> c_;
};

/// Truncated product; the result keeps the truncation of `a`.
inline UniSeries multiply(const UniSeries& a, const UniSeries& b) {
  const std::size_t n = a.trunc();
  UniSeries out(n);
  const std::size_t ea = std::min(a.extent(), n);
  const std::size_t eb = b.extent();
  const auto bc = b.coeffs();
  double* dst = out.data();
  for (std::size_t i = 0; i <= ea; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    const std::size_t top = std::min(eb, n - i);
    for (std::size_t j = 0; j <= top; ++j) dst[i + j] += ai * bc[j];
  }
  return out;
}

/// outer(inner(s)) by Horner's scheme over series, truncated at inner's N.
inline UniSeries compose(std::span<const double> outer, const UniSeries& inner,
                         std::size_t cap = kDefaultTruncationCap) {
  detail::check_trunc(inner.trunc(), cap);
  const std::size_t n = inner.trunc();
  UniSeries acc = UniSeries::constant(outer.empty() ? 0.0 : outer.back(), n);
  for (std::size_t k = outer.size() - 1; k-- > 0;) {
    acc = multiply(acc, inner);
    acc.at(0) += outer[k];
  }
  return acc;
}

inline UniSeries compose_poly(const OffspringLaw& outer, const UniSeries& inner,
                              std::size_t cap = kDefaultTruncationCap) {
  return compose(outer.probs(), inner, cap);
}

/// f_n(s), the n-fold iterate of the offspring generating function.
inline UniSeries iterate_pgf(const OffspringLaw& law, int n, std::size_t trunc,
                             std::size_t cap = kDefaultTruncationCap) {
  detail::check_trunc(trunc, cap);
  UniSeries f = UniSeries::identity(trunc);
  for (int k = 0; k < n; ++k) f = compose_poly(law, f, cap);
  return f;
}

/// [base(s)]^i by binary powering; coefficient j of [f_n]^i is P_ij(n).
inline UniSeries power_series(const UniSeries& base, int i,
                              std::size_t cap = kDefaultTruncationCap) {
  detail::check_trunc(base.trunc(), cap);
  if (i < 1) throw Error(ErrorKind::AssumptionViolated, "power must be >= 1");
  UniSeries result = UniSeries::constant(1.0, base.trunc());
  UniSeries sq = base;
  for (int e = i; e > 0; e >>= 1) {
    if (e & 1) result = multiply(result, sq);
    if (e > 1) sq = multiply(sq, sq);
  }
  return result;
}

/// Coefficients c_{j,l} of s^j x^l, truncated at (N, M).
class BiSeries {
 public:
  BiSeries(std::size_t trunc_s, std::size_t trunc_x)
      : n_(trunc_s), m_(trunc_x), c_((trunc_s + 1) * (trunc_x + 1), 0.0) {}

  /// H_0(s;x) = s.
  static BiSeries identity_s(std::size_t trunc_s, std::size_t trunc_x) {
    BiSeries b(trunc_s, trunc_x);
    if (trunc_s >= 1) b(1, 0) = 1.0;
    return b;
  }

  std::size_t trunc_s() const noexcept { return n_; }
  std::size_t trunc_x() const noexcept { return m_; }

  double operator()(std::size_t j, std::size_t l) const noexcept { return c_[j * (m_ + 1) + l]; }
  double& operator()(std::size_t j, std::size_t l) noexcept { return c_[j * (m_ + 1) + l]; }
  double get(std::size_t j, std::size_t l) const noexcept {
    return (j <= n_ && l <= m_) ? (*this)(j, l) : 0.0;
  }
  std::span<const double> row(std::size_t j) const noexcept {
    return std::span<const double>(c_).subspan(j * (m_ + 1), m_ + 1);
  }

  double total() const { return detail::kahan_sum(c_); }
  double leakage() const { return 1.0 - total(); }

  double eval(double s, double x) const {
    double acc = 0.0;
    for (std::size_t j = n_ + 1; j-- > 0;) {
      double r = 0.0;
      for (std::size_t l = m_ + 1; l-- > 0;) r = r * x + (*this)(j, l);
      acc = acc * s + r;
    }
    return acc;
  }

 private:
  std::size_t n_, m_;
  std::vector<double> c_;
};

namespace detail {

struct RowExtent {
  std::size_t lo = 1, hi = 0;  // empty when lo > hi
};

inline std::vector<RowExtent> row_extents(const BiSeries& b) {
  std::vector<RowExtent> ext(b.trunc_s() + 1);
  for (std::size_t j = 0; j <= b.trunc_s(); ++j) {
    const auto r = b.row(j);
    std::size_t lo = 0;
    while (lo < r.size() && r[lo] == 0.0) ++lo;
    if (lo == r.size()) continue;
    std::size_t hi = r.size() - 1;
    while (r[hi] == 0.0) --hi;
    ext[j] = {lo, hi};
  }
  return ext;
}

}  // namespace detail

/// Truncated bivariate product; the result keeps the truncation of `a`.
inline BiSeries multiply(const BiSeries& a, const BiSeries& b) {
  const std::size_t n = a.trunc_s(), m = a.trunc_x();
  BiSeries out(n, m);
  const auto ea = detail::row_extents(a);
  const auto eb = detail::row_extents(b);
  const std::size_t nb = std::min(n, b.trunc_s());
  for (std::size_t j1 = 0; j1 <= n; ++j1) {
    if (ea[j1].lo > ea[j1].hi) continue;
    for (std::size_t l1 = ea[j1].lo; l1 <= ea[j1].hi; ++l1) {
      const double v = a(j1, l1);
      if (v == 0.0) continue;
      for (std::size_t j2 = 0; j2 <= std::min(nb, n - j1); ++j2) {
        const auto e = eb[j2];
        if (e.lo > e.hi || l1 + e.lo > m) continue;
        const std::size_t top = std::min(e.hi, m - l1);
        double* dst = &out(j1 + j2, l1);
        const auto src = b.row(j2);
        for (std::size_t l2 = e.lo; l2 <= top; ++l2) dst[l2] += v * src[l2];
      }
    }
  }
  return out;
}

/// outer(H(s;x)) for a polynomial outer, by Horner's scheme.
inline BiSeries compose(std::span<const double> outer, const BiSeries& inner,
                        std::size_t cap = kDefaultTruncationCap) {
  detail::check_trunc(std::max(inner.trunc_s(), inner.trunc_x()), cap);
  BiSeries acc(inner.trunc_s(), inner.trunc_x());
  acc(0, 0) = outer.empty() ? 0.0 : outer.back();
  for (std::size_t k = outer.size() - 1; k-- > 0;) {
    acc = multiply(acc, inner);
    acc(0, 0) += outer[k];
  }
  return acc;
}

/// H -> x f_q(H): one step of the joint (population, progeny) recursion
/// of the conjugate subcritical system.
inline BiSeries h_recursion_step(const OffspringLaw& law_q, const BiSeries& h,
                                 std::size_t cap = kDefaultTruncationCap) {
  const BiSeries g = compose(law_q.probs(), h, cap);
  BiSeries out(h.trunc_s(), h.trunc_x());
  for (std::size_t j = 0; j <= h.trunc_s(); ++j)
    for (std::size_t l = 0; l < h.trunc_x(); ++l) out(j, l + 1) = g(j, l);
  return out;
}

/// Joint generating function J_n(s;x) = E s^W(n) x^S_n from W(0) = 1.
/// Coefficient (j, l) is P{W(n) = j, S_n = l}.
inline BiSeries joint_gf(const OffspringLaw& law, const SystemParams& params, int n,
                         std::size_t trunc_s, std::size_t trunc_x,
                         std::size_t cap = kDefaultTruncationCap) {
  if (!(params.beta < 1.0))
    throw Error(ErrorKind::CriticalLawUnsupported, "beta must be below 1");
  detail::check_trunc(std::max(trunc_s, trunc_x), cap);
  const OffspringLaw law_q = conjugate_law(law, params.q);
  BiSeries h = BiSeries::identity_s(trunc_s, trunc_x);
  for (int k = 0; k < n; ++k) h = h_recursion_step(law_q, h, cap);

  // s/beta^n * dH/ds: coefficient j picks up the factor j.
  const double log_scale = -static_cast<double>(n) * std::log(params.beta);
  const double scale = std::exp(log_scale);
  BiSeries j_gf(trunc_s, trunc_x);
  for (std::size_t j = 1; j <= trunc_s; ++j)
    for (std::size_t l = 0; l <= trunc_x; ++l) {
      const double v = h(j, l);
      if (v == 0.0) continue;
      j_gf(j, l) = std::isfinite(scale) ? static_cast<double>(j) * v * scale
                                        : static_cast<double>(j) * std::exp(std::log(v) + log_scale);
    }
  return j_gf;
}

inline BiSeries joint_gf(const OffspringLaw& law, int n, std::size_t trunc_s, std::size_t trunc_x,
                         std::size_t cap = kDefaultTruncationCap) {
  return joint_gf(law, derive_params(law), n, trunc_s, trunc_x, cap);
}

/// P{S_n = l} for l = 0..M, i.e. the coefficients of J_n(1;x).
inline std::vector<double> marginal_S(const BiSeries& joint) {
  std::vector<double> out(joint.trunc_x() + 1, 0.0);
  for (std::size_t j = 0; j <= joint.trunc_s(); ++j) {
    const auto r = joint.row(j);
    for (std::size_t l = 0; l < r.size(); ++l) out[l] += r[l];
  }
  return out;
}

/// CSV rows "j,coeff".
inline void write_csv(std::ostream& os, const UniSeries& s) {
  for (std::size_t j = 0; j <= s.trunc(); ++j) os << j << ',' << format_double(s[j]) << '\n';
}

/// CSV rows "j,l,coeff" for nonzero coefficients.
inline void write_csv(std::ostream& os, const BiSeries& b) {
  for (std::size_t j = 0; j <= b.trunc_s(); ++j)
    for (std::size_t l = 0; l <= b.trunc_x(); ++l)
      if (b(j, l) != 0.0) os << j << ',' << l << ',' << format_double(b(j, l)) << '\n';
}

}  // namespace qproc
