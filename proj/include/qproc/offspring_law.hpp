#pragma once

// Offspring distribution of a Galton-Watson system with finite support,
// its generating function f(s), and the scalar parameters of the
// associated Q-process.

#include <qproc/errors.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace qproc {

inline constexpr std::size_t kDefaultMaxSupport = 64;

/// Finite-support offspring law {p_0, ..., p_K}. Immutable once built.
///
/// Construction enforces p_0 > 0 and p_0 + p_1 < 1. The critical case m = 1
/// is accepted here so that generating-function utilities still apply;
/// derive_params() rejects it.
class OffspringLaw {
 public:
  explicit OffspringLaw(std::vector<double> probs,
                        std::size_t max_support = kDefaultMaxSupport)
      : probs_(std::move(probs)) {
    if (probs_.empty())
      throw Error(ErrorKind::NotAProbabilityVector, "empty probability vector");
    double total = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw Error(ErrorKind::NotAProbabilityVector, "entry outside [0,1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw Error(ErrorKind::NotAProbabilityVector,
                  "probabilities sum to " + std::to_string(total));
    while (probs_.size() > 1 && probs_.back() == 0.0) probs_.pop_back();
    if (probs_.size() - 1 > max_support)
      throw Error(ErrorKind::AssumptionViolated, "support exceeds the configured maximum");
    if (!(probs_[0] > 0.0))
      throw Error(ErrorKind::AssumptionViolated, "p_0 must be positive");
    const double p01 = probs_[0] + (probs_.size() > 1 ? probs_[1] : 0.0);
    if (!(p01 < 1.0))
      throw Error(ErrorKind::AssumptionViolated, "p_0 + p_1 must be below 1");
    for (std::size_t k = 1; k < probs_.size(); ++k) mean_ += static_cast<double>(k) * probs_[k];
  }

  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t k) const noexcept { return k < probs_.size() ? probs_[k] : 0.0; }
  /// Largest k with p_k > 0.
  std::size_t degree() const noexcept { return probs_.size() - 1; }
  double mean() const noexcept { return mean_; }

  bool is_critical() const noexcept { return std::abs(mean_ - 1.0) <= 1e-12; }
  bool is_supercritical() const noexcept { return mean_ > 1.0 && !is_critical(); }

 private:
  std::vector<double> probs_;
  double mean_ = 0.0;
};

/// Derived scalars of the Q-process built on one offspring law.
struct SystemParams {
  double q = 1.0;        // extinction probability
  double beta = 0.0;     // f'(q)
  double gamma_q = 0.0;  // q f''(q) / (beta (1 - beta))
  double b_q = 0.0;      // f_q''(1)
  double alpha = 1.0;    // w'(1) = 1 + gamma_q (1 - beta)
  double c_rho = 0.0;    // second-order coefficient of u(e^theta)/beta
  double third_q = 0.0;  // f_q'''(1)
};

/// Value of the order-th derivative of f at s (order in 0..3), by Horner.
inline double pgf_eval(const OffspringLaw& law, double s, int order = 0) {
  const auto p = law.probs();
  double acc = 0.0;
  for (std::size_t k = p.size(); k-- > static_cast<std::size_t>(order);) {
    double falling = 1.0;
    for (int r = 0; r < order; ++r) falling *= static_cast<double>(k - static_cast<std::size_t>(r));
    acc = acc * s + falling * p[k];
  }
  return acc;
}

/// Smallest root of f(s) = s in [0, 1].
inline double extinction_probability(const OffspringLaw& law) {
  if (!(law.mean() > 1.0) || law.is_critical()) return 1.0;

  auto g = [&](double s) { return pgf_eval(law, s) - s; };
  // g(0) = p_0 > 0 and g < 0 just below 1 when m > 1.
  double lo = 0.0;
  double eps = 0.5;
  while (g(1.0 - eps) >= 0.0) {
    lo = 1.0 - eps;
    eps *= 0.5;
    if (eps < 1e-16) throw Error(ErrorKind::ConvergenceFailure, "no sub-unit bracket");
  }
  double hi = 1.0 - eps;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  double s = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {
    const double d = pgf_eval(law, s, 1) - 1.0;
    if (d == 0.0) break;
    const double next = s - g(s) / d;
    if (!(next >= lo && next <= hi)) break;
    s = next;
  }
  if (std::abs(g(s)) > 1e-12)
    throw Error(ErrorKind::ConvergenceFailure, "extinction probability residual too large");
  return s;
}

/// Conjugate law f_q(s) = f(qs)/q, with probabilities p_k q^(k-1). Subcritical, mean beta.
inline OffspringLaw conjugate_law(const OffspringLaw& law, double q) {
  if (q == 1.0) return law;
  const auto p = law.probs();
  std::vector<double> out(p.size());
  double qpow = 1.0 / q;
  for (std::size_t k = 0; k < p.size(); ++k) {
    out[k] = p[k] * qpow;
    qpow *= q;
  }
  // Absorbs the rounding left in q (|f(q) - q| <= 1e-12).
  double total = 0.0;
  for (double v : out) total += v;
  for (double& v : out) v /= total;
  return OffspringLaw(std::move(out), std::max(kDefaultMaxSupport, p.size() - 1));
}

inline OffspringLaw conjugate_law(const OffspringLaw& law) {
  return conjugate_law(law, extinction_probability(law));
}

namespace detail {

// C_rho = (u''(1) + u'(1)) / (2 beta) with u(x) = x f_q'(h(x)),
// h'(1) = 1/(1-beta), h''(1) = (2 beta (1-beta) + b_q) / (1-beta)^3.
inline double c_rho_closed_form(double beta, double b_q, double third_q) {
  const double h1 = 1.0 / (1.0 - beta);
  const double h2 = (2.0 * beta * (1.0 - beta) + b_q) / std::pow(1.0 - beta, 3);
  const double u1 = beta + b_q * h1;
  const double u2 = 2.0 * b_q * h1 + third_q * h1 * h1 + b_q * h2;
  return (u2 + u1) / (2.0 * beta);
}

}  // namespace detail

inline SystemParams derive_params(const OffspringLaw& law) {
  if (law.is_critical())
    throw Error(ErrorKind::CriticalLawUnsupported, "m = 1 gives beta = 1 (transient Q-process)");
  SystemParams sp;
  sp.q = extinction_probability(law);
  sp.beta = pgf_eval(law, sp.q, 1);
  if (!(sp.beta < 1.0))
    throw Error(ErrorKind::CriticalLawUnsupported, "beta must be below 1");
  const double f2 = pgf_eval(law, sp.q, 2);
  sp.b_q = sp.q * f2;
  sp.third_q = sp.q * sp.q * pgf_eval(law, sp.q, 3);
  sp.gamma_q = sp.b_q / (sp.beta * (1.0 - sp.beta));
  sp.alpha = 1.0 + sp.gamma_q * (1.0 - sp.beta);
  sp.c_rho = detail::c_rho_closed_form(sp.beta, sp.b_q, sp.third_q);
  return sp;
}

/// Parses a law literal "p0,p1,...,pK".
inline std::vector<double> parse_law_literal(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string_view item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw Error(ErrorKind::NotAProbabilityVector, "cannot parse '" + std::string(item) + "'");
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

}  // namespace qproc
