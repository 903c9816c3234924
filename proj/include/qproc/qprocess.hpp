#pragma once

// The Q-process {W(n)}: exact transition laws, a spine-decomposition sampler
// and a forward dynamic-programming table for the joint law of (W(n), S_n).

#include <qproc/errors.hpp>
#include <qproc/format.hpp>
#include <qproc/offspring_law.hpp>
#include <qproc/parallel.hpp>
#include <qproc/random.hpp>
#include <qproc/series.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

namespace qproc {

namespace detail {

inline void require_recurrent(const SystemParams& params) {
  if (!(params.beta < 1.0))
    throw Error(ErrorKind::CriticalLawUnsupported, "beta must be below 1");
}

/// w(s) = s f'(qs) / beta: the size-biased law k p_k q^(k-1) / beta,
/// renormalised like conjugate_law.
inline std::vector<double> size_biased_weights(const OffspringLaw& law, const SystemParams& params) {
  const auto p = law.probs();
  std::vector<double> w(p.size(), 0.0);
  double qpow = 1.0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    w[k] = static_cast<double>(k) * p[k] * qpow / params.beta;
    qpow *= params.q;
  }
  const double total = kahan_sum(w);
  for (double& v : w) v /= total;
  return w;
}

inline UniSeries truncated(std::span<const double> coeffs, std::size_t trunc) {
  UniSeries out(trunc);
  for (std::size_t k = 0; k < coeffs.size() && k <= trunc; ++k) out.at(k) = coeffs[k];
  return out;
}

}  // namespace detail

/// One-step law Q_{ij}(1) for a fixed i, over j = 0..j_cap (entry 0 is 0).
struct QTransition {
  std::int64_t from_state = 1;
  std::vector<double> probs;
  double leakage = 0.0;
};

/// Coefficients of [f_q(s)]^(i-1) w(s) up to j_cap.
inline QTransition q_transition_probs(const SystemParams& params, const OffspringLaw& law,
                                      std::int64_t i, std::size_t j_cap) {
  detail::require_recurrent(params);
  if (i < 1) throw Error(ErrorKind::AssumptionViolated, "state must be >= 1");
  const OffspringLaw law_q = conjugate_law(law, params.q);
  UniSeries row = detail::truncated(detail::size_biased_weights(law, params), j_cap);
  if (i > 1) {
    const UniSeries fq = detail::truncated(law_q.probs(), j_cap);
    row = multiply(row, power_series(fq, static_cast<int>(i - 1), std::max(j_cap, kDefaultTruncationCap)));
  }
  QTransition t;
  t.from_state = i;
  t.probs.assign(row.coeffs().begin(), row.coeffs().end());
  t.leakage = std::max(0.0, row.leakage());
  return t;
}

/// Q_{ij}(n) = j q^(j-i) P_ij(n) / (i beta^n), with P_ij(n) the s^j
/// coefficient of [f_n(s)]^i. Evaluated in log space.
inline double q_n_step(const SystemParams& params, const OffspringLaw& law, std::int64_t i,
                       std::int64_t j, int n, std::size_t cap = kDefaultTruncationCap) {
  detail::require_recurrent(params);
  if (i < 1 || j < 1) return 0.0;
  if (n == 0) return i == j ? 1.0 : 0.0;
  const UniSeries fn = iterate_pgf(law, n, static_cast<std::size_t>(j), cap);
  const double pij = power_series(fn, static_cast<int>(i), cap)[static_cast<std::size_t>(j)];
  if (!(pij > 0.0)) return 0.0;
  const double log_q = std::log(params.q);
  return std::exp(std::log(static_cast<double>(j)) + static_cast<double>(j - i) * log_q +
                  std::log(pij) - std::log(static_cast<double>(i)) -
                  static_cast<double>(n) * std::log(params.beta));
}

/// Row {Q_{ij}(n)}_{j = 0..j_cap} from one series evaluation.
inline std::vector<double> q_n_step_row(const SystemParams& params, const OffspringLaw& law,
                                        std::int64_t i, int n, std::size_t j_cap,
                                        std::size_t cap = kDefaultTruncationCap) {
  detail::require_recurrent(params);
  std::vector<double> row(j_cap + 1, 0.0);
  if (n == 0) {
    if (static_cast<std::size_t>(i) <= j_cap) row[static_cast<std::size_t>(i)] = 1.0;
    return row;
  }
  const UniSeries pi = power_series(iterate_pgf(law, n, j_cap, cap), static_cast<int>(i), cap);
  const double log_q = std::log(params.q);
  const double log_tail = std::log(static_cast<double>(i)) + static_cast<double>(n) * std::log(params.beta);
  for (std::size_t j = 1; j <= j_cap; ++j) {
    const double p = pi[j];
    if (!(p > 0.0)) continue;
    row[j] = std::exp(std::log(static_cast<double>(j)) +
                      (static_cast<double>(j) - static_cast<double>(i)) * log_q + std::log(p) - log_tail);
  }
  return row;
}

/// Spine decomposition of one Q-process step: a distinguished individual
/// reproduces by the size-biased law, the other i-1 by the conjugate law.
class SpineSampler {
 public:
  SpineSampler(const SystemParams& params, const OffspringLaw& law)
      : spine_(detail::size_biased_weights(law, params)),
        conjugate_(conjugate_law(law, params.q).probs()) {
    detail::require_recurrent(params);
  }

  std::int64_t step(RandomStream& rng, std::int64_t i) const {
    auto next = static_cast<std::int64_t>(spine_.sample(rng));
    for (std::int64_t r = 1; r < i; ++r) next += static_cast<std::int64_t>(conjugate_.sample(rng));
    return next;
  }

 private:
  AliasTable spine_;
  AliasTable conjugate_;
};

inline std::int64_t spine_step(RandomStream& rng, const SystemParams& params, const OffspringLaw& law,
                               std::int64_t i) {
  return SpineSampler(params, law).step(rng, i);
}

struct Trajectory {
  std::vector<std::int64_t> states;  // W(0..n)
  std::int64_t total_progeny = 0;    // S_n = W(0) + ... + W(n-1)
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

inline Trajectory simulate_trajectory(RandomStream& rng, const SpineSampler& sampler,
                                      std::int64_t i0, int n) {
  if (i0 < 1) throw Error(ErrorKind::AssumptionViolated, "initial state must be >= 1");
  Trajectory t;
  t.seed = rng.seed();
  t.stream_id = rng.stream_id();
  t.states.reserve(static_cast<std::size_t>(n) + 1);
  t.states.push_back(i0);
  for (int k = 0; k < n; ++k) {
    t.total_progeny += t.states.back();
    t.states.push_back(sampler.step(rng, t.states.back()));
  }
  return t;
}

inline Trajectory simulate_trajectory(RandomStream& rng, const SystemParams& params,
                                      const OffspringLaw& law, std::int64_t i0, int n) {
  return simulate_trajectory(rng, SpineSampler(params, law), i0, n);
}

namespace detail {

inline std::int64_t simulate_progeny(RandomStream& rng, const SpineSampler& sampler, std::int64_t i0,
                                     int n) {
  std::int64_t w = i0, s = 0;
  for (int k = 0; k < n; ++k) {
    s += w;
    w = sampler.step(rng, w);
  }
  return s;
}

}  // namespace detail

/// Independent draws of S_n; path p uses stream (seed, p).
struct SampleSet {
  std::vector<std::int64_t> values;
  std::uint64_t seed = 0;
  int n = 0;
  std::int64_t initial_state = 1;
};

inline SampleSet simulate_batch(std::uint64_t seed, const SpineSampler& sampler, std::int64_t i0, int n,
                                std::size_t paths, unsigned workers = worker_count()) {
  if (i0 < 1) throw Error(ErrorKind::AssumptionViolated, "initial state must be >= 1");
  SampleSet out;
  out.seed = seed;
  out.n = n;
  out.initial_state = i0;
  out.values.assign(paths, 0);
  parallel_for(paths, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      RandomStream rng(seed, p);
      out.values[p] = detail::simulate_progeny(rng, sampler, i0, n);
    }
  });
  return out;
}

inline SampleSet simulate_batch(std::uint64_t seed, const SystemParams& params, const OffspringLaw& law,
                                std::int64_t i0, int n, std::size_t paths,
                                unsigned workers = worker_count()) {
  return simulate_batch(seed, SpineSampler(params, law), i0, n, paths, workers);
}

/// P{W(n) = j, S_n = l | W(0) = 1} for j <= j_cap, l <= l_cap, plus the mass
/// that left the table.
class JointTable {
 public:
  JointTable(std::size_t j_cap, std::size_t l_cap)
      : j_cap_(j_cap), l_cap_(l_cap), p_((j_cap + 1) * (l_cap + 1), 0.0) {}

  std::size_t j_cap() const noexcept { return j_cap_; }
  std::size_t l_cap() const noexcept { return l_cap_; }
  double leakage() const noexcept { return leakage_; }

  double prob(std::size_t j, std::size_t l) const noexcept {
    return (j <= j_cap_ && l <= l_cap_) ? p_[j * (l_cap_ + 1) + l] : 0.0;
  }
  double& at(std::size_t j, std::size_t l) noexcept { return p_[j * (l_cap_ + 1) + l]; }
  void add_leakage(double v) noexcept { leakage_ += v; }

  double total() const { return detail::kahan_sum(p_); }

  std::vector<double> marginal_S() const {
    std::vector<double> out(l_cap_ + 1, 0.0);
    for (std::size_t j = 0; j <= j_cap_; ++j)
      for (std::size_t l = 0; l <= l_cap_; ++l) out[l] += prob(j, l);
    return out;
  }

 private:
  std::size_t j_cap_, l_cap_;
  std::vector<double> p_;
  double leakage_ = 0.0;
};

/// Forward DP over (state, progeny so far) using the one-step law Q_{ij}(1).
/// Mass leaving the caps goes to the leakage accumulator, never renormalised.
inline JointTable dp_joint_distribution(const SystemParams& params, const OffspringLaw& law, int n,
                                        std::size_t j_cap, std::size_t l_cap,
                                        double max_leakage = 0.01) {
  detail::require_recurrent(params);
  if (j_cap < 1) throw Error(ErrorKind::CapTooSmall, "j_cap must be >= 1");

  const UniSeries fq = detail::truncated(conjugate_law(law, params.q).probs(), j_cap);
  // rows[i] = [f_q]^(i-1) w, built lazily by one multiplication per state.
  std::vector<UniSeries> rows;
  std::vector<double> row_leak;
  rows.push_back(UniSeries(0));
  row_leak.push_back(0.0);
  auto row = [&](std::size_t i) -> const UniSeries& {
    while (rows.size() <= i) {
      rows.push_back(rows.size() == 1
                         ? detail::truncated(detail::size_biased_weights(law, params), j_cap)
                         : multiply(rows.back(), fq));
      // Rows of degree <= j_cap lose nothing; 1 - total there is rounding only.
      const std::size_t degree = law.degree() * (rows.size() - 1);
      row_leak.push_back(degree > j_cap ? std::max(0.0, rows.back().leakage()) : 0.0);
    }
    return rows[i];
  };

  JointTable cur(j_cap, l_cap);
  cur.at(1, 0) = 1.0;
  for (int step = 0; step < n; ++step) {
    JointTable next(j_cap, l_cap);
    next.add_leakage(cur.leakage());
    for (std::size_t i = 1; i <= j_cap; ++i) {
      for (std::size_t l = 0; l <= l_cap; ++l) {
        const double mass = cur.prob(i, l);
        if (mass == 0.0) continue;
        const std::size_t l_next = l + i;
        if (l_next > l_cap) {
          next.add_leakage(mass);
          continue;
        }
        const UniSeries& r = row(i);
        next.add_leakage(mass * row_leak[i]);
        const std::size_t top = r.extent();
        for (std::size_t j = 1; j <= top; ++j)
          if (r[j] != 0.0) next.at(j, l_next) += mass * r[j];
      }
    }
    cur = std::move(next);
  }
  if (cur.leakage() > max_leakage)
    throw Error(ErrorKind::CapTooSmall,
                "leaked mass " + format_double(cur.leakage()) + " exceeds " + format_double(max_leakage));
  return cur;
}

inline void write_csv(std::ostream& os, const Trajectory& t) {
  os << "step,W\n";
  for (std::size_t k = 0; k < t.states.size(); ++k) os << k << ',' << t.states[k] << '\n';
}

/// Rows "j,l,prob" for nonzero cells, then "#leakage=...".
inline void write_csv(std::ostream& os, const JointTable& t) {
  for (std::size_t j = 0; j <= t.j_cap(); ++j)
    for (std::size_t l = 0; l <= t.l_cap(); ++l)
      if (t.prob(j, l) != 0.0) os << j << ',' << l << ',' << format_double(t.prob(j, l)) << '\n';
  os << "#leakage=" << format_double(t.leakage()) << '\n';
}

}  // namespace qproc
