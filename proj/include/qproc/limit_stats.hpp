#pragma once

// Monte-Carlo checks of the limit behaviour of S_n: normality of the exactly
// standardised sum, the decay of its Kolmogorov distance with n, and the law
// of large numbers for S_n / n.

#include <qproc/errors.hpp>
#include <qproc/offspring_law.hpp>
#include <qproc/parallel.hpp>
#include <qproc/progeny_moments.hpp>
#include <qproc/qprocess.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace qproc {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Mergeable mean/variance accumulator (Chan et al. pairwise update).
struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++count;
    const double d = v - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (v - mean);
  }

  void merge(const RunningMoments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }

  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const { return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

/// Moments over fixed blocks merged in index order, so the result is
/// independent of the worker count.
template <class T>
RunningMoments sample_moments(std::span<const T> values, double scale = 1.0) {
  constexpr std::size_t kBlock = 4096;
  RunningMoments total;
  for (std::size_t b = 0; b < values.size(); b += kBlock) {
    RunningMoments block;
    for (std::size_t i = b; i < std::min(values.size(), b + kBlock); ++i)
      block.add(static_cast<double>(values[i]) * scale);
    total.merge(block);
  }
  return total;
}

/// sup_x |F_hat(x) - Phi((x - mean) / sd)| via the order-statistics formula.
/// Ties are handled because F_hat's jump at a repeated value spans the
/// first and last of its order indices.
template <class T>
double ks_distance_normal(std::span<const T> samples, double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd))
    throw Error(ErrorKind::DegenerateSample, "standard deviation must be positive");
  if (samples.size() < 2) throw Error(ErrorKind::DegenerateSample, "need at least two samples");
  std::vector<double> z(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) z[i] = (static_cast<double>(samples[i]) - mean) / sd;
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double phi = normal_cdf(z[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - phi, phi - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

template <class T>
double ks_distance_normal(const std::vector<T>& samples, double mean, double sd) {
  return ks_distance_normal(std::span<const T>(samples), mean, sd);
}

/// Least-squares slope of log(y) against log(x), over entries with y > 0.
inline double log_log_slope(std::span<const double> x, std::span<const double> y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mm = static_cast<double>(m);
  return (mm * sxy - sx * sy) / (mm * sxx - sx * sx);
}

struct CltReport {
  int n = 0;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double mean_used = 0.0;   // exact E S_n
  double scale_used = 0.0;  // exact sqrt(Var S_n)
  double ks_distance = 0.0;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  double variance_ratio = 0.0;  // Var S_n / (2 C_rho n)
};

/// Standardises simulated S_n by its exact mean and standard deviation and
/// measures the Kolmogorov distance to N(0,1).
inline CltReport clt_check(const OffspringLaw& law, int n, std::size_t paths, std::uint64_t seed,
                           unsigned workers = worker_count()) {
  const SystemParams sp = derive_params(law);
  if (!(sp.c_rho > 0.0)) throw Error(ErrorKind::NonpositiveCRho, "C_rho must be positive");
  const MomentReport mom = moment_recursion(sp, n);
  if (!(mom.variance > 0.0)) throw Error(ErrorKind::DegenerateSample, "Var S_n = 0 (S_n is deterministic)");

  CltReport r;
  r.n = n;
  r.paths = paths;
  r.seed = seed;
  r.mean_used = expected_Sn(sp, n);
  r.scale_used = std::sqrt(mom.variance);
  r.variance_ratio = mom.variance / (2.0 * sp.c_rho * n);

  const SampleSet samples = simulate_batch(seed, sp, law, 1, n, paths, workers);
  const auto m = sample_moments(std::span<const std::int64_t>(samples.values));
  r.sample_mean = m.mean;
  r.sample_variance = m.variance();
  r.ks_distance = ks_distance_normal(samples.values, r.mean_used, r.scale_used);
  return r;
}

struct RateReport {
  std::vector<int> n_grid;
  std::vector<double> ks;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double slope = 0.0;           // least-squares slope of log KS vs log n
  double envelope_c = 0.0;      // max over the grid of KS n^(1/4)
  double bound_fraction = 0.0;  // share of the grid with KS <= C n^(-1/4)
};

/// Log-log decay of the standardised Kolmogorov distance along n_grid. Every
/// grid point uses the same seed.
inline RateReport rate_probe_clt(const OffspringLaw& law, const std::vector<int>& n_grid,
                                 std::size_t paths, std::uint64_t seed, unsigned workers = worker_count()) {
  RateReport r;
  r.n_grid = n_grid;
  r.paths = paths;
  r.seed = seed;
  std::vector<double> ns;
  for (int n : n_grid) {
    r.ks.push_back(clt_check(law, n, paths, seed, workers).ks_distance);
    ns.push_back(n);
  }
  r.slope = log_log_slope(ns, r.ks);
  for (std::size_t i = 0; i < ns.size(); ++i) r.envelope_c = std::max(r.envelope_c, r.ks[i] * std::pow(ns[i], 0.25));
  std::size_t within = 0;
  for (std::size_t i = 0; i < ns.size(); ++i)
    if (r.ks[i] <= r.envelope_c * std::pow(ns[i], -0.25) * (1.0 + 1e-12)) ++within;
  r.bound_fraction = ns.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(ns.size());
  return r;
}

struct LlnReport {
  std::vector<int> n_grid;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  double limit = 0.0;  // 1 + gamma_q
  double eps = 0.0;
  std::vector<double> means;            // sample mean of S_n / n
  std::vector<double> std_errors;       // standard error of that mean
  std::vector<double> bias;             // E S_n / n - (1 + gamma_q), exact
  std::vector<double> deviation_probs;  // P_hat{|S_n/n - limit| > eps}
  std::vector<double> degenerate_ks;    // sup_x |P_hat{S_n/n < x} - I_limit(x)|
  double fitted_rate = 0.0;             // log-log slope of deviation_probs
};

inline double default_lln_eps(const SystemParams& sp) { return 0.1 * (1.0 + sp.gamma_q); }

/// Sample means and deviation probabilities of S_n / n along n_grid
/// (same seed at every grid point). eps <= 0 selects 10% of the limit.
inline LlnReport lln_check(const OffspringLaw& law, const std::vector<int>& n_grid, std::size_t paths,
                           double eps, std::uint64_t seed, unsigned workers = worker_count()) {
  const SystemParams sp = derive_params(law);
  LlnReport r;
  r.n_grid = n_grid;
  r.paths = paths;
  r.seed = seed;
  r.limit = 1.0 + sp.gamma_q;
  r.eps = eps > 0.0 ? eps : default_lln_eps(sp);
  const SpineSampler sampler(sp, law);
  std::vector<double> ns;
  for (int n : n_grid) {
    const SampleSet set = simulate_batch(seed, sampler, 1, n, paths, workers);
    const double inv = 1.0 / static_cast<double>(n);
    const auto m = sample_moments(std::span<const std::int64_t>(set.values), inv);
    r.means.push_back(m.mean);
    r.std_errors.push_back(m.std_error());
    r.bias.push_back(expected_Sn(sp, n) * inv - r.limit);
    std::size_t dev = 0, below = 0, above = 0;
    for (std::int64_t v : set.values) {
      const double eta = static_cast<double>(v) * inv;
      if (std::abs(eta - r.limit) > r.eps) ++dev;
      if (eta < r.limit) ++below;
      if (eta > r.limit) ++above;
    }
    const double p = static_cast<double>(paths);
    r.deviation_probs.push_back(static_cast<double>(dev) / p);
    r.degenerate_ks.push_back(std::max(static_cast<double>(below), static_cast<double>(above)) / p);
    ns.push_back(n);
  }
  r.fitted_rate = log_log_slope(ns, r.deviation_probs);
  return r;
}

struct VarianceDiagnostic {
  std::vector<int> n_grid;
  std::vector<double> ratio;         // Var S_n / (2 C_rho n)
  std::vector<double> slope;         // Var S_n / n
  double limit_slope = 0.0;          // 2 C_rho - (1 + gamma_q)^2
  double limit_ratio = 0.0;          // limit_slope / (2 C_rho)
  double max_successive_change = 0;  // max relative change of ratio along the grid
};

/// Exact Var S_n / (2 C_rho n) along n_grid and its limit. The per-step
/// cumulant of S_n is log(u(e^theta)/beta), whose second coefficient is
/// 2 C_rho - (1 + gamma_q)^2.
inline VarianceDiagnostic variance_diagnostic(const SystemParams& sp, const std::vector<int>& n_grid) {
  VarianceDiagnostic d;
  d.n_grid = n_grid;
  for (int n : n_grid) {
    const double var = moment_recursion(sp, n).variance;
    d.slope.push_back(var / n);
    d.ratio.push_back(var / (2.0 * sp.c_rho * n));
  }
  for (std::size_t i = 1; i < d.ratio.size(); ++i)
    d.max_successive_change =
        std::max(d.max_successive_change, std::abs(d.ratio[i] - d.ratio[i - 1]) / std::abs(d.ratio[i - 1]));
  d.limit_slope = 2.0 * sp.c_rho - (1.0 + sp.gamma_q) * (1.0 + sp.gamma_q);
  d.limit_ratio = d.limit_slope / (2.0 * sp.c_rho);
  return d;
}

}  // namespace qproc
