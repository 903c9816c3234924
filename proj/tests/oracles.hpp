#pragma once

// Brute-force reference computations used by the tests. Nothing here calls
// into the library's numerics; only plain vectors and loops.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec convolve(const Vec& a, const Vec& b, std::size_t cap) {
  Vec out(std::min(cap + 1, a.size() + b.size() - 1), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size() && i + j < out.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

// k-fold convolution power of p, truncated at cap; power 0 is the point mass at 0.
inline Vec conv_power(const Vec& p, std::size_t k, std::size_t cap) {
  Vec out{1.0};
  for (std::size_t r = 0; r < k; ++r) out = convolve(out, p, cap);
  out.resize(cap + 1, 0.0);
  return out;
}

inline double pgf(const Vec& p, double s) {
  double acc = 0.0, pw = 1.0;
  for (double c : p) {
    acc += c * pw;
    pw *= s;
  }
  return acc;
}

inline double pgf_d(const Vec& p, double s, int order) {
  double acc = 0.0;
  for (std::size_t k = static_cast<std::size_t>(order); k < p.size(); ++k) {
    double fall = 1.0;
    for (int r = 0; r < order; ++r) fall *= static_cast<double>(k - static_cast<std::size_t>(r));
    acc += p[k] * fall * std::pow(s, static_cast<double>(k) - order);
  }
  return acc;
}

// Smallest root of f(s) = s by plain bisection on [0, 1).
inline double extinction(const Vec& p) {
  double m = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) m += static_cast<double>(k) * p[k];
  if (m <= 1.0) return 1.0;
  double lo = 0.0, hi = 1.0 - 1e-9;
  while (pgf(p, hi) - hi >= 0.0) hi = 1.0 - (1.0 - hi) * 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (pgf(p, mid) - mid > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// P{Z_n = j | Z_0 = i} for j <= cap, by forward propagation over states.
inline Vec gw_distribution(const Vec& p, std::size_t i, int n, std::size_t cap) {
  Vec dist(cap + 1, 0.0);
  dist[i] = 1.0;
  for (int step = 0; step < n; ++step) {
    Vec next(cap + 1, 0.0);
    for (std::size_t k = 0; k <= cap; ++k) {
      if (dist[k] == 0.0) continue;
      const Vec pk = conv_power(p, k, cap);
      for (std::size_t j = 0; j <= cap; ++j) next[j] += dist[k] * pk[j];
    }
    dist = next;
  }
  return dist;
}

// Q_{ij}(n) = j q^(j-i) P_ij(n) / (i beta^n).
inline double q_matrix_entry(const Vec& p, double q, double beta, std::size_t i, std::size_t j, int n,
                             std::size_t cap) {
  const Vec d = gw_distribution(p, i, n, cap);
  return static_cast<double>(j) * std::pow(q, static_cast<double>(j) - static_cast<double>(i)) * d[j] /
         (static_cast<double>(i) * std::pow(beta, n));
}

// Joint law of (W(n), S_n) from W(0) = 1 using the one-step matrix
// Q_ij = j q^(j-i) P_ij(1) / (i beta). Entry [j][l].
inline std::vector<Vec> joint_law(const Vec& p, double q, double beta, int n, std::size_t j_cap,
                                  std::size_t l_cap) {
  std::vector<Vec> qm(j_cap + 1, Vec(j_cap + 1, 0.0));
  for (std::size_t i = 1; i <= j_cap; ++i) {
    const Vec pi = conv_power(p, i, j_cap);
    for (std::size_t j = 1; j <= j_cap; ++j)
      qm[i][j] = static_cast<double>(j) * std::pow(q, static_cast<double>(j) - static_cast<double>(i)) * pi[j] /
                 (static_cast<double>(i) * beta);
  }
  std::vector<Vec> cur(j_cap + 1, Vec(l_cap + 1, 0.0));
  cur[1][0] = 1.0;
  for (int step = 0; step < n; ++step) {
    std::vector<Vec> next(j_cap + 1, Vec(l_cap + 1, 0.0));
    for (std::size_t i = 1; i <= j_cap; ++i)
      for (std::size_t l = 0; l + i <= l_cap; ++l) {
        if (cur[i][l] == 0.0) continue;
        for (std::size_t j = 1; j <= j_cap; ++j) next[j][l + i] += cur[i][l] * qm[i][j];
      }
    cur = next;
  }
  return cur;
}

// Random law on {0..degree} with p0 > 0 and p0 + p1 < 1; mean m != 1.
inline Vec random_law(std::mt19937_64& rng, std::size_t degree) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (;;) {
    Vec p(degree + 1);
    double total = 0.0;
    for (double& v : p) total += (v = u(rng));
    for (double& v : p) v /= total;
    double m = 0.0;
    for (std::size_t k = 1; k < p.size(); ++k) m += static_cast<double>(k) * p[k];
    if (std::abs(m - 1.0) > 0.05) return p;
  }
}

}  // namespace oracle
