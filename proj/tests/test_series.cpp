#include <catch_amalgamated.hpp>

#include <qproc/progeny_moments.hpp>
#include <qproc/series.hpp>

#include "oracles.hpp"

#include <random>
#include <sstream>

using namespace qproc;
using Catch::Approx;

namespace {

UniSeries from_vec(const std::vector<double>& v, std::size_t trunc) {
  UniSeries s(trunc);
  for (std::size_t k = 0; k < v.size() && k <= trunc; ++k) s.at(k) = v[k];
  return s;
}

}  // namespace

TEST_CASE("multiply matches naive convolution", "[series]") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(9), b(13);
    for (double& v : a) v = u(rng);
    for (double& v : b) v = u(rng);
    const auto expected = oracle::convolve(a, b, 15);
    const auto got = multiply(from_vec(a, 15), from_vec(b, 15));
    for (std::size_t k = 0; k <= 15; ++k) CHECK(got[k] == Approx(k < expected.size() ? expected[k] : 0.0));
  }
}

TEST_CASE("iterate_pgf matches the branching distribution", "[series]") {
  const std::vector<double> p{0.25, 0.0, 0.75};
  const OffspringLaw law(p);
  for (int n = 0; n <= 4; ++n) {
    const auto f = iterate_pgf(law, n, 40);
    const auto d = oracle::gw_distribution(p, 1, n, 40);
    for (std::size_t j = 0; j <= 40; ++j) CHECK(f[j] == Approx(d[j]).margin(1e-14));
  }
  // Z_n from 3 ancestors: coefficients of f_n^3.
  const auto f3 = power_series(iterate_pgf(law, 3, 40), 3);
  const auto d3 = oracle::gw_distribution(p, 3, 3, 40);
  for (std::size_t j = 0; j <= 40; ++j) CHECK(f3[j] == Approx(d3[j]).margin(1e-14));
}

TEST_CASE("semigroup: f_(m+n) = f_m o f_n", "[series]") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const OffspringLaw law(oracle::random_law(rng, 3));
    const std::size_t N = 60;
    const auto f5 = iterate_pgf(law, 5, N);
    const auto f2 = iterate_pgf(law, 2, N);
    const auto f3 = iterate_pgf(law, 3, N);
    const auto composed = compose(f2.coeffs(), f3);
    for (std::size_t j = 0; j <= N; ++j) CHECK(composed[j] == Approx(f5[j]).margin(1e-13));
  }
}

TEST_CASE("power_series agrees with repeated multiplication", "[series]") {
  const auto base = from_vec({0.2, 0.3, 0.1, 0.4}, 30);
  UniSeries acc = base;
  for (int i = 2; i <= 7; ++i) {
    acc = multiply(acc, base);
    const auto fast = power_series(base, i);
    for (std::size_t j = 0; j <= 30; ++j) CHECK(fast[j] == Approx(acc[j]).margin(1e-15));
  }
  CHECK_THROWS_AS(power_series(base, 0), Error);
}

TEST_CASE("truncation caps and leakage", "[series]") {
  const OffspringLaw law({0.25, 0.0, 0.75});
  try {
    iterate_pgf(law, 2, 5000);
    FAIL("expected TruncationOverflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TruncationOverflow);
  }
  const auto f = iterate_pgf(law, 8, 16);
  CHECK(f.leakage() > 0.0);
  CHECK(f.leakage() < 1.0);
  CHECK(iterate_pgf(law, 8, 256).leakage() == Approx(0.0).margin(1e-14));
}

TEST_CASE("joint_gf matches the Q-matrix oracle", "[series]") {
  for (const auto& p : {std::vector<double>{0.25, 0.0, 0.75}, std::vector<double>{0.5, 0.25, 0.25},
                        std::vector<double>{0.2, 0.3, 0.1, 0.4}}) {
    const OffspringLaw law(p);
    const auto sp = derive_params(law);
    for (int n : {1, 2, 3, 4}) {
      const std::size_t J = 30, L = 40;
      const auto gf = joint_gf(law, sp, n, J, L);
      const auto ref = oracle::joint_law(p, sp.q, sp.beta, n, J + 20, L);
      for (std::size_t j = 0; j <= J; ++j)
        for (std::size_t l = 0; l <= L; ++l) CHECK(gf(j, l) == Approx(ref[j][l]).margin(1e-12));
    }
  }
}

TEST_CASE("joint_gf: mass, marginal and mean", "[series]") {
  const OffspringLaw law({0.5, 0.25, 0.25});
  const auto sp = derive_params(law);
  const int n = 12;
  const auto gf = joint_gf(law, sp, n, 256, 256);
  CHECK(gf.total() == Approx(1.0).margin(1e-9));
  CHECK(gf.eval(1.0, 1.0) == Approx(1.0).margin(1e-9));
  const auto marg = marginal_S(gf);
  double mean = 0.0, total = 0.0;
  for (std::size_t l = 0; l < marg.size(); ++l) {
    mean += static_cast<double>(l) * marg[l];
    total += marg[l];
  }
  CHECK(total == Approx(gf.total()).epsilon(1e-14));
  CHECK(mean == Approx(expected_Sn(sp, n)).epsilon(1e-8));
  // S_n >= n since W never vanishes.
  for (std::size_t l = 0; l < static_cast<std::size_t>(n); ++l) CHECK(marg[l] == 0.0);
}

TEST_CASE("series CSV rendering", "[series]") {
  std::ostringstream os;
  write_csv(os, from_vec({0.5, 0.0, 0.5}, 2));
  CHECK(os.str() == "0,0.5\n1,0.0\n2,0.5\n");
  BiSeries b = BiSeries::identity_s(2, 1);
  std::ostringstream ob;
  write_csv(ob, b);
  CHECK(ob.str() == "1,0,1.0\n");
}
