#include <gtest/gtest.h>

#include "mclt/chain.hpp"
#include "mclt/corpus.hpp"
#include "mclt/exact_dist.hpp"
#include "oracles.hpp"

using namespace mclt;

TEST(Validate, IidWalkMarginalsAreUniform) {
  auto chain = corpus::pm1_walk(5);
  auto m = validate_chain(chain);
  for (int n = 1; n <= 6; ++n) {
    EXPECT_NEAR(m.at(n)[0], 0.5, 1e-13);
    EXPECT_NEAR(m.at(n)[1], 0.5, 1e-13);
  }
}

TEST(Validate, LazyWalkMarginals) {
  auto chain = corpus::lazy_walk(4);
  auto m = validate_chain(chain);
  for (int n = 1; n <= 5; ++n)
    for (int x = 0; x < 3; ++x) EXPECT_NEAR(m.at(n)[static_cast<std::size_t>(x)], 1.0 / 3.0, 1e-13);
}

TEST(Validate, Period2MarginalsMatchMatrixProductOracle) {
  auto chain = corpus::period2_chain(9);
  auto m = validate_chain(chain);
  // independent oracle: direct row-vector times matrix products
  std::vector<double> mu{0.5, 0.5};
  for (int n = 1; n <= 9; ++n) {
    const matrix& k = chain.kernel(n);
    std::vector<double> nxt(2, 0.0);
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t y = 0; y < 2; ++y) nxt[y] += mu[x] * k(x, y);
    mu = nxt;
    EXPECT_NEAR(m.at(n + 1)[0], mu[0], 1e-14);
    EXPECT_NEAR(m.at(n + 1)[1], mu[1], 1e-14);
  }
}

TEST(Validate, MarginalFlowInvariantHolds) {
  for (std::uint64_t seed : {11u, 12u, 13u, 14u}) {
    auto rc = oracle::random_chain(seed, 12, 3);
    auto m = validate_chain(rc.chain);
    for (int n = 1; n <= rc.chain.horizon; ++n) {
      const auto next = vec_mat(m.at(n), rc.chain.kernel(n));
      double l1 = 0.0;
      for (std::size_t i = 0; i < next.size(); ++i) l1 += std::fabs(next[i] - m.at(n + 1)[i]);
      EXPECT_LE(l1, 1e-12);
    }
  }
}

TEST(Validate, RejectsNonStochasticRow) {
  auto chain = corpus::pm1_walk(3);
  chain.kernels[1](0, 0) = 0.9;  // row sums to 1.4
  EXPECT_THROW(validate_chain(chain), NonStochasticRow);
}

TEST(Validate, RejectsEmptyStateSet) {
  auto chain = corpus::pm1_walk(3);
  chain.states[2].clear();
  EXPECT_THROW(validate_chain(chain), EmptyStateSet);
}

TEST(Validate, RenormalizesTinyDrift) {
  auto chain = corpus::pm1_walk(3);
  chain.kernels[0](0, 0) = 0.5 + 2e-10;
  auto m = validate_chain(chain);
  double s = 0.0;
  for (std::size_t y = 0; y < 2; ++y) s += chain.kernels[0](0, y);
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_NEAR(m.at(2)[0] + m.at(2)[1], 1.0, 1e-13);
}

// ---------------------------------------------------------------------------
// Ellipticity
// ---------------------------------------------------------------------------

TEST(Ellipticity, IidUniformTwoState) {
  auto chain = corpus::pm1_walk(6);
  auto m = validate_chain(chain);
  auto rep = ellipticity_constant(chain, m);
  EXPECT_NEAR(rep.density_sup, 1.0, 1e-12);
  EXPECT_NEAR(rep.twostep_inf, 1.0, 1e-12);
  ASSERT_TRUE(rep.epsilon0.has_value());
  EXPECT_NEAR(*rep.epsilon0, 1.0, 1e-9);
}

TEST(Ellipticity, DoeblinLowerBound) {
  // entries in {0} union [eps0', 1] with |S| <= M implies eps0 >= (eps0'/M)^2
  auto chain = corpus::period2_chain(8);
  auto m = validate_chain(chain);
  auto rep = ellipticity_constant(chain, m);
  double eps_prime = 1.0;
  for (const auto& k : chain.kernels)
    for (double v : k.data())
      if (v > 0) eps_prime = std::min(eps_prime, v);
  const double M = 2.0;
  ASSERT_TRUE(rep.epsilon0.has_value());
  EXPECT_GE(*rep.epsilon0, sqr(eps_prime / M));
}

TEST(Ellipticity, ForbiddenPairThrows) {
  auto chain = corpus::forbidden_pair_chain(4);
  auto m = validate_chain(chain);
  EXPECT_THROW(ellipticity_constant(chain, m), NotTwoStepElliptic);
}

// ---------------------------------------------------------------------------
// Contraction coefficients
// ---------------------------------------------------------------------------

TEST(Contraction, IdenticalRowsGiveZero) {
  auto chain = corpus::lazy_walk(4);
  EXPECT_NEAR(contraction_coefficient(chain, 2, 1), 0.0, 1e-15);
}

TEST(Contraction, PermutationKernelGivesOne) {
  auto chain = corpus::forbidden_pair_chain(3);  // identity kernel rows
  EXPECT_NEAR(contraction_coefficient(chain, 1, 1), 1.0, 1e-15);
}

TEST(Contraction, TwoStepBoundAndSubmultiplicativity) {
  auto chain = corpus::period2_chain(8);
  auto m = validate_chain(chain);
  auto rep = ellipticity_constant(chain, m);
  for (int n = 1; n + 2 <= chain.horizon + 1; ++n) {
    const double d2 = contraction_coefficient(chain, n, 2);
    EXPECT_LE(d2, 1.0 - *rep.epsilon0 + 1e-12);
    const double d1a = contraction_coefficient(chain, n, 1);
    const double d1b = contraction_coefficient(chain, n + 1, 1);
    EXPECT_LE(d2, d1a * d1b + 1e-10);
  }
}

TEST(Contraction, LazyTwoStepByRowPairEnumeration) {
  auto chain = corpus::lazy_walk(6);
  const matrix two = chain.kernel(2) * chain.kernel(3);
  double expect = 0.0;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) expect = std::max(expect, row_tv_distance(two, a, b));
  EXPECT_NEAR(contraction_coefficient(chain, 2, 2), expect, 1e-15);
}

// ---------------------------------------------------------------------------
// Bridge distributions
// ---------------------------------------------------------------------------

TEST(Bridge, IidBridgeEqualsMarginal) {
  auto chain = corpus::lazy_walk(5);
  auto m = validate_chain(chain);
  const auto b = bridge_distribution(chain, m, 2, 0, 2);
  for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(b[y], m.at(3)[y], 1e-13);
}

TEST(Bridge, Period2MatchesPathEnumeration) {
  auto chain = corpus::period2_chain(4);
  auto m = validate_chain(chain);
  // oracle: conditional law of X_{n+1} given X_n = x, X_{n+2} = z from the
  // two-step path weights mu_n(x) pi_n(x,y) pi_{n+1}(y,z)
  const int n = 2;
  for (std::size_t x = 0; x < 2; ++x)
    for (std::size_t z = 0; z < 2; ++z) {
      std::vector<double> w(2, 0.0);
      double tot = 0.0;
      for (std::size_t y = 0; y < 2; ++y) {
        w[y] = chain.kernel(n)(x, y) * chain.kernel(n + 1)(y, z);
        tot += w[y];
      }
      const auto b = bridge_distribution(chain, m, n, x, z);
      double sum = 0.0;
      for (std::size_t y = 0; y < 2; ++y) {
        EXPECT_NEAR(b[y], w[y] / tot, 1e-12);
        sum += b[y];
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Bridge, ZeroMassThrows) {
  auto chain = corpus::forbidden_pair_chain(4);
  auto m = validate_chain(chain);
  EXPECT_THROW(bridge_distribution(chain, m, 1, 0, 1), ZeroBridgeMass);
}

// ---------------------------------------------------------------------------
// Covariance mixing
// ---------------------------------------------------------------------------

TEST(Mixing, IndependentChainHasZeroCrossCovariance) {
  auto chain = corpus::pm1_walk(10);
  auto m = validate_chain(chain);
  auto f = corpus::pm1_functional(chain);
  for (int a = 1; a <= 9; ++a)
    EXPECT_NEAR(exact_pair_covariance(chain, m, f, a, a + 1), 0.0, 1e-14);
}

TEST(Mixing, Period2RatiosWithinBound) {
  auto chain = corpus::period2_chain(24);
  auto m = validate_chain(chain);
  auto f = corpus::period2_pm(chain);
  auto ell = ellipticity_constant(chain, m);
  auto rep = covariance_mixing_check(chain, m, f, ell);
  EXPECT_LE(rep.max_ratio, 1.0 + 1e-9);
}

TEST(Mixing, GradientCovariancesTelescope) {
  auto chain = corpus::period2_chain(20);
  auto m = validate_chain(chain);
  auto f = corpus::period2_gradient(chain);
  // bounded total: sum of |Cov| stays small for a gradient (S_N is tight)
  auto ell = ellipticity_constant(chain, m);
  auto rep = covariance_mixing_check(chain, m, f, ell);
  EXPECT_LE(rep.sum_abs_cov, 10.0);
  EXPECT_LT(rep.max_ratio, kPosInf);
}

TEST(Mixing, CovarianceSumMatchesDistTableVariance) {
  // dual route: Var(S_N) from the DP table equals sum of all pair covariances
  auto chain = corpus::period2_chain(12);
  auto m = validate_chain(chain);
  auto f = corpus::period2_indicator(chain);
  double total = 0.0;
  for (int a = 1; a <= chain.horizon; ++a) {
    total += sqr(functional_sd(chain, m, f, a));
    for (int b = a + 1; b <= chain.horizon; ++b)
      total += 2.0 * exact_pair_covariance(chain, m, f, a, b);
  }
  const auto table = exact_sn_distribution(chain, m, f);
  EXPECT_NEAR(table.variance(chain.horizon), total, 1e-10);
}

TEST(Mixing, MarginalRatioPropertyDegenerate) {
  // with mu_n the exact marginals, P(X_n = x)/mu_n(x) = 1 on the support
  auto chain = corpus::period2_chain(6);
  auto m = validate_chain(chain);
  const matrix reach = step_kernel(chain, 1, 4);
  std::vector<double> law(2, 0.0);
  for (std::size_t x0 = 0; x0 < 2; ++x0)
    for (std::size_t y = 0; y < 2; ++y) law[y] += chain.initial[x0] * reach(x0, y);
  for (std::size_t y = 0; y < 2; ++y) EXPECT_NEAR(law[y] / m.at(4)[y], 1.0, 1e-12);
}
