#include <gtest/gtest.h>

#include "mclt/corpus.hpp"
#include "mclt/hexagons.hpp"
#include "oracles.hpp"

using namespace mclt;

TEST(HexagonMeasure, PmWalkHas64EqualWeightHexagons) {
  auto chain = corpus::pm1_walk(5);
  auto m = validate_chain(chain);
  const auto hexes = hexagon_measure(chain, m, 3);
  EXPECT_EQ(hexes.size(), 64u);
  double total = 0.0;
  for (const auto& wh : hexes) {
    EXPECT_NEAR(wh.weight, 1.0 / 64.0, 1e-14);
    total += wh.weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(HexagonMeasure, WeightsSumToOneOnRandomChains) {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    auto rc = oracle::random_chain(seed, 6, 3);
    auto m = validate_chain(rc.chain);
    for (int n = 3; n <= 6; ++n) {
      const auto hexes = hexagon_measure(rc.chain, m, n);
      double total = 0.0;
      for (const auto& wh : hexes) total += wh.weight;
      EXPECT_NEAR(total, 1.0, 1e-10);
    }
  }
}

TEST(HexagonMeasure, GuardThrows) {
  auto chain = corpus::pm1_walk(5);
  auto m = validate_chain(chain);
  EXPECT_THROW(hexagon_measure(chain, m, 3, 8), TooManyHexagons);
}

TEST(Balance, SymmetricHexagonIsZero) {
  auto chain = corpus::pm1_walk(5);
  auto f = corpus::pm1_functional(chain);
  Hexagon h{3, 0, 1, 1, 0, 0, 1};  // y-row equals x-row
  EXPECT_EQ(balance(f, h), 0.0);
}

TEST(Balance, GradientFunctionalBalancesToZeroEverywhere) {
  auto chain = corpus::period2_chain(8);
  auto m = validate_chain(chain);
  auto f = corpus::period2_gradient(chain);
  for (int n = 3; n <= 8; ++n)
    for (const auto& wh : hexagon_measure(chain, m, n))
      EXPECT_NEAR(balance(f, wh.hex), 0.0, 1e-12);
}

TEST(Balance, LazyWalkInteriorMismatch) {
  auto chain = corpus::lazy_walk(5);
  auto f = corpus::lazy_functional(chain);
  // top interior (+1, +1), bottom interior (-1, -1); shared endpoints
  Hexagon h{3, 2, 2, 0, 2, 0, 2};
  EXPECT_NEAR(balance(f, h), 4.0, 1e-15);
}

TEST(StructureConstants, IidIdentityPmWalk) {
  auto chain = corpus::pm1_walk(8);
  auto m = validate_chain(chain);
  auto f = corpus::pm1_functional(chain);
  const auto st = structure_constants(chain, m, f, {});
  for (double u : st.u) EXPECT_NEAR(u * u, 4.0, 1e-12);  // 2(Var+Var) = 4
}

TEST(StructureConstants, IidIdentityLazyWalk) {
  auto chain = corpus::lazy_walk(8);
  auto m = validate_chain(chain);
  auto f = corpus::lazy_functional(chain);
  const auto st = structure_constants(chain, m, f, {});
  for (double u : st.u) EXPECT_NEAR(u * u, 2.0 * (2.0 / 3.0 + 2.0 / 3.0), 1e-12);
}

TEST(StructureConstants, MatchEnumerationOracle) {
  for (std::uint64_t seed : {31u, 32u}) {
    auto rc = oracle::random_chain(seed, 6, 3);
    auto m = validate_chain(rc.chain);
    const std::vector<double> xis{0.35, 1.1, 2.9};
    const auto st = structure_constants(rc.chain, m, rc.f, xis);
    for (int n = 3; n <= 6; ++n) {
      double eg2 = 0.0;
      std::vector<cplx> ee(xis.size(), cplx(0, 0));
      for (const auto& wh : hexagon_measure(rc.chain, m, n)) {
        const double g = balance(rc.f, wh.hex);
        eg2 += wh.weight * g * g;
        for (std::size_t i = 0; i < xis.size(); ++i)
          ee[i] += wh.weight * std::polar(1.0, xis[i] * g);
      }
      EXPECT_NEAR(st.u_at(n), std::sqrt(eg2), 1e-11);
      for (std::size_t i = 0; i < xis.size(); ++i)
        EXPECT_NEAR(st.d_at(i, n), std::sqrt(std::max(2.0 - 2.0 * ee[i].real(), 0.0)), 1e-11);
    }
  }
}

TEST(StructureConstants, GradientGivesZeroUAndD) {
  auto chain = corpus::period2_chain(10);
  auto m = validate_chain(chain);
  auto f = corpus::period2_gradient(chain);
  const auto st = structure_constants(chain, m, f, {0.7, 1.9});
  for (double u : st.u) EXPECT_NEAR(u, 0.0, 1e-11);
  for (const auto& dv : st.d)
    for (double d : dv) EXPECT_NEAR(d, 0.0, 1e-11);
  EXPECT_NEAR(st.UN, 0.0, 1e-12);
}

TEST(StructureConstants, PmWalkEvenBalanceKillsPi) {
  auto chain = corpus::pm1_walk(8);
  auto m = validate_chain(chain);
  auto f = corpus::pm1_functional(chain);
  const auto st = structure_constants(chain, m, f, {kPi});
  for (double d : st.d[0]) EXPECT_NEAR(d, 0.0, 1e-12);
}

TEST(StructureConstants, LatticeConsistency) {
  auto chain = corpus::period2_chain(10);
  auto m = validate_chain(chain);
  auto f = corpus::period2_indicator(chain);  // lattice step 1
  const auto st = structure_constants(chain, m, f, {2.0 * kPi});
  EXPECT_LE(st.DN[0], 1e-9);
}

TEST(StructureConstants, SumLemmaProperties) {
  auto rc = oracle::random_chain(77, 7, 3);
  auto m = validate_chain(rc.chain);
  const std::vector<double> xis{0.4, 0.9, 1.3};
  const auto st = structure_constants(rc.chain, m, rc.f, xis);
  // d_n(xi) <= |xi| u_n
  for (std::size_t i = 0; i < xis.size(); ++i)
    for (int n = 3; n <= 7; ++n)
      EXPECT_LE(st.d_at(i, n), std::fabs(xis[i]) * st.u_at(n) + 1e-10);
  // d_n(xi + eta)^2 <= 8 (d_n(xi)^2 + d_n(eta)^2) on grid pairs
  const auto st_pair = structure_constants(rc.chain, m, rc.f, {0.4, 0.9, 1.3});
  for (int n = 3; n <= 7; ++n)
    EXPECT_LE(sqr(st_pair.d_at(2, n)),
              8.0 * (sqr(st_pair.d_at(0, n)) + sqr(st_pair.d_at(1, n))) + 1e-10);
}

TEST(StructureConstants, SumOfFunctionalsBound) {
  auto rc1 = oracle::random_chain(41, 7, 3);
  auto rc2 = oracle::random_chain(42, 7, 3);  // same layout, different values
  auto m = validate_chain(rc1.chain);
  std::vector<matrix> sum_vals;
  for (int n = 1; n <= 7; ++n) {
    matrix s = rc1.f.value(n);
    for (std::size_t i = 0; i < s.data().size(); ++i) s.data()[i] += rc2.f.value(n).data()[i];
    sum_vals.push_back(std::move(s));
  }
  auto fsum = Functional::from_values(std::move(sum_vals));
  const auto sa = structure_constants(rc1.chain, m, rc1.f, {});
  const auto sb = structure_constants(rc1.chain, m, rc2.f, {});
  const auto sc = structure_constants(rc1.chain, m, fsum, {});
  for (int n = 3; n <= 7; ++n)
    EXPECT_LE(sqr(sc.u_at(n)), 2.0 * (sqr(sa.u_at(n)) + sqr(sb.u_at(n))) + 1e-10);
}

TEST(XiGrid, CoversLatticeFrequencies) {
  auto chain = corpus::pm1_walk(6);
  auto f = corpus::pm1_functional(chain);
  const auto grid = default_xi_grid(f);
  // lattice step 2 => candidate frequency pi must be a grid point
  bool has_pi = false;
  for (double x : grid) has_pi |= std::fabs(x - kPi) < 1e-12;
  EXPECT_TRUE(has_pi);
}
