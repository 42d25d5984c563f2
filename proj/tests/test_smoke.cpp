#include <gtest/gtest.h>

#include "mclt/corpus.hpp"
#include "mclt/exact_dist.hpp"
#include "mclt/homog.hpp"
#include "mclt/io.hpp"
#include "mclt/large_dev.hpp"
#include "mclt/mcre.hpp"
#include "mclt/nagaev.hpp"
#include "mclt/reduction.hpp"

TEST(Smoke, BuildsAndValidates) {
  auto chain = mclt::corpus::pm1_walk(8);
  auto m = mclt::validate_chain(chain);
  EXPECT_NEAR(m.at(9)[0], 0.5, 1e-12);
}
