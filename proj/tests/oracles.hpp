#pragma once

// Test-only oracles, independent of the library's computation paths:
// brute-force path enumeration, closed-form walk distributions, finite
// differences, quadrature, and a squaring-based Perron solver.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "mclt/chain.hpp"

namespace oracle {

using mclt::Chain;
using mclt::Functional;
using mclt::matrix;

// ----------------------------------------------------------------------------
// Full path enumeration: visit every positive-probability trajectory
// (x_1..x_{N+1}) with its probability and running sum.  Exponential in N; use
// only for N <= ~12.
// ----------------------------------------------------------------------------

inline void enumerate_paths(const Chain& chain, const Functional& f,
                            const std::function<void(const std::vector<std::size_t>&, double,
                                                     double)>& visit) {
  std::vector<std::size_t> path(static_cast<std::size_t>(chain.horizon) + 1);
  std::function<void(int, double, double)> rec = [&](int n, double prob, double sum) {
    if (n == chain.horizon + 1) {
      visit(path, prob, sum);
      return;
    }
    const matrix& k = chain.kernel(n);
    const std::size_t x = path[static_cast<std::size_t>(n - 1)];
    for (std::size_t y = 0; y < k.cols(); ++y) {
      if (k(x, y) == 0.0) continue;
      path[static_cast<std::size_t>(n)] = y;
      rec(n + 1, prob * k(x, y), sum + f.value(n)(x, y));
    }
  };
  for (std::size_t x0 = 0; x0 < chain.n_states(1); ++x0) {
    if (chain.initial[x0] == 0.0) continue;
    path[0] = x0;
    rec(1, chain.initial[x0], 0.0);
  }
}

// P(S_N = s) by path enumeration, keyed on rounded values.
inline std::map<long, double> sum_law_enumerated(const Chain& chain, const Functional& f,
                                                 double unit) {
  std::map<long, double> law;
  enumerate_paths(chain, f, [&](const std::vector<std::size_t>&, double p, double s) {
    law[std::lround(s / unit)] += p;
  });
  return law;
}

// ----------------------------------------------------------------------------
// Closed forms for the iid walks.
// ----------------------------------------------------------------------------

inline double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// P(S_N = s) for the +-1 fair walk.
inline double pm1_point(int n, long s) {
  if ((n + s) % 2 != 0 || std::labs(s) > n) return 0.0;
  const int k = static_cast<int>((n + s) / 2);
  return std::exp(log_binom(n, k) - n * std::log(2.0));
}

// P(S_N = s) for the lazy walk (steps -1, 0, 1 with probability 1/3).
inline double lazy_point(int n, long s) {
  // sum over number of +1 steps a and -1 steps b with a - b = s
  double acc = 0.0;
  for (int a = 0; a <= n; ++a) {
    const long b = a - s;
    if (b < 0 || a + b > n) continue;
    acc += std::exp(log_binom(n, a) + log_binom(n - a, static_cast<int>(b)) -
                    n * std::log(3.0));
  }
  return acc;
}

// ----------------------------------------------------------------------------
// Richardson central differences for d/dxi and d^2/dxi^2.
// ----------------------------------------------------------------------------

inline double fd1(const std::function<double(double)>& g, double x, double h = 1e-4) {
  auto d = [&](double hh) { return (g(x + hh) - g(x - hh)) / (2.0 * hh); };
  const double a = d(h), b = d(h / 10.0);
  return b + (b - a) / 99.0;  // Richardson with step ratio 10
}

inline double fd2(const std::function<double(double)>& g, double x, double h = 1e-4) {
  auto d = [&](double hh) { return (g(x + hh) - 2.0 * g(x) + g(x - hh)) / (hh * hh); };
  const double a = d(h), b = d(h / 4.0);
  return b + (b - a) / 15.0;
}

// ----------------------------------------------------------------------------
// Dominant (Perron) eigenpair of a strictly positive matrix by repeated
// squaring: A^(2^k) becomes rank one; read the eigenvector off a column and
// the eigenvalue from one Rayleigh step.
// ----------------------------------------------------------------------------

struct Perron {
  double value = 0.0;
  std::vector<double> vec;
};

inline Perron perron_by_squaring(matrix a, int squarings = 60) {
  const std::size_t n = a.rows();
  for (int it = 0; it < squarings; ++it) {
    a = a * a;
    double norm = 0.0;
    for (double v : a.data()) norm = std::max(norm, std::fabs(v));
    for (double& v : a.data()) v /= norm;
  }
  Perron p;
  p.vec.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) p.vec[i] = a(i, 0);
  double s = 0.0;
  for (double v : p.vec) s += v;
  for (double& v : p.vec) v /= s;
  return p;
}

// ----------------------------------------------------------------------------
// Random small chains for property-style tests.
// ----------------------------------------------------------------------------

struct RandomChain {
  Chain chain;
  Functional f;
};

inline RandomChain random_chain(std::uint64_t seed, int horizon, std::size_t n_states,
                                bool integer_valued = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::uniform_int_distribution<int> coin(-2, 2);
  Chain c;
  c.horizon = horizon;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n_states; ++i) labels.push_back("s" + std::to_string(i));
  c.states.assign(static_cast<std::size_t>(horizon) + 1, labels);
  c.initial.assign(n_states, 0.0);
  double tot = 0.0;
  for (auto& v : c.initial) tot += (v = unif(rng));
  for (auto& v : c.initial) v /= tot;
  std::vector<matrix> vals;
  for (int n = 1; n <= horizon; ++n) {
    matrix k(n_states, n_states), fv(n_states, n_states);
    for (std::size_t x = 0; x < n_states; ++x) {
      double row = 0.0;
      for (std::size_t y = 0; y < n_states; ++y) row += (k(x, y) = unif(rng));
      for (std::size_t y = 0; y < n_states; ++y) {
        k(x, y) /= row;
        fv(x, y) = integer_valued ? static_cast<double>(coin(rng)) : unif(rng) * 2.0 - 1.0;
      }
    }
    c.kernels.push_back(std::move(k));
    vals.push_back(std::move(fv));
  }
  RandomChain out;
  out.chain = std::move(c);
  out.f = Functional::from_values(std::move(vals),
                                  integer_valued ? std::optional<double>(1.0) : std::nullopt);
  return out;
}

}  // namespace oracle
