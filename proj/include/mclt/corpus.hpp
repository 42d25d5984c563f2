#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mclt/chain.hpp"
#include "mclt/mcre.hpp"

// The bundled chain corpus: small canonical chains with known closed forms,
// used by the test suite and by the `report` command.

namespace mclt::corpus {

// Independent chain: every kernel row at time n equals row_for(n).
inline Chain independent_chain(int horizon, const std::vector<std::string>& labels,
                               const std::vector<double>& initial,
                               const std::function<std::vector<double>(int)>& row_for) {
  Chain c;
  c.horizon = horizon;
  c.states.assign(static_cast<std::size_t>(horizon) + 1, labels);
  c.initial = initial;
  const std::size_t s = labels.size();
  for (int n = 1; n <= horizon; ++n) {
    matrix k(s, s);
    const auto row = row_for(n);
    for (std::size_t x = 0; x < s; ++x)
      for (std::size_t y = 0; y < s; ++y) k(x, y) = row[y];
    c.kernels.push_back(std::move(k));
  }
  return c;
}

// f_n(x,y) = w_n * value(x).
inline Functional value_of_x(const Chain& c, const std::vector<double>& value,
                             const std::function<double(int)>& weight,
                             std::optional<double> lattice = std::nullopt) {
  std::vector<matrix> vals;
  for (int n = 1; n <= c.horizon; ++n) {
    matrix f(c.n_states(n), c.n_states(n + 1));
    for (std::size_t x = 0; x < f.rows(); ++x)
      for (std::size_t y = 0; y < f.cols(); ++y) f(x, y) = weight(n) * value[x];
    vals.push_back(std::move(f));
  }
  return Functional::from_values(std::move(vals), lattice);
}

inline Functional value_of_y(const Chain& c, const std::vector<double>& value,
                             std::optional<double> lattice = std::nullopt) {
  std::vector<matrix> vals;
  for (int n = 1; n <= c.horizon; ++n) {
    matrix f(c.n_states(n), c.n_states(n + 1));
    for (std::size_t x = 0; x < f.rows(); ++x)
      for (std::size_t y = 0; y < f.cols(); ++y) f(x, y) = value[y];
    vals.push_back(std::move(f));
  }
  return Functional::from_values(std::move(vals), lattice);
}

// ---------------------------------------------------------------------------
// +-1 walk: iid fair signs, f(x,y) = x.  S_N ~ centered binomial on 2Z shift.
// ---------------------------------------------------------------------------
inline Chain pm1_walk(int horizon) {
  return independent_chain(horizon, {"-1", "+1"}, {0.5, 0.5},
                           [](int) { return std::vector<double>{0.5, 0.5}; });
}
inline Functional pm1_functional(const Chain& c) {
  return value_of_x(c, {-1.0, 1.0}, [](int) { return 1.0; }, 2.0);
}

// ---------------------------------------------------------------------------
// Lazy walk: iid uniform on {-1, 0, +1}, f(x,y) = x.
// ---------------------------------------------------------------------------
inline Chain lazy_walk(int horizon) {
  const double third = 1.0 / 3.0;
  return independent_chain(horizon, {"-1", "0", "+1"}, {third, third, third},
                           [third](int) { return std::vector<double>{third, third, third}; });
}
inline Functional lazy_functional(const Chain& c) {
  return value_of_x(c, {-1.0, 0.0, 1.0}, [](int) { return 1.0; }, 1.0);
}

// Lazy walk plus an aperiodic bump on the (1,1) transition: non-lattice,
// irreducible.
inline Functional perturbed_lazy_functional(const Chain& c) {
  std::vector<matrix> vals;
  const double bump = 0.3 * std::sqrt(2.0);
  for (int n = 1; n <= c.horizon; ++n) {
    matrix f(3, 3);
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t y = 0; y < 3; ++y) f(x, y) = static_cast<double>(x) - 1.0;
    f(2, 2) += bump;
    vals.push_back(std::move(f));
  }
  return Functional::from_values(std::move(vals));
}

// ---------------------------------------------------------------------------
// Period-2 two-state chain ("a", "b"): kernels alternate between two fixed
// matrices.  The workhorse for non-iid derived oracles.
// ---------------------------------------------------------------------------
inline Chain period2_chain(int horizon) {
  Chain c;
  c.horizon = horizon;
  c.states.assign(static_cast<std::size_t>(horizon) + 1, {"a", "b"});
  c.initial = {0.5, 0.5};
  matrix odd(2, 2), even(2, 2);
  odd(0, 0) = 0.7; odd(0, 1) = 0.3; odd(1, 0) = 0.4; odd(1, 1) = 0.6;
  even(0, 0) = 0.2; even(0, 1) = 0.8; even(1, 0) = 0.5; even(1, 1) = 0.5;
  for (int n = 1; n <= horizon; ++n) c.kernels.push_back(n % 2 == 1 ? odd : even);
  return c;
}

// f(x,y) = 1[x = a], integer lattice.
inline Functional period2_indicator(const Chain& c) {
  return value_of_x(c, {1.0, 0.0}, [](int) { return 1.0; }, 1.0);
}

// f(x,y) = +-1 by state.
inline Functional period2_pm(const Chain& c) {
  return value_of_x(c, {1.0, -1.0}, [](int) { return 1.0; }, 2.0);
}

// Pure gradient plus constants on the period-2 chain: center-tight by
// construction, f_n = a_{n+1}(y) - a_n(x) + c_n.
inline Functional period2_gradient(const Chain& c) {
  auto pot = [](int n, std::size_t x) {
    return (n % 2 == 0 ? 0.4 : -0.25) * (x == 0 ? 1.0 : -0.5);
  };
  std::vector<matrix> vals;
  for (int n = 1; n <= c.horizon; ++n) {
    matrix f(2, 2);
    const double cn = 0.1 * ((n % 3) - 1);
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t y = 0; y < 2; ++y) f(x, y) = pot(n + 1, y) - pot(n, x) + cn;
    vals.push_back(std::move(f));
  }
  return Functional::from_values(std::move(vals));
}

// Geometric-decay functional 2^{-n} x on the +-1 walk: summable variance.
inline Functional geometric_decay_functional(const Chain& c) {
  return value_of_x(c, {-1.0, 1.0}, [](int n) { return std::pow(2.0, -n); });
}

// 1/sqrt(n) decay: variance sum diverges logarithmically (slope-test edge).
inline Functional sqrt_decay_functional(const Chain& c) {
  return value_of_x(c, {-1.0, 1.0}, [](int n) { return 1.0 / std::sqrt(static_cast<double>(n)); });
}

// ---------------------------------------------------------------------------
// Contaminated mixture: value states {0, 1/2, 1} with weights (1/6, 2/3, 1/6)
// (ess inf 0, ess sup 1, variance exactly 1/12), plus a contamination state of
// value 2 hit with probability p_n at step n.  With p_n -> 0 the large-
// deviation window in z/V_N units tends to (0, 12).
// ---------------------------------------------------------------------------
inline Chain contaminated_mixture_chain(int horizon,
                                        const std::function<double(int)>& p_contam) {
  return independent_chain(
      horizon, {"0", "1/2", "1", "2"}, {0.25, 0.25, 0.25, 0.25}, [&](int n) {
        const double p = p_contam(n);
        const double q = 1.0 - p;
        return std::vector<double>{q / 6.0, 2.0 * q / 3.0, q / 6.0, p};
      });
}
inline Functional contaminated_mixture_functional(const Chain& c) {
  return value_of_y(c, {0.0, 0.5, 1.0, 2.0}, 0.5);
}

// ---------------------------------------------------------------------------
// A two-step obstruction: identity kernels make Z_n(x,z) = 0 for x != z.
// ---------------------------------------------------------------------------
inline Chain forbidden_pair_chain(int horizon) {
  Chain c;
  c.horizon = horizon;
  c.states.assign(static_cast<std::size_t>(horizon) + 1, {"a", "b"});
  c.initial = {0.5, 0.5};
  matrix id(2, 2);
  id(0, 0) = id(1, 1) = 1.0;
  for (int n = 1; n <= horizon; ++n) c.kernels.push_back(id);
  return c;
}

// ---------------------------------------------------------------------------
// Homogeneous two-state chain for the stationary-case checks.
// ---------------------------------------------------------------------------
inline matrix homog_kernel() {
  matrix k(2, 2);
  k(0, 0) = 0.9; k(0, 1) = 0.1; k(1, 0) = 0.2; k(1, 1) = 0.8;
  return k;
}
inline std::vector<double> homog_stationary() { return {2.0 / 3.0, 1.0 / 3.0}; }

inline Chain homog_chain(int horizon) {
  Chain c;
  c.horizon = horizon;
  c.states.assign(static_cast<std::size_t>(horizon) + 1, {"a", "b"});
  c.initial = homog_stationary();
  for (int n = 1; n <= horizon; ++n) c.kernels.push_back(homog_kernel());
  return c;
}

// f(x,y) = 1[x=a] - mu(a), centered, homogeneous.
inline matrix homog_centered_indicator() {
  matrix f(2, 2);
  const double mu_a = homog_stationary()[0];
  f(0, 0) = f(0, 1) = 1.0 - mu_a;
  f(1, 0) = f(1, 1) = -mu_a;
  return f;
}

// ---------------------------------------------------------------------------
// MCRE families: two symmetric two-state kernels (common uniform stationary
// vector), driven by a noise process.
// ---------------------------------------------------------------------------
inline mcre::Family mcre_family_indicator() {
  matrix ka(2, 2), kb(2, 2), f(2, 2);
  ka(0, 0) = 0.8; ka(0, 1) = 0.2; ka(1, 0) = 0.2; ka(1, 1) = 0.8;
  kb(0, 0) = 0.3; kb(0, 1) = 0.7; kb(1, 0) = 0.7; kb(1, 1) = 0.3;
  f(0, 0) = 0.0; f(0, 1) = 1.0; f(1, 0) = 0.0; f(1, 1) = 1.0;  // f = 1[y = b]
  mcre::Family fam;
  fam.members = {{ka, f}, {kb, f}};
  fam.mu = {0.5, 0.5};
  fam.lattice = 1.0;
  return fam;
}

// f = +-1 by the first coordinate: algebraic range 2Z, the canonical
// "classifier flags a coarser lattice" witness.
inline mcre::Family mcre_family_pm() {
  auto fam = mcre_family_indicator();
  for (auto& e : fam.members) {
    e.f(0, 0) = e.f(0, 1) = 1.0;
    e.f(1, 0) = e.f(1, 1) = -1.0;
  }
  fam.lattice = 2.0;
  return fam;
}

}  // namespace mclt::corpus
