#pragma once

#include <optional>
#include <vector>

#include "mclt/chain.hpp"
#include "mclt/exact_dist.hpp"
#include "mclt/hexagons.hpp"

// Frequency-perturbed transfer operators and everything built from them:
// characteristic functions of S_N (plain and conditioned on a terminal
// event), operator-norm decay against the structure constants, Fourier
// inversion of lattice point masses, and the uniform-distribution-mod-t test.

namespace mclt {

// (L_{n,xi} v)(x) = E(e^{i xi f_n(X_n, X_{n+1})} v(X_{n+1}) | X_n = x).
// As a matrix acting on column vectors: M[x][y] = pi_n(x,y) e^{i xi f_n(x,y)}.
struct PerturbedOperator {
  int time = 0;
  double xi = 0.0;
  cmatrix mat;
};

inline PerturbedOperator perturbed_operator(const Chain& chain, const Functional& f, int n,
                                            double xi) {
  const matrix& k = chain.kernel(n);
  const matrix& fv = f.value(n);
  PerturbedOperator op;
  op.time = n;
  op.xi = xi;
  op.mat = cmatrix(k.rows(), k.cols());
  for (std::size_t x = 0; x < k.rows(); ++x)
    for (std::size_t y = 0; y < k.cols(); ++y)
      op.mat(x, y) = k(x, y) * std::polar(1.0, xi * fv(x, y));
  return op;
}

// L-infinity operator norm: max over rows of the absolute kernel mass.
inline double operator_norm(const cmatrix& m) {
  double worst = 0.0;
  for (std::size_t x = 0; x < m.rows(); ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < m.cols(); ++y) s += std::abs(m(x, y));
    worst = std::max(worst, s);
  }
  return worst;
}

// ----------------------------------------------------------------------------
// char_fn: Phi_N(x, xi) = E_x e^{i xi S_N} as the backward product
// L_{1,xi} ... L_{N,xi} applied to the constant 1.
// ----------------------------------------------------------------------------

inline std::vector<cplx> char_fn(const Chain& chain, const Functional& f, double xi) {
  check_functional_shape(chain, f);
  std::vector<cplx> v(chain.n_states(chain.horizon + 1), cplx(1.0, 0.0));
  for (int n = chain.horizon; n >= 1; --n)
    v = mat_vec(perturbed_operator(chain, f, n, xi).mat, v);
  return v;
}

inline cplx char_fn_avg(const Chain& chain, const MarginalSet& m, const Functional& f,
                        double xi) {
  const auto v = char_fn(chain, f, xi);
  cplx acc(0.0, 0.0);
  for (std::size_t x = 0; x < v.size(); ++x) acc += m.at(1)[x] * v[x];
  return acc;
}

// Phi_N(x, xi | A) = (L_{1,xi} ... L_{N,xi} 1_A)(x) / P_x(X_{N+1} in A).
inline cplx conditional_char_fn(const Chain& chain, const Functional& f, double xi,
                                std::size_t x, const std::vector<std::size_t>& event) {
  check_functional_shape(chain, f);
  std::vector<cplx> v(chain.n_states(chain.horizon + 1), cplx(0.0, 0.0));
  std::vector<cplx> ind = v;
  for (std::size_t y : event) ind[y] = cplx(1.0, 0.0);
  v = ind;
  for (int n = chain.horizon; n >= 1; --n)
    v = mat_vec(perturbed_operator(chain, f, n, xi).mat, v);

  const matrix reach = step_kernel(chain, 1, chain.horizon + 1);
  double denom = 0.0;
  for (std::size_t y : event) denom += reach(x, y);
  if (denom <= 0.0) throw NullConditioningEvent("P_x(X_{N+1} in A) = 0");
  return v[x] / denom;
}

// ----------------------------------------------------------------------------
// operator_decay_check: every five-fold product norm against
// exp(-eps~ d_n(xi)^2) with eps~ = eps0^2/4, and the global bound
// |Phi_N| <= C exp(-(eps~/5) D_N(xi)) with C fitted on the grid.
// ----------------------------------------------------------------------------

struct OperatorDecayReport {
  double max_window_ratio = 0.0;  // worst (5-fold norm) / exp(-eps~ d_n^2)
  int worst_position = 0;
  double worst_xi = 0.0;
  double fitted_C = 1.0;          // for the |Phi_N| bound, over the grid
  bool fitted_C_large = false;    // fitted C exceeded 10
};

inline OperatorDecayReport operator_decay_check(const Chain& chain, const MarginalSet& m,
                                                const Functional& f, const HexagonStats& stats,
                                                double eps0) {
  OperatorDecayReport rep;
  const double eps_tilde = 0.25 * eps0 * eps0;
  for (std::size_t i = 0; i < stats.xis.size(); ++i) {
    const double xi = stats.xis[i];
    std::vector<cmatrix> ops;
    ops.reserve(static_cast<std::size_t>(chain.horizon));
    for (int n = 1; n <= chain.horizon; ++n)
      ops.push_back(perturbed_operator(chain, f, n, xi).mat);
    for (int n = 5; n <= chain.horizon; ++n) {
      cmatrix prod = ops[static_cast<std::size_t>(n - 5)];
      for (int k = n - 3; k <= n; ++k) prod = prod * ops[static_cast<std::size_t>(k - 1)];
      const double norm = operator_norm(prod);
      const double bound = std::exp(-eps_tilde * sqr(stats.d_at(i, n)));
      const double ratio = norm / bound;
      if (ratio > rep.max_window_ratio) {
        rep.max_window_ratio = ratio;
        rep.worst_position = n;
        rep.worst_xi = xi;
      }
    }
    // Fit C on the averaged characteristic function.
    double phi_max = 0.0;
    for (const cplx& v : char_fn(chain, f, xi)) phi_max = std::max(phi_max, std::abs(v));
    const double decay = std::exp(-(eps_tilde / 5.0) * stats.DN[i]);
    if (decay > 0) rep.fitted_C = std::max(rep.fitted_C, phi_max / decay);
  }
  (void)m;
  rep.fitted_C_large = rep.fitted_C > 10.0;
  return rep;
}

// ----------------------------------------------------------------------------
// fourier_inversion_point_prob: for an integer-lattice functional with step t,
//   P_x(S_N = z) = (t / 2 pi) integral_{-pi/t}^{pi/t} Phi_N(x, xi) e^{-i xi z} dxi,
// by the rectangle rule with node doubling (exact for trigonometric
// polynomials once the node count clears the degree).
// ----------------------------------------------------------------------------

inline double fourier_inversion_point_prob(const Chain& chain, const Functional& f, double z,
                                           std::size_t x, std::size_t nodes = 4096,
                                           double tol = 1e-8) {
  check_functional_shape(chain, f);
  if (!f.lattice) throw OffLattice("functional has no declared lattice step");
  const double t = *f.lattice;
  double gamma = 0.0;
  for (int n = 1; n <= chain.horizon; ++n) gamma += f.coset(n);
  const double u = (z - gamma) / t;
  if (std::fabs(u - std::round(u)) > 1e-9)
    throw OffLattice("z = " + std::to_string(z) + " not on the support coset");

  auto estimate = [&](std::size_t m_nodes) {
    const double period = 2.0 * kPi / t;
    double acc = 0.0;
    for (std::size_t j = 0; j < m_nodes; ++j) {
      const double xi = -period / 2.0 +
                        period * (static_cast<double>(j) + 0.5) / static_cast<double>(m_nodes);
      const cplx phi = char_fn(chain, f, xi)[x];
      acc += (phi * std::polar(1.0, -xi * z)).real();
    }
    return acc * (t / (2.0 * kPi)) * (period / static_cast<double>(m_nodes));
  };

  double est = estimate(nodes);
  for (int round = 0; round < 4; ++round) {
    const double est2 = estimate(nodes * 2);
    if (std::fabs(est2 - est) < tol) return est2;
    est = est2;
    nodes *= 2;
  }
  return est;
}

// ----------------------------------------------------------------------------
// uniform_mod_t_test: exact P_x(S_N in (a,b) + tZ | X_{N+1} in A) against
// |a-b|/t.
// ----------------------------------------------------------------------------

struct UniformModReport {
  double probability = 0.0;
  double expected = 0.0;      // |a-b| / t
  double deviation = 0.0;
  double event_prob = 0.0;    // P_x(X_{N+1} in A)
};

inline UniformModReport uniform_mod_t_test(const Chain& chain, const MarginalSet& m,
                                           const Functional& f, double t, double a, double b,
                                           const std::vector<std::size_t>& event,
                                           std::size_t x) {
  if (!(b > a) || !(b - a <= t + 1e-12)) throw error("need 0 < b-a <= t");
  const Functional lattice_f = f.lattice ? f : round_functional(f);
  DistTable table = exact_sn_distribution(chain, m, lattice_f, x);

  {  // event probability before conditioning
    const auto& s = table.slices.back();
    UniformModReport rep;
    for (std::size_t y : event)
      for (std::size_t k = 0; k < s.probs.cols(); ++k) rep.event_prob += s.probs(y, k);
    table = condition_on_terminal(table, event);

    rep.expected = (b - a) / t;
    if (b - a >= t - 1e-12) {
      rep.probability = 1.0;  // the residue classes cover everything
    } else {
      const int n = table.horizon();
      const auto masses = table.masses(n);
      for (std::size_t k = 0; k < masses.size(); ++k) {
        double r = std::fmod(table.value(n, static_cast<std::int64_t>(k)) - a, t);
        if (r < 0) r += t;
        if (r > 0 && r < b - a) rep.probability += masses[k];
      }
    }
    rep.deviation = std::fabs(rep.probability - rep.expected);
    return rep;
  }
}

}  // namespace mclt
