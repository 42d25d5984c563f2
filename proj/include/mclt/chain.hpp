#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mclt/common.hpp"

// Finite-state inhomogeneous Markov chains with a finite horizon N:
// state sets S_1..S_{N+1}, row-stochastic kernels pi_1..pi_N, initial law
// mu_1, and additive functionals f_n(x,y).  Marginals, uniform ellipticity,
// Dobrushin contraction coefficients and bridge distributions live here.

namespace mclt {

// ----------------------------------------------------------------------------
// Chain
// ----------------------------------------------------------------------------

struct Chain {
  int horizon = 0;                                  // N, number of summands
  std::vector<std::vector<std::string>> states;     // N+1 state sets (labels)
  std::vector<matrix> kernels;                      // N kernels, |S_n| x |S_{n+1}|
  std::vector<double> initial;                      // mu_1 on S_1

  std::size_t n_states(int n) const { return states[static_cast<std::size_t>(n - 1)].size(); }
  const matrix& kernel(int n) const { return kernels[static_cast<std::size_t>(n - 1)]; }

  // Kernels are 1-based in time: kernel(n) maps S_n -> S_{n+1}.
};

struct Functional {
  std::vector<matrix> values;        // f_n, same shapes as Chain::kernels
  double bound = 0.0;                // K = max |f_n|
  std::optional<double> lattice;     // step t with f_n in c_n + tZ

  const matrix& value(int n) const { return values[static_cast<std::size_t>(n - 1)]; }

  static Functional from_values(std::vector<matrix> vals,
                                std::optional<double> lattice_step = std::nullopt) {
    Functional f;
    f.values = std::move(vals);
    for (const auto& m : f.values)
      for (double v : m.data()) f.bound = std::max(f.bound, std::fabs(v));
    f.lattice = lattice_step;
    if (lattice_step) {
      const double t = *lattice_step;
      if (!(t > 0)) throw error("lattice step must be positive");
      for (std::size_t n = 0; n < f.values.size(); ++n) {
        const auto& m = f.values[n];
        double c0 = std::fmod(m.data()[0], t);
        for (double v : m.data()) {
          double r = std::remainder(v - c0, t);
          if (std::fabs(r) > kLatticeTol)
            throw error("declared lattice step violated at position " + std::to_string(n + 1));
        }
      }
    }
    return f;
  }

  // Residue representative of f_n modulo the lattice step, in [0, t).
  double coset(int n) const {
    const double t = lattice.value();
    double c = std::fmod(value(n).data()[0], t);
    if (c < 0) c += t;
    return c;
  }
};

struct MarginalSet {
  std::vector<std::vector<double>> mu;  // mu_1..mu_{N+1}

  const std::vector<double>& at(int n) const { return mu[static_cast<std::size_t>(n - 1)]; }
};

// ----------------------------------------------------------------------------
// validate_chain: shape checks, stochasticity, forward marginals.
// Rows with drift below kRowDriftMax are renormalized in place.
// ----------------------------------------------------------------------------

inline MarginalSet validate_chain(Chain& chain) {
  const int n_sets = chain.horizon + 1;
  if (chain.horizon < 1) throw BadChainSpec("horizon must be >= 1");
  if (static_cast<int>(chain.states.size()) != n_sets)
    throw BadChainSpec("expected " + std::to_string(n_sets) + " state sets");
  if (static_cast<int>(chain.kernels.size()) != chain.horizon)
    throw BadChainSpec("expected " + std::to_string(chain.horizon) + " kernels");
  for (int n = 1; n <= n_sets; ++n)
    if (chain.states[static_cast<std::size_t>(n - 1)].empty())
      throw EmptyStateSet("state set " + std::to_string(n));

  for (int n = 1; n <= chain.horizon; ++n) {
    auto& k = chain.kernels[static_cast<std::size_t>(n - 1)];
    if (k.rows() != chain.n_states(n) || k.cols() != chain.n_states(n + 1))
      throw BadChainSpec("kernel " + std::to_string(n) + " has wrong shape");
    for (std::size_t x = 0; x < k.rows(); ++x) {
      double s = 0.0;
      for (std::size_t y = 0; y < k.cols(); ++y) {
        if (k(x, y) < 0) throw NonStochasticRow("negative entry, kernel " + std::to_string(n));
        s += k(x, y);
      }
      const double drift = std::fabs(s - 1.0);
      if (drift > kRowDriftMax)
        throw NonStochasticRow("kernel " + std::to_string(n) + ", row " + std::to_string(x) +
                               " sums to " + std::to_string(s));
      if (drift > kRowSumTol)
        for (std::size_t y = 0; y < k.cols(); ++y) k(x, y) /= s;
    }
  }

  double s0 = std::accumulate(chain.initial.begin(), chain.initial.end(), 0.0);
  if (chain.initial.size() != chain.n_states(1) || std::fabs(s0 - 1.0) > kRowDriftMax)
    throw BadChainSpec("initial law malformed");
  for (double p : chain.initial)
    if (p < 0) throw BadChainSpec("initial law has a negative entry");

  MarginalSet m;
  m.mu.reserve(static_cast<std::size_t>(n_sets));
  m.mu.push_back(chain.initial);
  for (double& p : m.mu[0]) p /= s0;
  for (int n = 1; n <= chain.horizon; ++n) m.mu.push_back(vec_mat(m.mu.back(), chain.kernel(n)));
  return m;
}

inline void check_functional_shape(const Chain& chain, const Functional& f) {
  if (f.values.size() != chain.kernels.size())
    throw BadChainSpec("functional has wrong number of positions");
  for (int n = 1; n <= chain.horizon; ++n)
    if (f.value(n).rows() != chain.n_states(n) || f.value(n).cols() != chain.n_states(n + 1))
      throw BadChainSpec("functional position " + std::to_string(n) + " has wrong shape");
}

// ----------------------------------------------------------------------------
// Densities p_n(x,y) = pi_n(x,y) / mu_{n+1}(y), with 0/0 -> 0.
// ----------------------------------------------------------------------------

inline matrix density(const Chain& chain, const MarginalSet& m, int n) {
  const matrix& k = chain.kernel(n);
  const auto& mu = m.at(n + 1);
  matrix p(k.rows(), k.cols(), 0.0);
  for (std::size_t x = 0; x < k.rows(); ++x)
    for (std::size_t y = 0; y < k.cols(); ++y)
      if (k(x, y) > 0 && mu[y] > 0) p(x, y) = k(x, y) / mu[y];
  return p;
}

// Two-step normalizer Z_n(x,z) = sum_y p_n(x,y) p_{n+1}(y,z) mu_{n+1}(y);
// equals P(X_{n+2}=z | X_n=x) / mu_{n+2}(z).
inline matrix two_step_density(const Chain& chain, const MarginalSet& m, int n) {
  const matrix pn = density(chain, m, n);
  const matrix pn1 = density(chain, m, n + 1);
  const auto& mu = m.at(n + 1);
  matrix z(pn.rows(), pn1.cols(), 0.0);
  for (std::size_t x = 0; x < pn.rows(); ++x)
    for (std::size_t y = 0; y < pn.cols(); ++y) {
      const double w = pn(x, y) * mu[y];
      if (w == 0.0) continue;
      for (std::size_t zz = 0; zz < pn1.cols(); ++zz) z(x, zz) += w * pn1(y, zz);
    }
  return z;
}

// ----------------------------------------------------------------------------
// EllipticityReport
// ----------------------------------------------------------------------------

struct EllipticityReport {
  std::optional<double> epsilon0;  // largest valid ellipticity constant
  double density_sup = 0.0;        // max p_n(x,y)
  double twostep_inf = 0.0;        // min_n,x,z Z_n(x,z)
  double cmix = 0.0;               // empirical mixing constant
  double theta = 0.0;              // mixing rate (1-eps0)^(1/2)
};

namespace detail {

// Smallest C with |E(h | X_m = x)| <= C for all h on (X_n, X_{n+1}) with
// |h| <= 1 and E h = 0.  By LP duality this is min_l ||q - l w||_1 where q is
// the conditional two-step law given X_m = x and w the unconditional one.
inline double centered_conditional_sup(const std::vector<double>& q,
                                       const std::vector<double>& w) {
  // The minimum over l of sum |q_i - l w_i| is attained at a breakpoint
  // l = q_i / w_i.
  double best = kPosInf;
  std::vector<double> ratios{0.0};
  for (std::size_t i = 0; i < q.size(); ++i)
    if (w[i] > 0) ratios.push_back(q[i] / w[i]);
  for (double l : ratios) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += std::fabs(q[i] - l * w[i]);
    best = std::min(best, s);
  }
  return best;
}

}  // namespace detail

// Exact joint law of (X_n, X_{n+1}) as a matrix over S_n x S_{n+1}.
inline matrix pair_law(const Chain& chain, const MarginalSet& m, int n) {
  const matrix& k = chain.kernel(n);
  const auto& mu = m.at(n);
  matrix law(k.rows(), k.cols());
  for (std::size_t x = 0; x < k.rows(); ++x)
    for (std::size_t y = 0; y < k.cols(); ++y) law(x, y) = mu[x] * k(x, y);
  return law;
}

// Product kernel P(X_n = . | X_m = .) for m <= n, as an |S_m| x |S_n| matrix.
inline matrix step_kernel(const Chain& chain, int m, int n) {
  matrix prod(chain.n_states(m), chain.n_states(m));
  for (std::size_t i = 0; i < prod.rows(); ++i) prod(i, i) = 1.0;
  for (int j = m; j < n; ++j) prod = prod * chain.kernel(j);
  return prod;
}

// ellipticity_constant: the largest eps0 satisfying (b) and (c), plus the
// mixing pair (C_mix, theta).  theta = sqrt(1 - eps0); C_mix is the smallest
// constant making ||E(h_n|X_m)||_inf <= C_mix theta^(n-m) ||h_n||_inf hold for
// every measured (m, n) pair on this chain (empirical, not the proof's worst
// case).
inline EllipticityReport ellipticity_constant(const Chain& chain, const MarginalSet& m,
                                              bool want_cmix = true) {
  EllipticityReport rep;
  for (int n = 1; n <= chain.horizon; ++n) {
    const matrix p = density(chain, m, n);
    for (double v : p.data()) rep.density_sup = std::max(rep.density_sup, v);
  }
  rep.twostep_inf = kPosInf;
  for (int n = 1; n + 1 <= chain.horizon; ++n) {
    const matrix z = two_step_density(chain, m, n);
    for (double v : z.data()) rep.twostep_inf = std::min(rep.twostep_inf, v);
  }
  if (chain.horizon == 1) rep.twostep_inf = rep.density_sup > 0 ? 1.0 : 0.0;

  if (rep.twostep_inf <= 0.0) {
    rep.epsilon0.reset();
    throw NotTwoStepElliptic("a two-step transition density vanishes");
  }
  const double eps0 =
      std::min(rep.density_sup > 0 ? 1.0 / rep.density_sup : 1.0, rep.twostep_inf * (1.0 - 1e-12));
  rep.epsilon0 = eps0;
  rep.theta = std::sqrt(std::max(1.0 - eps0, 1e-16));

  if (want_cmix) {
    // Ratios stabilize once theta^(n-m) is tiny (the numerator decays at
    // least as fast, by submultiplicativity), so the gap scan is capped.
    const int max_gap = 64;
    double cmix = 0.0;
    for (int n = 1; n <= chain.horizon; ++n) {
      const matrix law = pair_law(chain, m, n);
      const std::vector<double>& w = law.data();
      for (int mm = std::max(1, n - max_gap); mm < n; ++mm) {
        const matrix reach = step_kernel(chain, mm, n);  // P(X_n | X_mm)
        const double scale = std::pow(rep.theta, n - mm);
        for (std::size_t x = 0; x < chain.n_states(mm); ++x) {
          if (m.at(mm)[x] == 0.0) continue;
          std::vector<double> q(w.size(), 0.0);
          const matrix& k = chain.kernel(n);
          for (std::size_t y = 0; y < k.rows(); ++y) {
            const double py = reach(x, y);
            if (py == 0.0) continue;
            for (std::size_t z = 0; z < k.cols(); ++z) q[y * k.cols() + z] = py * k(y, z);
          }
          cmix = std::max(cmix, detail::centered_conditional_sup(q, w) / scale);
        }
      }
    }
    rep.cmix = cmix;
  }
  return rep;
}

// ----------------------------------------------------------------------------
// contraction_coefficient: exact Dobrushin delta(pi) for the one- or two-step
// kernel starting at time n, as the max total-variation distance between rows.
// ----------------------------------------------------------------------------

inline double row_tv_distance(const matrix& k, std::size_t x1, std::size_t x2) {
  double s = 0.0;
  for (std::size_t y = 0; y < k.cols(); ++y) s += std::fabs(k(x1, y) - k(x2, y));
  return 0.5 * s;
}

inline double contraction_coefficient(const Chain& chain, int n, int span = 1) {
  if (span != 1 && span != 2) throw error("span must be 1 or 2");
  if (n < 1 || n + span > chain.horizon + 1) throw error("time out of range");
  matrix k = chain.kernel(n);
  if (span == 2) k = k * chain.kernel(n + 1);
  double d = 0.0;
  for (std::size_t x1 = 0; x1 < k.rows(); ++x1)
    for (std::size_t x2 = x1 + 1; x2 < k.rows(); ++x2)
      d = std::max(d, row_tv_distance(k, x1, x2));
  return d;
}

// ----------------------------------------------------------------------------
// bridge_distribution: law of X_{n+1} given X_n = x, X_{n+2} = z,
//   y -> p_n(x,y) p_{n+1}(y,z) mu_{n+1}(y) / Z_n(x,z).
// ----------------------------------------------------------------------------

inline std::vector<double> bridge_distribution(const Chain& chain, const MarginalSet& m, int n,
                                               std::size_t x, std::size_t z) {
  const matrix pn = density(chain, m, n);
  const matrix pn1 = density(chain, m, n + 1);
  const auto& mu = m.at(n + 1);
  std::vector<double> b(mu.size(), 0.0);
  double mass = 0.0;
  for (std::size_t y = 0; y < mu.size(); ++y) {
    b[y] = pn(x, y) * pn1(y, z) * mu[y];
    mass += b[y];
  }
  if (mass <= 0.0)
    throw ZeroBridgeMass("n=" + std::to_string(n) + " x=" + std::to_string(x) +
                         " z=" + std::to_string(z));
  for (double& v : b) v /= mass;
  return b;
}

// All bridges over (x, z) at time n, as a table indexed [x][z] -> vector over y.
inline std::vector<std::vector<std::vector<double>>> bridge_table(const Chain& chain,
                                                                  const MarginalSet& m, int n) {
  const std::size_t nx = chain.n_states(n), nz = chain.n_states(n + 2);
  std::vector<std::vector<std::vector<double>>> t(nx);
  for (std::size_t x = 0; x < nx; ++x) {
    t[x].resize(nz);
    for (std::size_t z = 0; z < nz; ++z) t[x][z] = bridge_distribution(chain, m, n, x, z);
  }
  return t;
}

// First M summands of a chain/functional pair.
inline Chain prefix_chain(const Chain& chain, int m) {
  Chain out;
  out.horizon = m;
  out.states.assign(chain.states.begin(), chain.states.begin() + m + 1);
  out.kernels.assign(chain.kernels.begin(), chain.kernels.begin() + m);
  out.initial = chain.initial;
  return out;
}

inline Functional prefix_functional(const Functional& f, int m) {
  Functional out;
  out.values.assign(f.values.begin(), f.values.begin() + m);
  out.lattice = f.lattice;
  for (const auto& mtx : out.values)
    for (double v : mtx.data()) out.bound = std::max(out.bound, std::fabs(v));
  return out;
}

// ----------------------------------------------------------------------------
// covariance_mixing_check: exact Cov(f_m, f_n) for all m < n against the bound
// C_mix theta^(n-m) sigma(f_m) sigma(f_n).
// ----------------------------------------------------------------------------

struct MixingReport {
  double max_ratio = 0.0;        // worst |Cov| / bound over all pairs
  double max_abs_cov = 0.0;
  double sum_abs_cov = 0.0;      // sum over m<n of |Cov|
  int worst_m = 0, worst_n = 0;
};

inline double functional_mean(const Chain& chain, const MarginalSet& m, const Functional& f,
                              int n) {
  const matrix law = pair_law(chain, m, n);
  double s = 0.0;
  for (std::size_t i = 0; i < law.data().size(); ++i) s += law.data()[i] * f.value(n).data()[i];
  return s;
}

inline double functional_sd(const Chain& chain, const MarginalSet& m, const Functional& f, int n) {
  const matrix law = pair_law(chain, m, n);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < law.data().size(); ++i) {
    s1 += law.data()[i] * f.value(n).data()[i];
    s2 += law.data()[i] * sqr(f.value(n).data()[i]);
  }
  return std::sqrt(std::max(s2 - s1 * s1, 0.0));
}

// Exact Cov(f_m(X_m,X_{m+1}), f_n(X_n,X_{n+1})) via the four-point joint law.
inline double exact_pair_covariance(const Chain& chain, const MarginalSet& m, const Functional& f,
                                    int tm, int tn) {
  const double mean_m = functional_mean(chain, m, f, tm);
  const double mean_n = functional_mean(chain, m, f, tn);
  const matrix& km = chain.kernel(tm);
  const matrix& kn = chain.kernel(tn);
  const matrix mid = step_kernel(chain, tm + 1, tn);  // P(X_n | X_{m+1})
  const auto& mu = m.at(tm);
  double acc = 0.0;
  for (std::size_t x = 0; x < km.rows(); ++x) {
    if (mu[x] == 0.0) continue;
    for (std::size_t y = 0; y < km.cols(); ++y) {
      const double w_xy = mu[x] * km(x, y);
      if (w_xy == 0.0) continue;
      const double fm = f.value(tm)(x, y) - mean_m;
      double inner = 0.0;
      for (std::size_t z = 0; z < kn.rows(); ++z) {
        const double w_z = mid(y, z);
        if (w_z == 0.0) continue;
        double row = 0.0;
        for (std::size_t w = 0; w < kn.cols(); ++w)
          row += kn(z, w) * (f.value(tn)(z, w) - mean_n);
        inner += w_z * row;
      }
      acc += w_xy * fm * inner;
    }
  }
  return acc;
}

inline MixingReport covariance_mixing_check(const Chain& chain, const MarginalSet& m,
                                            const Functional& f, const EllipticityReport& ell) {
  MixingReport rep;
  std::vector<double> sd(static_cast<std::size_t>(chain.horizon) + 1);
  for (int n = 1; n <= chain.horizon; ++n) sd[static_cast<std::size_t>(n)] = functional_sd(chain, m, f, n);
  for (int tm = 1; tm <= chain.horizon; ++tm)
    for (int tn = tm + 1; tn <= chain.horizon; ++tn) {
      const double cov = exact_pair_covariance(chain, m, f, tm, tn);
      rep.max_abs_cov = std::max(rep.max_abs_cov, std::fabs(cov));
      rep.sum_abs_cov += std::fabs(cov);
      const double bound = ell.cmix * std::pow(ell.theta, tn - tm) *
                           sd[static_cast<std::size_t>(tm)] * sd[static_cast<std::size_t>(tn)];
      if (bound > 0) {
        const double r = std::fabs(cov) / bound;
        if (r > rep.max_ratio) {
          rep.max_ratio = r;
          rep.worst_m = tm;
          rep.worst_n = tn;
        }
      } else if (std::fabs(cov) > 1e-13) {
        rep.max_ratio = kPosInf;
        rep.worst_m = tm;
        rep.worst_n = tn;
      }
    }
  return rep;
}

}  // namespace mclt
