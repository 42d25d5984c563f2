#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mclt/chain.hpp"
#include "mclt/hexagons.hpp"

// Decompositions and range classification: the gradient decomposition
// f = ftilde + grad a + c with ||ftilde_n||_2 <= u_n, its integer variant, the
// algebraic / essential range and graininess of an additive functional, and
// the center-tightness verdict.

namespace mclt {

// ----------------------------------------------------------------------------
// Gradient decomposition.  Convention: (grad a)_n(x,y) = a_{n+1}(y) - a_n(x).
// ----------------------------------------------------------------------------

struct GradientDecomposition {
  std::vector<std::vector<double>> a;  // a_1..a_{N+1}; a_1 = a_2 = 0
  std::vector<double> c;               // c_1..c_N; c_1 = c_2 = 0
  std::vector<matrix> ftilde;          // residual, same shapes as f

  const std::vector<double>& a_at(int n) const { return a[static_cast<std::size_t>(n - 1)]; }
  double c_at(int n) const { return c[static_cast<std::size_t>(n - 1)]; }
  const matrix& ftilde_at(int n) const { return ftilde[static_cast<std::size_t>(n - 1)]; }
};

// L2 norm of a position functional under the law of (X_n, X_{n+1}).
inline double pair_l2(const Chain& chain, const MarginalSet& m, const matrix& g, int n) {
  const matrix law = pair_law(chain, m, n);
  double s = 0.0;
  for (std::size_t i = 0; i < law.data().size(); ++i) s += law.data()[i] * sqr(g.data()[i]);
  return std::sqrt(s);
}

// a_n(x) = sum_z mu_{n-2}(z) sum_y bridge(y | z -> x) [f_{n-2}(z,y) + f_{n-1}(y,x)],
// c_n    = E f_{n-2},  ftilde = f - grad a - c.
inline GradientDecomposition gradient_decomposition(const Chain& chain, const MarginalSet& m,
                                                    const Functional& f) {
  check_functional_shape(chain, f);
  const int N = chain.horizon;
  GradientDecomposition gd;
  gd.a.resize(static_cast<std::size_t>(N) + 1);
  gd.c.assign(static_cast<std::size_t>(N), 0.0);
  gd.a[0].assign(chain.n_states(1), 0.0);
  if (N >= 1) gd.a[1].assign(chain.n_states(2), 0.0);

  for (int n = 3; n <= N + 1; ++n) {
    const auto& mu = m.at(n - 2);
    const auto br = bridge_table(chain, m, n - 2);
    const matrix& f2 = f.value(n - 2);
    const matrix& f1 = f.value(n - 1);
    std::vector<double> an(chain.n_states(n), 0.0);
    for (std::size_t x = 0; x < an.size(); ++x) {
      double acc = 0.0;
      for (std::size_t z = 0; z < mu.size(); ++z) {
        if (mu[z] == 0.0) continue;
        const auto& b = br[z][x];
        double inner = 0.0;
        for (std::size_t y = 0; y < b.size(); ++y)
          if (b[y] > 0) inner += b[y] * (f2(z, y) + f1(y, x));
        acc += mu[z] * inner;
      }
      an[x] = acc;
    }
    gd.a[static_cast<std::size_t>(n - 1)] = std::move(an);
  }

  for (int n = 3; n <= N; ++n)
    gd.c[static_cast<std::size_t>(n - 1)] = functional_mean(chain, m, f, n - 2);

  gd.ftilde.reserve(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) {
    matrix r = f.value(n);
    const auto& an = gd.a_at(n);
    const auto& an1 = gd.a_at(n + 1);
    for (std::size_t x = 0; x < r.rows(); ++x)
      for (std::size_t y = 0; y < r.cols(); ++y)
        r(x, y) -= (an1[y] - an[x]) + gd.c_at(n);
    gd.ftilde.push_back(std::move(r));
  }
  return gd;
}

// ----------------------------------------------------------------------------
// Integer reduction: f = g + grad a + c with integer g, a, c and
// sum_{n>=3} E g_n^2 <= 10^3 K^4 sum u_n^2.  Reference states z_n are picked
// by a greedy forward scan against exact suffix expectations of the
// conditional squared balance (greedy value <= the z-average, which equals
// sum u_n^2).
// ----------------------------------------------------------------------------

struct IntegerReduction {
  std::vector<std::vector<long>> a;  // a_1..a_{N+1}; a_1 = a_2 = 0
  std::vector<long> c;               // c_1..c_N
  std::vector<matrix> g;             // integer-valued residual
  std::vector<std::size_t> ref_path; // z_1..z_{N-1}
  double sum_eg2 = 0.0;              // sum_{n=3}^N E g_n^2
};

namespace detail {

// E[Gamma_n^2 | x_{n-2} = z, x_{n-1} = w] under the hexagon measure.
inline double conditional_balance_sq(const Chain& chain, const MarginalSet& m,
                                     const Functional& f, int n, std::size_t z, std::size_t w) {
  const matrix law_right = pair_law(chain, m, n);
  const auto br_mid = bridge_table(chain, m, n - 1);
  const auto br_low = bridge_table(chain, m, n - 2);
  const matrix& f2 = f.value(n - 2);
  const matrix& f1 = f.value(n - 1);
  const matrix& f0 = f.value(n);
  double acc = 0.0;
  for (std::size_t yn = 0; yn < law_right.rows(); ++yn)
    for (std::size_t yp = 0; yp < law_right.cols(); ++yp) {
      const double wr = law_right(yn, yp);
      if (wr == 0.0) continue;
      const auto& bm = br_mid[w][yp];
      const auto& bl = br_low[z][yn];
      double ma = 0.0, sa = 0.0, mb = 0.0, sb = 0.0;
      for (std::size_t xn = 0; xn < bm.size(); ++xn) {
        if (bm[xn] == 0.0) continue;
        const double aval = f2(z, w) + f1(w, xn) + f0(xn, yp);
        ma += bm[xn] * aval;
        sa += bm[xn] * aval * aval;
      }
      for (std::size_t ym = 0; ym < bl.size(); ++ym) {
        if (bl[ym] == 0.0) continue;
        const double bval = f2(z, ym) + f1(ym, yn) + f0(yn, yp);
        mb += bl[ym] * bval;
        sb += bl[ym] * bval * bval;
      }
      acc += wr * (sa - 2.0 * ma * mb + sb);
    }
  return acc;
}

inline long to_int(double v, const char* what) {
  const double r = std::round(v);
  if (std::fabs(v - r) > 1e-9) throw NotIntegerValued(what);
  return static_cast<long>(r);
}

}  // namespace detail

inline IntegerReduction integer_reduction(const Chain& chain, const MarginalSet& m,
                                          const Functional& f) {
  check_functional_shape(chain, f);
  const int N = chain.horizon;
  for (int n = 1; n <= N; ++n)
    for (double v : f.value(n).data()) detail::to_int(v, "functional entry");
  if (N < 3) throw error("integer_reduction needs horizon >= 3");

  // cost[n] indexed by (z_{n-2}, w_{n-1}) for n = 3..N
  std::vector<matrix> cost(static_cast<std::size_t>(N) + 1);
  for (int n = 3; n <= N; ++n) {
    matrix cm(chain.n_states(n - 2), chain.n_states(n - 1));
    for (std::size_t z = 0; z < cm.rows(); ++z)
      for (std::size_t w = 0; w < cm.cols(); ++w)
        cm(z, w) = detail::conditional_balance_sq(chain, m, f, n, z, w);
    cost[static_cast<std::size_t>(n)] = std::move(cm);
  }

  // Suffix expectations s_k(z) = E[ sum_{m >= k+2} cost_m | Z_k = z ].
  std::vector<std::vector<double>> suffix(static_cast<std::size_t>(N));
  suffix[static_cast<std::size_t>(N - 1) - 1].assign(chain.n_states(N - 1), 0.0);
  for (int k = N - 2; k >= 1; --k) {
    const matrix& kk = chain.kernel(k);
    std::vector<double> s(chain.n_states(k), 0.0);
    const auto& nxt = suffix[static_cast<std::size_t>(k)];
    for (std::size_t z = 0; z < s.size(); ++z) {
      double acc = 0.0;
      for (std::size_t y = 0; y < kk.cols(); ++y) {
        if (kk(z, y) == 0.0) continue;
        acc += kk(z, y) * (cost[static_cast<std::size_t>(k + 2)](z, y) + nxt[y]);
      }
      s[z] = acc;
    }
    suffix[static_cast<std::size_t>(k - 1)] = std::move(s);
  }

  IntegerReduction red;
  red.ref_path.resize(static_cast<std::size_t>(N - 1));
  {
    std::size_t best = 0;
    double bestv = kPosInf;
    for (std::size_t z = 0; z < chain.n_states(1); ++z)
      if (m.at(1)[z] > 0 && suffix[0][z] < bestv) {
        bestv = suffix[0][z];
        best = z;
      }
    red.ref_path[0] = best;
  }
  for (int k = 1; k <= N - 2; ++k) {
    const matrix& kk = chain.kernel(k);
    const std::size_t zk = red.ref_path[static_cast<std::size_t>(k - 1)];
    std::size_t best = 0;
    double bestv = kPosInf;
    for (std::size_t y = 0; y < kk.cols(); ++y) {
      if (kk(zk, y) == 0.0) continue;
      const double v = cost[static_cast<std::size_t>(k + 2)](zk, y) +
                       suffix[static_cast<std::size_t>(k)][y];
      if (v < bestv) {
        bestv = v;
        best = y;
      }
    }
    red.ref_path[static_cast<std::size_t>(k)] = best;
  }

  // c_n = f_{n-2}(z_{n-2}, z_{n-1});  a_n(x) = smallest most likely value of
  // f_{n-2}(z_{n-2}, Y) + f_{n-1}(Y, x) with Y bridged between z_{n-2} and x.
  red.c.assign(static_cast<std::size_t>(N), 0);
  for (int n = 3; n <= N; ++n)
    red.c[static_cast<std::size_t>(n - 1)] =
        detail::to_int(f.value(n - 2)(red.ref_path[static_cast<std::size_t>(n - 3)],
                                      red.ref_path[static_cast<std::size_t>(n - 2)]),
                       "c_n");

  red.a.resize(static_cast<std::size_t>(N) + 1);
  red.a[0].assign(chain.n_states(1), 0);
  red.a[1].assign(chain.n_states(2), 0);
  for (int n = 3; n <= N + 1; ++n) {
    const std::size_t z = red.ref_path[static_cast<std::size_t>(n - 3)];
    const auto br = bridge_table(chain, m, n - 2);
    const matrix& f2 = f.value(n - 2);
    const matrix& f1 = f.value(n - 1);
    std::vector<long> an(chain.n_states(n), 0);
    for (std::size_t x = 0; x < an.size(); ++x) {
      std::map<long, double> value_mass;
      const auto& b = br[z][x];
      for (std::size_t y = 0; y < b.size(); ++y)
        if (b[y] > 0) value_mass[detail::to_int(f2(z, y) + f1(y, x), "bridge sum")] += b[y];
      long best = 0;
      double bestp = -1.0;
      for (const auto& [v, p] : value_mass)
        if (p > bestp + 1e-15) {  // map is value-ordered: ties keep the smaller
          bestp = p;
          best = v;
        }
      an[x] = best;
    }
    red.a[static_cast<std::size_t>(n - 1)] = std::move(an);
  }

  red.g.reserve(static_cast<std::size_t>(N));
  for (int n = 1; n <= N; ++n) {
    matrix gm = f.value(n);
    const auto& an = red.a[static_cast<std::size_t>(n - 1)];
    const auto& an1 = red.a[static_cast<std::size_t>(n)];
    for (std::size_t x = 0; x < gm.rows(); ++x)
      for (std::size_t y = 0; y < gm.cols(); ++y)
        gm(x, y) -= static_cast<double>(an1[y] - an[x]) +
                    static_cast<double>(red.c[static_cast<std::size_t>(n - 1)]);
    if (n >= 3) {
      const matrix law = pair_law(chain, m, n);
      for (std::size_t i = 0; i < law.data().size(); ++i)
        red.sum_eg2 += law.data()[i] * sqr(gm.data()[i]);
    }
    red.g.push_back(std::move(gm));
  }
  return red;
}

// ----------------------------------------------------------------------------
// Range classification.
// ----------------------------------------------------------------------------

enum class RangeKind { Reals, Lattice, Zero };

struct RangeReport {
  RangeKind algebraic = RangeKind::Reals;
  double algebraic_step = 0.0;            // t for Lattice
  std::vector<double> algebraic_coset;    // c_n per position
  std::vector<double> corange_candidates; // grid xi with max_n d_n(xi) < 1e-8
  RangeKind essential = RangeKind::Reals;
  double essential_step = 0.0;
  double graininess = 0.0;                 // delta(f): t, 0, or +inf
  bool center_tight = false;
  double un_total = 0.0;
  double un_relative_increase = 0.0;       // U growth over the last quarter
  bool essential_step_sane = true;         // k <= 12K for integer non-tight f
};

struct CenterTightVerdict {
  bool bounded = false;
  double c1_empirical = 0.0;     // max over N of max(V/U, U/V) after burn-in
  double u_increase = 0.0;       // relative increase over the last quarter
  double v_increase = 0.0;
};

inline CenterTightVerdict center_tight_verdict(const HexagonStats& stats,
                                               const std::vector<double>& variance_curve,
                                               double plateau_tol = 0.01) {
  CenterTightVerdict v;
  const int N = static_cast<int>(variance_curve.size());
  const int q = std::max(1, (3 * N) / 4);
  const double v_late = variance_curve.back();
  const double v_early = variance_curve[static_cast<std::size_t>(q - 1)];
  v.v_increase = v_early > 1e-12 ? (v_late - v_early) / v_early : (v_late > 1e-12 ? kPosInf : 0.0);

  const int top = std::min<int>(N, 3 + static_cast<int>(stats.u.size()) - 1);
  if (!stats.u.empty()) {
    const double u_late = stats.UN_prefix(top);
    const double u_early = stats.UN_prefix(std::max(3, (3 * top) / 4));
    v.u_increase =
        u_early > 1e-12 ? (u_late - u_early) / u_early : (u_late > 1e-12 ? kPosInf : 0.0);
  }
  v.bounded = v.u_increase < plateau_tol && v.v_increase < plateau_tol;

  const int burn = std::max(8, top / 4);
  for (int n = burn; n <= top && n >= 3; ++n) {
    const double u = stats.UN_prefix(n);
    const double var = variance_curve[static_cast<std::size_t>(n - 1)];
    if (u > 1e-9 && var > 1e-9)
      v.c1_empirical = std::max(v.c1_empirical, std::max(var / u, u / var));
  }
  return v;
}

inline RangeReport classify_range(const HexagonStats& stats, const Functional& f,
                                  const Chain* chain = nullptr, const MarginalSet* m = nullptr,
                                  double zero_tol = kCorangeTol) {
  RangeReport rep;

  // Algebraic range: group generated by within-position value differences on
  // the support.
  std::vector<double> diffs;
  bool any_diff = false;
  rep.algebraic_coset.clear();
  for (std::size_t n = 0; n < f.values.size(); ++n) {
    std::vector<double> attained;
    const matrix& fv = f.values[n];
    for (std::size_t x = 0; x < fv.rows(); ++x)
      for (std::size_t y = 0; y < fv.cols(); ++y) {
        if (chain && m) {
          if (m->at(static_cast<int>(n) + 1)[x] <= 0.0 ||
              chain->kernel(static_cast<int>(n) + 1)(x, y) <= 0.0)
            continue;
        }
        attained.push_back(fv(x, y));
      }
    double lo = attained.empty() ? 0.0 : attained[0];
    for (double v : attained) lo = std::min(lo, v);
    rep.algebraic_coset.push_back(lo);
    for (std::size_t i = 0; i < attained.size(); ++i)
      for (std::size_t j = i + 1; j < attained.size(); ++j) {
        const double d = attained[i] - attained[j];
        if (std::fabs(d) > kLatticeTol) {
          diffs.push_back(d);
          any_diff = true;
        }
      }
  }
  if (!any_diff) {
    rep.algebraic = RangeKind::Zero;
  } else {
    const double g = real_gcd(diffs);
    if (g == 0.0) {
      rep.algebraic = RangeKind::Reals;
    } else {
      rep.algebraic = RangeKind::Lattice;
      rep.algebraic_step = g;
      for (std::size_t n = 0; n < rep.algebraic_coset.size(); ++n) {
        double c = std::fmod(rep.algebraic_coset[n], g);
        if (c < 0) c += g;
        rep.algebraic_coset[n] = c;
      }
    }
  }

  // Center-tightness from the U_N trend.
  const int top = 3 + static_cast<int>(stats.u.size()) - 1;
  rep.un_total = stats.UN;
  if (!stats.u.empty()) {
    const double late = stats.UN_prefix(top);
    const double early = stats.UN_prefix(std::max(3, (3 * top) / 4));
    rep.un_relative_increase =
        early > 1e-12 ? (late - early) / early : (late > 1e-12 ? kPosInf : 0.0);
    rep.center_tight = rep.un_relative_increase < 0.01;
  } else {
    rep.center_tight = true;
  }

  // Co-range candidates by the finite-horizon zero test, with a divergence
  // slope check on ambiguous frequencies.
  std::vector<std::string> ambiguous;
  for (std::size_t i = 0; i < stats.xis.size(); ++i) {
    double dmax = 0.0;
    for (double dn : stats.d[i]) dmax = std::max(dmax, dn);
    if (dmax < zero_tol) {
      rep.corange_candidates.push_back(stats.xis[i]);
      continue;
    }
    if (top >= 12 && !rep.center_tight) {
      const auto pre = stats.DN_prefix(i, {top / 4, top / 2, top});
      const double early = pre[1] - pre[0];
      const double late = pre[2] - pre[1];
      if (early > 1e-14) {
        // rho near 2 for linearly divergent D_N, near 0 for summable tails,
        // near 1 for the undecidable 1/n boundary.
        const double rho = late / early;
        const double p = normal_cdf(6.0 * (rho - 1.0));
        if (p <= 0.01)
          rep.corange_candidates.push_back(stats.xis[i]);  // summable but not yet < tol
        else if (p < 0.99)
          ambiguous.push_back(std::to_string(stats.xis[i]));
      }
    }
  }
  if (!ambiguous.empty())
    throw InconclusiveAtHorizon("D_N slope ambiguous at xi = " + ambiguous.front() +
                                (ambiguous.size() > 1 ? " and others" : ""));
  std::sort(rep.corange_candidates.begin(), rep.corange_candidates.end());

  if (rep.center_tight) {
    rep.essential = RangeKind::Zero;
    rep.graininess = kPosInf;
  } else if (rep.corange_candidates.empty()) {
    rep.essential = RangeKind::Reals;
    rep.graininess = 0.0;
  } else {
    const double xi_star = real_gcd(rep.corange_candidates, 1e-9);
    rep.essential = RangeKind::Lattice;
    rep.essential_step = xi_star > 0 ? 2.0 * kPi / xi_star : 0.0;
    rep.graininess = rep.essential_step;
    const bool integer_valued = f.lattice && std::fabs(*f.lattice - std::round(*f.lattice)) < 1e-9;
    if (integer_valued && rep.essential_step > 12.0 * f.bound + 1e-9)
      rep.essential_step_sane = false;
  }
  return rep;
}

// ----------------------------------------------------------------------------
// Almost-sure convergence check for summable-variance functionals.
// ----------------------------------------------------------------------------

struct ConvergenceReport {
  double variance_total = 0.0;
  double variance_tail = 0.0;      // over the last quarter
  double median_oscillation = 0.0;
  double max_oscillation = 0.0;
  double threshold = 0.0;          // 3 sqrt(variance_tail)
  bool pass = false;
};

inline ConvergenceReport summable_variance_convergence_check(const Chain& chain,
                                                             const MarginalSet& m,
                                                             const Functional& f, int samples,
                                                             std::uint64_t seed) {
  check_functional_shape(chain, f);
  const int N = chain.horizon;
  std::vector<double> var_n(static_cast<std::size_t>(N) + 1, 0.0);
  std::vector<double> mean_n(static_cast<std::size_t>(N) + 1, 0.0);
  double total = 0.0, half_tail = 0.0;
  for (int n = 1; n <= N; ++n) {
    mean_n[static_cast<std::size_t>(n)] = functional_mean(chain, m, f, n);
    var_n[static_cast<std::size_t>(n)] = sqr(functional_sd(chain, m, f, n));
    total += var_n[static_cast<std::size_t>(n)];
    if (n > N / 2) half_tail += var_n[static_cast<std::size_t>(n)];
  }
  if (total > 1e-12 && half_tail > 0.4 * total)
    throw NotSummable("variance sum has not converged by the horizon");

  ConvergenceReport rep;
  rep.variance_total = total;
  const int q0 = (3 * N) / 4;
  for (int n = q0 + 1; n <= N; ++n) rep.variance_tail += var_n[static_cast<std::size_t>(n)];
  rep.threshold = 3.0 * std::sqrt(rep.variance_tail);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> oscs;
  oscs.reserve(static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    // sample X_1 ~ mu_1, then kernel rows
    auto draw = [&](const std::vector<double>& w) {
      double u = unif(rng), acc = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u <= acc) return i;
      }
      return w.size() - 1;
    };
    std::size_t x = draw(m.at(1));
    double w_partial = 0.0, w_min = 0.0, w_max = 0.0;
    for (int n = 1; n <= N; ++n) {
      const matrix& k = chain.kernel(n);
      std::vector<double> row(k.cols());
      for (std::size_t y = 0; y < k.cols(); ++y) row[y] = k(x, y);
      const std::size_t y = draw(row);
      w_partial += f.value(n)(x, y) - mean_n[static_cast<std::size_t>(n)];
      if (n == q0) {
        w_min = w_max = w_partial;
      } else if (n > q0) {
        w_min = std::min(w_min, w_partial);
        w_max = std::max(w_max, w_partial);
      }
      x = y;
    }
    oscs.push_back(w_max - w_min);
    rep.max_oscillation = std::max(rep.max_oscillation, w_max - w_min);
  }
  std::sort(oscs.begin(), oscs.end());
  rep.median_oscillation = oscs[oscs.size() / 2];
  rep.pass = rep.median_oscillation <= rep.threshold + 1e-12;
  return rep;
}

// ----------------------------------------------------------------------------
// Circular mean / variance helper (proof-internal in the source theory; kept
// as a documented utility).  CVar(W) = min_theta E|e^{i(W-theta)} - 1|^2
// = 2 - 2|E e^{iW}|, attained at theta = arg E e^{iW}.
// ----------------------------------------------------------------------------

struct CircularStats {
  double mean = 0.0;
  double cvar = 0.0;
};

inline CircularStats circular_variance(const std::vector<std::pair<double, double>>& value_prob) {
  cplx phi(0.0, 0.0);
  for (const auto& [v, p] : value_prob) phi += p * std::polar(1.0, v);
  CircularStats cs;
  cs.cvar = 2.0 - 2.0 * std::abs(phi);
  cs.mean = std::abs(phi) > 1e-15 ? std::arg(phi) : 0.0;
  return cs;
}

}  // namespace mclt
