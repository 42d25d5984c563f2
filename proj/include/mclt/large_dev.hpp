#pragma once

#include <optional>
#include <vector>

#include "mclt/chain.hpp"
#include "mclt/exact_dist.hpp"

// Finite-horizon exponential tilting.  The generalized eigenfunctions h_n and
// step pressures p_n are built by one backward sweep from the boundary
// h_{N+1} = 1, jointly with their first two xi-derivatives, which makes the
// log-MGF of S_N and its derivatives exact (no finite differences anywhere in
// the production path).  On top of that sit the rate function, the tilt
// solver, the tilted chain, the exact change-of-measure identity, the
// large-deviation LLT evaluator, and the reachability threshold estimators.

namespace mclt {

inline constexpr double kDefaultRmax = 20.0;

// ----------------------------------------------------------------------------
// EigenData: h_n(., xi), p_n(xi), and the log-MGF with two derivatives.
// Normalization: integral of h_n d mu_n = 1 for n <= N, h_{N+1} = 1.
// Exact identity: E_x e^{xi S_N} = e^{P_N} h_1(x).
// ----------------------------------------------------------------------------

struct EigenData {
  double xi = 0.0;
  std::vector<std::vector<double>> h;    // h_1..h_{N+1}
  std::vector<std::vector<double>> hp;   // d h_n / d xi
  std::vector<double> p;                 // p_1..p_N
  std::vector<double> p1, p2;            // d p_n, d^2 p_n
  double PN = 0.0;                       // sum p_n  ("raw" normalization)
  double PN_d1 = 0.0, PN_d2 = 0.0;       // its xi-derivatives
  double log_mgf = 0.0;                  // log E_mu e^{xi S_N}  (exact)
  double d1 = 0.0, d2 = 0.0;             // derivatives of log_mgf
  double variance = 0.0;                 // V_N = d2 at xi = 0
  double logmgf_normalized = 0.0;        // F_N(xi) = log_mgf / V_N

  const std::vector<double>& h_at(int n) const { return h[static_cast<std::size_t>(n - 1)]; }
  double p_at(int n) const { return p[static_cast<std::size_t>(n - 1)]; }
};

namespace detail {

struct EigenSweep {
  std::vector<std::vector<double>> h, hp;
  std::vector<double> p, p1, p2;
  double PN = 0.0, PN_d1 = 0.0, PN_d2 = 0.0;
  double log_mgf = 0.0, d1 = 0.0, d2 = 0.0;
};

inline EigenSweep eigen_sweep(const Chain& chain, const MarginalSet& m, const Functional& f,
                              double xi) {
  const int N = chain.horizon;
  EigenSweep sw;
  sw.h.resize(static_cast<std::size_t>(N) + 1);
  sw.hp.resize(static_cast<std::size_t>(N) + 1);
  sw.p.assign(static_cast<std::size_t>(N), 0.0);
  sw.p1.assign(static_cast<std::size_t>(N), 0.0);
  sw.p2.assign(static_cast<std::size_t>(N), 0.0);

  std::vector<double> v(chain.n_states(N + 1), 1.0);
  std::vector<double> v1(v.size(), 0.0), v2(v.size(), 0.0);
  sw.h[static_cast<std::size_t>(N)] = v;
  sw.hp[static_cast<std::size_t>(N)] = v1;

  for (int n = N; n >= 1; --n) {
    const matrix& k = chain.kernel(n);
    const matrix& fv = f.value(n);
    std::vector<double> w(k.rows(), 0.0), w1(k.rows(), 0.0), w2(k.rows(), 0.0);
    for (std::size_t x = 0; x < k.rows(); ++x) {
      double a0 = 0.0, a1 = 0.0, a2 = 0.0;
      for (std::size_t y = 0; y < k.cols(); ++y) {
        if (k(x, y) == 0.0) continue;
        const double e = k(x, y) * std::exp(xi * fv(x, y));
        const double fw = fv(x, y);
        a0 += e * v[y];
        a1 += e * (fw * v[y] + v1[y]);
        a2 += e * (fw * fw * v[y] + 2.0 * fw * v1[y] + v2[y]);
      }
      w[x] = a0;
      w1[x] = a1;
      w2[x] = a2;
    }
    // normalize: p_n = log mean of w under mu_n
    const auto& mu = m.at(n);
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t x = 0; x < w.size(); ++x) {
      b0 += mu[x] * w[x];
      b1 += mu[x] * w1[x];
      b2 += mu[x] * w2[x];
    }
    if (!(b0 > 0.0)) throw error("eigen sweep lost positivity (non-elliptic input?)");
    const double pn = std::log(b0);
    const double pn1 = b1 / b0;
    const double pn2 = b2 / b0 - pn1 * pn1;
    sw.p[static_cast<std::size_t>(n - 1)] = pn;
    sw.p1[static_cast<std::size_t>(n - 1)] = pn1;
    sw.p2[static_cast<std::size_t>(n - 1)] = pn2;
    sw.PN += pn;
    sw.PN_d1 += pn1;
    sw.PN_d2 += pn2;
    for (std::size_t x = 0; x < w.size(); ++x) {
      const double g = 1.0 / b0;
      const double h0 = w[x] * g;
      const double h1 = (w1[x] - pn1 * w[x]) * g;
      const double h2 = (w2[x] - 2.0 * pn1 * w1[x] + (pn1 * pn1 - pn2) * w[x]) * g;
      w[x] = h0;
      w1[x] = h1;
      w2[x] = h2;
    }
    v = w;
    v1 = w1;
    v2 = w2;
    sw.h[static_cast<std::size_t>(n - 1)] = v;
    sw.hp[static_cast<std::size_t>(n - 1)] = v1;
  }

  // boundary term: log E_mu e^{xi S_N} = PN + log sum mu_1 h_1
  const auto& mu1 = m.at(1);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t x = 0; x < v.size(); ++x) {
    b0 += mu1[x] * v[x];
    b1 += mu1[x] * v1[x];
    b2 += mu1[x] * v2[x];
  }
  sw.log_mgf = sw.PN + std::log(b0);
  sw.d1 = sw.PN_d1 + b1 / b0;
  sw.d2 = sw.PN_d2 + (b2 * b0 - b1 * b1) / (b0 * b0);
  return sw;
}

}  // namespace detail

inline EigenData eigendata(const Chain& chain, const MarginalSet& m, const Functional& f,
                           double xi, double r_max = kDefaultRmax) {
  check_functional_shape(chain, f);
  if (std::fabs(xi) > r_max + 1.0 + 1e-9)
    throw OutOfDomain("|xi| exceeds R_max + 1 = " + std::to_string(r_max + 1.0));
  auto sw = detail::eigen_sweep(chain, m, f, xi);
  EigenData e;
  e.xi = xi;
  e.h = std::move(sw.h);
  e.hp = std::move(sw.hp);
  e.p = std::move(sw.p);
  e.p1 = std::move(sw.p1);
  e.p2 = std::move(sw.p2);
  e.PN = sw.PN;
  e.PN_d1 = sw.PN_d1;
  e.PN_d2 = sw.PN_d2;
  e.log_mgf = sw.log_mgf;
  e.d1 = sw.d1;
  e.d2 = sw.d2;
  e.variance = xi == 0.0 ? sw.d2 : detail::eigen_sweep(chain, m, f, 0.0).d2;
  e.logmgf_normalized = e.variance > 0 ? e.log_mgf / e.variance : 0.0;
  for (const auto& hv : e.h)
    for (double v : hv)
      if (!(v > 0.0)) throw error("eigenvector lost positivity");
  return e;
}

// Residual of the per-step eigen relation
//   sum_y e^{xi f_n(x,y)} h_{n+1}(y) pi_n(x,y) = e^{p_n} h_n(x),
// max relative error over (n, x).
inline double eigen_relation_residual(const Chain& chain, const Functional& f,
                                      const EigenData& e) {
  double worst = 0.0;
  for (int n = 1; n <= chain.horizon; ++n) {
    const matrix& k = chain.kernel(n);
    const matrix& fv = f.value(n);
    const auto& hn = e.h_at(n);
    const auto& hn1 = e.h_at(n + 1);
    for (std::size_t x = 0; x < k.rows(); ++x) {
      double lhs = 0.0;
      for (std::size_t y = 0; y < k.cols(); ++y)
        lhs += k(x, y) * std::exp(e.xi * fv(x, y)) * hn1[y];
      const double rhs = std::exp(e.p_at(n)) * hn[x];
      worst = std::max(worst, std::fabs(lhs - rhs) / std::max(std::fabs(rhs), 1e-300));
    }
  }
  return worst;
}

// ----------------------------------------------------------------------------
// log_mgf_profile: F_N, F_N', F_N'' on a grid (F_N = log-MGF / V_N).
// ----------------------------------------------------------------------------

struct MgfProfile {
  std::vector<double> xi, F, F1, F2;
  double variance = 0.0;
};

inline MgfProfile log_mgf_profile(const Chain& chain, const MarginalSet& m, const Functional& f,
                                  const std::vector<double>& grid) {
  MgfProfile prof;
  prof.variance = detail::eigen_sweep(chain, m, f, 0.0).d2;
  if (!(prof.variance > 0.0)) throw DegenerateVariance("V_N = 0");
  for (double xi : grid) {
    const auto sw = detail::eigen_sweep(chain, m, f, xi);
    prof.xi.push_back(xi);
    prof.F.push_back(sw.log_mgf / prof.variance);
    prof.F1.push_back(sw.d1 / prof.variance);
    prof.F2.push_back(sw.d2 / prof.variance);
  }
  return prof;
}

// ----------------------------------------------------------------------------
// Extremal path sums over the support graph (exact essinf/esssup of S_N).
// ----------------------------------------------------------------------------

struct PathExtremes {
  double min_sum = 0.0;
  double max_sum = 0.0;
};

inline PathExtremes extremal_path_sums(const Chain& chain, const MarginalSet& m,
                                       const Functional& f) {
  std::vector<double> lo(chain.n_states(1)), hi(chain.n_states(1));
  for (std::size_t x = 0; x < lo.size(); ++x) {
    const bool live = m.at(1)[x] > 0.0;
    lo[x] = live ? 0.0 : kPosInf;
    hi[x] = live ? 0.0 : kNegInf;
  }
  for (int n = 1; n <= chain.horizon; ++n) {
    const matrix& k = chain.kernel(n);
    const matrix& fv = f.value(n);
    std::vector<double> lo2(k.cols(), kPosInf), hi2(k.cols(), kNegInf);
    for (std::size_t x = 0; x < k.rows(); ++x)
      for (std::size_t y = 0; y < k.cols(); ++y) {
        if (k(x, y) == 0.0) continue;
        if (lo[x] != kPosInf) lo2[y] = std::min(lo2[y], lo[x] + fv(x, y));
        if (hi[x] != kNegInf) hi2[y] = std::max(hi2[y], hi[x] + fv(x, y));
      }
    lo = std::move(lo2);
    hi = std::move(hi2);
  }
  PathExtremes ex;
  ex.min_sum = kPosInf;
  ex.max_sum = kNegInf;
  for (double v : lo) ex.min_sum = std::min(ex.min_sum, v);
  for (double v : hi) ex.max_sum = std::max(ex.max_sum, v);
  return ex;
}

// ----------------------------------------------------------------------------
// Rate function: I_N(eta) = xi eta - F_N(xi) at the unique xi with
// F_N'(xi) = eta.  Safeguarded Newton with a grown bracket.
// ----------------------------------------------------------------------------

struct RateFunction {
  double domain_lo = 0.0, domain_hi = 0.0;  // (inf F', sup F') = path extremes / V_N
  double safe_lo = 0.0, safe_hi = 0.0;      // [F'(-R), F'(R)]
  double variance = 0.0;
};

struct LegendreResult {
  double I = 0.0;
  double xi = 0.0;
};

namespace detail {

// Solve d1(xi) = target (a strictly increasing function of xi).
inline double solve_monotone_d1(const Chain& chain, const MarginalSet& m, const Functional& f,
                                double target, double xi_cap, double tol = 1e-10) {
  auto d1_at = [&](double xi) { return eigen_sweep(chain, m, f, xi).d1; };
  double lo = -1.0, hi = 1.0;
  for (int i = 0; i < 200 && d1_at(lo) > target; ++i) {
    lo *= 2.0;
    if (lo < -xi_cap) { lo = -xi_cap; break; }
  }
  for (int i = 0; i < 200 && d1_at(hi) < target; ++i) {
    hi *= 2.0;
    if (hi > xi_cap) { hi = xi_cap; break; }
  }
  if (d1_at(lo) > target || d1_at(hi) < target)
    throw OutOfDomain("target slope not bracketed within |xi| <= " + std::to_string(xi_cap));

  double xi = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const auto sw = eigen_sweep(chain, m, f, xi);
    const double g = sw.d1 - target;
    if (std::fabs(g) < tol) return xi;
    if (g > 0) hi = xi; else lo = xi;
    double step = sw.d2 > 1e-14 ? g / sw.d2 : 0.0;
    double next = xi - step;
    if (!(next > lo && next < hi) || step == 0.0) next = 0.5 * (lo + hi);  // bisection fallback
    xi = next;
  }
  return xi;
}

}  // namespace detail

inline RateFunction rate_function(const Chain& chain, const MarginalSet& m, const Functional& f,
                                  double r_max = kDefaultRmax) {
  RateFunction rf;
  rf.variance = detail::eigen_sweep(chain, m, f, 0.0).d2;
  if (!(rf.variance > 0.0)) throw DegenerateVariance("V_N = 0");
  const auto ex = extremal_path_sums(chain, m, f);
  rf.domain_lo = ex.min_sum / rf.variance;
  rf.domain_hi = ex.max_sum / rf.variance;
  rf.safe_lo = detail::eigen_sweep(chain, m, f, -r_max).d1 / rf.variance;
  rf.safe_hi = detail::eigen_sweep(chain, m, f, r_max).d1 / rf.variance;
  return rf;
}

inline LegendreResult legendre(const Chain& chain, const MarginalSet& m, const Functional& f,
                               double eta, double xi_cap = 300.0) {
  const double variance = detail::eigen_sweep(chain, m, f, 0.0).d2;
  if (!(variance > 0.0)) throw DegenerateVariance("V_N = 0");
  const auto ex = extremal_path_sums(chain, m, f);
  if (!(eta > ex.min_sum / variance && eta < ex.max_sum / variance))
    throw OutOfDomain("eta outside (inf F', sup F')");
  if (f.bound > 0) xi_cap = std::min(xi_cap, 600.0 / f.bound);
  LegendreResult res;
  res.xi = detail::solve_monotone_d1(chain, m, f, eta * variance, xi_cap);
  const auto sw = detail::eigen_sweep(chain, m, f, res.xi);
  res.I = res.xi * eta - sw.log_mgf / variance;
  return res;
}

// ----------------------------------------------------------------------------
// solve_tilt: the unique xi_N with d1(xi_N) = z_N, for z_N/V_N inside the
// safe window [F'(-R), F'(R)].
// ----------------------------------------------------------------------------

struct TiltResult {
  double xi = 0.0;
  double cr_ratio = 0.0;  // |xi| V_N / |z - E S_N| (the C(R) witness)
};

inline TiltResult solve_tilt(const Chain& chain, const MarginalSet& m, const Functional& f,
                             double z, double r_max = kDefaultRmax) {
  const auto at0 = detail::eigen_sweep(chain, m, f, 0.0);
  if (!(at0.d2 > 0.0)) throw DegenerateVariance("V_N = 0");
  const double lo = detail::eigen_sweep(chain, m, f, -(r_max + 1.0)).d1;
  const double hi = detail::eigen_sweep(chain, m, f, r_max + 1.0).d1;
  if (!(z >= lo && z <= hi))
    throw NotReachable("z = " + std::to_string(z) + " outside [d1(-R-1), d1(R+1)]");
  TiltResult res;
  res.xi = detail::solve_monotone_d1(chain, m, f, z, r_max + 1.0);
  const double drift = std::fabs(z - at0.d1);
  res.cr_ratio = drift > 1e-12 ? std::fabs(res.xi) * at0.d2 / drift : 0.0;
  return res;
}

// ----------------------------------------------------------------------------
// tilted_chain: kernels pi~ = e^{xi f} h_{n+1}(y) / (e^{p_n} h_n(x)) pi.
// ----------------------------------------------------------------------------

struct TiltedChain {
  Chain chain;
  double mean_shift_gap = 0.0;  // |E~(S_N) - d1(xi)|; O(1) in the horizon
};

inline TiltedChain tilted_chain(const Chain& chain, const MarginalSet& m, const Functional& f,
                                const EigenData& e) {
  TiltedChain out;
  out.chain = chain;
  for (int n = 1; n <= chain.horizon; ++n) {
    matrix& k = out.chain.kernels[static_cast<std::size_t>(n - 1)];
    const matrix& fv = f.value(n);
    const auto& hn = e.h_at(n);
    const auto& hn1 = e.h_at(n + 1);
    const double ep = std::exp(e.p_at(n));
    for (std::size_t x = 0; x < k.rows(); ++x) {
      double row = 0.0;
      for (std::size_t y = 0; y < k.cols(); ++y) {
        k(x, y) *= std::exp(e.xi * fv(x, y)) * hn1[y] / (ep * hn[x]);
        row += k(x, y);
      }
      if (std::fabs(row - 1.0) > 1e-10)
        throw error("tilted kernel row drifted: " + std::to_string(row));
      for (std::size_t y = 0; y < k.cols(); ++y) k(x, y) /= row;
    }
  }
  auto tm = validate_chain(out.chain);
  double mean = 0.0;
  for (int n = 1; n <= chain.horizon; ++n) mean += functional_mean(out.chain, tm, f, n);
  out.mean_shift_gap = std::fabs(mean - e.d1);
  return out;
}

// ----------------------------------------------------------------------------
// change_of_measure_identity_check: the exact identity
//   P_x[S_N - z = kappa] = e^{P_N - xi z} h_1(x)
//        E~_x[ h_{N+1}(X~_{N+1})^{-1} e^{-xi (S~ - z)} 1[S~ - z = kappa] ],
// both sides by DP (h_{N+1} = 1 with this normalization).
// ----------------------------------------------------------------------------

struct IdentityCheck {
  double lhs = 0.0, rhs = 0.0;
  double relative_residual = 0.0;
};

inline IdentityCheck change_of_measure_identity_check(const Chain& chain, const MarginalSet& m,
                                                      const Functional& f, double xi, double z,
                                                      double kappa, std::size_t x) {
  if (!f.lattice) throw error("identity check needs a lattice functional");
  const EigenData e = eigendata(chain, m, f, xi);
  const DistTable plain = exact_sn_distribution(chain, m, f, x);
  IdentityCheck out;
  out.lhs = plain.point_prob(z + kappa);

  TiltedChain tc = tilted_chain(chain, m, f, e);
  auto tm = validate_chain(tc.chain);
  const DistTable tilted = exact_sn_distribution(tc.chain, tm, f, x);
  const double tilted_mass = tilted.point_prob(z + kappa);
  // log-domain combination of the prefactor
  const double log_rhs = (e.PN - xi * z) + std::log(e.h_at(1)[x]) - xi * kappa +
                         (tilted_mass > 0 ? std::log(tilted_mass) : kNegInf);
  out.rhs = std::exp(log_rhs);
  const double denom = std::max(out.lhs, 1e-300);
  out.relative_residual = std::fabs(out.rhs - out.lhs) / denom;
  return out;
}

// ----------------------------------------------------------------------------
// ld_llt_evaluate: prediction vs exact for P_x[S_N - z in (a,b)] (lattice sum)
// or the point mass at z.  The prediction follows the large-deviation LLT:
//   prefactor e^{-V_N H_N(z/V_N)} / sqrt(2 pi V_N),  rho_N = rho_hat rho_bar,
//   sum over lattice points of e^{-kappa xi_N},
// with H_N the Legendre transform of P_N/V_N (P_N normalized so P_N'(0) =
// E S_N by post-shifting) and H_N'' evaluated as V_N / P_N''(xi_N).
// ----------------------------------------------------------------------------

struct LdLltResult {
  double prediction = 0.0;
  double exact = 0.0;
  double ratio = 0.0;
  double xi = 0.0;
  double rate = 0.0;       // V_N I_N(z/V_N) with I_N from the exact log-MGF
  double rho_hat = 1.0;
  double rho_bar = 1.0;
  double h_second = 0.0;   // H_N''(z/V_N)
};

inline LdLltResult ld_llt_evaluate(const Chain& chain, const MarginalSet& m, const Functional& f,
                                   double z, std::optional<std::pair<double, double>> interval,
                                   std::size_t x, double r_max = kDefaultRmax) {
  if (!f.lattice) throw error("lattice form required (round first for real-valued f)");
  const double t = *f.lattice;
  const auto at0 = detail::eigen_sweep(chain, m, f, 0.0);
  const double V = at0.d2;
  if (!(V > 0.0)) throw DegenerateVariance("V_N = 0");

  // xi_N from the shifted pressure: P_shift'(xi) = z with P_shift' = PN_d1 + s.
  const double shift = at0.d1 - at0.PN_d1;  // E S_N - P_raw'(0)
  auto pshift_d1 = [&](double xi) { return detail::eigen_sweep(chain, m, f, xi).PN_d1 + shift; };
  const double lo = pshift_d1(-(r_max + 1.0)), hi = pshift_d1(r_max + 1.0);
  if (!(z >= lo && z <= hi)) throw NotReachable("z/V_N outside the safe tilt window");
  // bisection (P_shift' is monotone up to O(1) wiggles; robust boundaries)
  double a = -(r_max + 1.0), b = r_max + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (pshift_d1(mid) < z) a = mid; else b = mid;
    if (b - a < 1e-12) break;
  }
  LdLltResult res;
  res.xi = 0.5 * (a + b);

  const auto swx = detail::eigen_sweep(chain, m, f, res.xi);
  const double p_shift = swx.PN + shift * res.xi;
  res.h_second = swx.PN_d2 > 1e-12 ? V / swx.PN_d2 : kPosInf;

  // Reported decomposition: rho_hat = e^{V I - V H} sqrt(H''),
  // rho_bar = h_1(x) e^{-shift xi} (this normalization has
  // mu_{N+1}(1/h_{N+1}) = e^{-a_{N+1} xi} with a_{N+1} = shift).
  const LegendreResult leg = legendre(chain, m, f, z / V);
  res.rate = V * leg.I;
  const double neg_vh = p_shift - res.xi * z;  // = -V H_N(z/V_N)
  res.rho_hat = std::exp(res.rate + neg_vh) * std::sqrt(res.h_second);
  const EigenData e = eigendata(chain, m, f, res.xi, r_max);
  res.rho_bar = e.h_at(1)[x] * std::exp(-shift * res.xi);

  // lattice sum over the window; kappa = 0 alone for the point form
  double lattice_sum = 1.0;
  if (interval) {
    lattice_sum = 0.0;
    for (double kappa = std::ceil((interval->first + 1e-12) / t) * t;
         kappa < interval->second - 1e-12; kappa += t)
      lattice_sum += std::exp(-kappa * res.xi);
  }

  // prediction = [e^{-V I}/sqrt(2 pi V)] rho_hat rho_bar (t sum e^{-kappa xi});
  // algebraically this collapses to
  //   e^{P_raw(xi) - xi z} h_1(x) t sum e^{-kappa xi} / sqrt(2 pi P_raw''(xi)).
  const double log_core = -res.rate - 0.5 * std::log(2.0 * kPi * V) +
                          std::log(res.rho_hat) + std::log(res.rho_bar);
  res.prediction = std::exp(log_core) * t * lattice_sum;

  const DistTable table = exact_sn_distribution(chain, m, f, x);
  if (interval) {
    res.exact = 0.0;
    const auto masses = table.masses(table.horizon());
    for (std::size_t kk = 0; kk < masses.size(); ++kk) {
      const double v = table.value(table.horizon(), static_cast<std::int64_t>(kk)) - z;
      if (v > interval->first && v < interval->second) res.exact += masses[kk];
    }
  } else {
    res.exact = table.point_prob(z);
  }
  res.ratio = res.prediction > 0 ? res.exact / res.prediction : kPosInf;
  return res;
}

// ----------------------------------------------------------------------------
// Admissibility (reachability of z_N by bounded tilts), checked through exact
// tail masses: both-sided criterion
//   P(S_N >= z + eps V_N) and P(S_N <= z - eps V_N) at least eta^{V_N}.
// ----------------------------------------------------------------------------

struct AdmissibilityReport {
  double log_upper_tail = kNegInf;   // log P(S_N >= z + margin)
  double log_lower_tail = kNegInf;   // log P(S_N <= z - margin)
  double eta_upper = 0.0;            // exp(log_upper_tail / V_N)
  double eta_lower = 0.0;
  bool tilt_reachable = false;       // z/V_N inside [F'(-R), F'(R)]
  bool admissible = false;           // both tails positive
};

inline AdmissibilityReport admissibility_test(const Chain& chain, const MarginalSet& m,
                                              const Functional& f, double z, double eps,
                                              double r_max = kDefaultRmax) {
  const Functional lf = f.lattice ? f : round_functional(f);
  const auto at0 = detail::eigen_sweep(chain, m, f, 0.0);
  const double V = at0.d2;
  const LogFinalSlice tail = log_final_distribution(chain, m, lf);
  AdmissibilityReport rep;
  const double margin = eps * V;
  rep.log_upper_tail = tail.log_upper_tail(z + margin);
  rep.log_lower_tail = tail.log_lower_tail(z - margin);
  rep.eta_upper = std::exp(rep.log_upper_tail / std::max(V, 1.0));
  rep.eta_lower = std::exp(rep.log_lower_tail / std::max(V, 1.0));
  rep.admissible = rep.log_upper_tail > kNegInf && rep.log_lower_tail > kNegInf;
  try {
    solve_tilt(chain, m, f, z, r_max);
    rep.tilt_reachable = true;
  } catch (const NotReachable&) {
    rep.tilt_reachable = false;
  } catch (const OutOfDomain&) {
    rep.tilt_reachable = false;
  }
  return rep;
}

// ----------------------------------------------------------------------------
// ld_threshold_estimate: three estimator pairs for the asymptotic reachable
// window (c-, c+) in z/V_N units.
//   (1) the F'(+-R_max) surrogate;
//   (2) extremal path sums / V_N (max-plus);
//   (3) an admissibility scan: bisection over s = z/N of a both-sided exact
//       tail test at horizons N and N/2, where super-exponential decay is
//       flagged by the growth of the per-step rate |log P|/N between the two
//       horizons (threshold 0.015 nats/step), normalized by the differential
//       variance slope (V_N - V_{N/2}) / (N/2).
// ----------------------------------------------------------------------------

struct ThresholdEstimate {
  double f_prime_lo = 0.0, f_prime_hi = 0.0;
  double max_plus_lo = 0.0, max_plus_hi = 0.0;
  double admissible_lo = 0.0, admissible_hi = 0.0;
  double sigma2_slope = 0.0;  // (V_N - V_{N/2}) / (N - N/2)
};

namespace detail {

struct TailScan {
  LogFinalSlice full, half;
  int n_full = 0, n_half = 0;
  double margin = 0.0;

  // Per-step upper-tail rates at level s (cost of reaching S >= s n + margin).
  bool upper_ok(double s, double drift_tol) const {
    const double lf = full.log_upper_tail(s * n_full + margin);
    const double lh = half.log_upper_tail(s * n_half + margin);
    if (lf == kNegInf || lh == kNegInf) return false;
    const double drift = (-lf / n_full) - (-lh / n_half);
    return drift <= drift_tol;
  }
  bool lower_ok(double s, double drift_tol) const {
    const double lf = full.log_lower_tail(s * n_full - margin);
    const double lh = half.log_lower_tail(s * n_half - margin);
    if (lf == kNegInf || lh == kNegInf) return false;
    const double drift = (-lf / n_full) - (-lh / n_half);
    return drift <= drift_tol;
  }
  bool admissible(double s, double drift_tol) const {
    return upper_ok(s, drift_tol) && lower_ok(s, drift_tol);
  }
};

}  // namespace detail

inline ThresholdEstimate ld_threshold_estimate(const Chain& chain, const MarginalSet& m,
                                               const Functional& f,
                                               double r_max = kDefaultRmax,
                                               double drift_tol = 0.015) {
  ThresholdEstimate est;
  const int N = chain.horizon;
  const auto at0 = detail::eigen_sweep(chain, m, f, 0.0);
  const double V = at0.d2;
  if (!(V > 0.0)) throw DegenerateVariance("V_N = 0");

  est.f_prime_lo = detail::eigen_sweep(chain, m, f, -r_max).d1 / V;
  est.f_prime_hi = detail::eigen_sweep(chain, m, f, r_max).d1 / V;

  const auto ex = extremal_path_sums(chain, m, f);
  est.max_plus_lo = ex.min_sum / V;
  est.max_plus_hi = ex.max_sum / V;

  const int M = N / 2;
  Chain half = prefix_chain(chain, M);
  Functional half_f = prefix_functional(f, M);
  auto half_m = validate_chain(half);
  const double v_half = detail::eigen_sweep(half, half_m, half_f, 0.0).d2;
  est.sigma2_slope = (V - v_half) / static_cast<double>(N - M);

  const Functional lf = f.lattice ? f : round_functional(f);
  const Functional lf_half = prefix_functional(lf, M);
  detail::TailScan scan;
  scan.full = log_final_distribution(chain, m, lf);
  scan.half = log_final_distribution(half, half_m, lf_half);
  scan.n_full = N;
  scan.n_half = M;
  scan.margin = 2.0 * *lf.lattice;

  const double s_mean = at0.d1 / N;
  auto bisect_edge = [&](bool up) {
    double good = s_mean;
    double bad = up ? (ex.max_sum / N + 2.0 * scan.margin / N + 0.1)
                    : (ex.min_sum / N - 2.0 * scan.margin / N - 0.1);
    if (scan.admissible(bad, drift_tol)) return bad;  // everything reachable
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (good + bad);
      if (scan.admissible(mid, drift_tol)) good = mid; else bad = mid;
    }
    return 0.5 * (good + bad);
  };
  const double s_hi = bisect_edge(true);
  const double s_lo = bisect_edge(false);
  est.admissible_hi = s_hi / est.sigma2_slope;
  est.admissible_lo = s_lo / est.sigma2_slope;
  return est;
}

}  // namespace mclt
