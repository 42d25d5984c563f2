#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mclt/chain.hpp"

// Brute-force oracle: the exact joint law of (X_{n+1}, S_n) on a lattice grid,
// built by forward dynamic programming.  Everything downstream (LLT ratios,
// CLT distances, moments, interval bounds) is measured against these tables.

namespace mclt {

struct DistTable {
  double step = 1.0;                    // lattice step t
  std::vector<double> offset;           // S_n lives on offset[n] + step*Z, n = 0..N
  struct Slice {
    std::int64_t kmin = 0;              // grid index of the first column
    matrix probs;                       // n_states(n+1) x width
  };
  std::vector<Slice> slices;            // n = 0..N
  std::optional<std::size_t> from_state;
  double rounding_error = 0.0;          // |S - S_rounded| <= this (0 if f was lattice)

  int horizon() const { return static_cast<int>(slices.size()) - 1; }

  // Value of grid column k in slice n.
  double value(int n, std::int64_t k) const {
    const auto& s = slices[static_cast<std::size_t>(n)];
    return offset[static_cast<std::size_t>(n)] + static_cast<double>(s.kmin + k) * step;
  }

  // P(S_n = value), summed over terminal states.
  std::vector<double> masses(int n) const {
    const auto& s = slices[static_cast<std::size_t>(n)];
    std::vector<double> out(s.probs.cols(), 0.0);
    for (std::size_t x = 0; x < s.probs.rows(); ++x)
      for (std::size_t k = 0; k < s.probs.cols(); ++k) out[k] += s.probs(x, k);
    return out;
  }

  double total_mass(int n) const {
    double s = 0.0;
    for (double v : masses(n)) s += v;
    return s;
  }

  // P(S_N = z) for a lattice point z; OffLattice if z is off the coset.
  double point_prob(double z) const {
    const int n = horizon();
    const auto& s = slices[static_cast<std::size_t>(n)];
    const double u = (z - offset[static_cast<std::size_t>(n)]) / step;
    const double r = std::fabs(u - std::round(u));
    if (r > 1e-6) throw OffLattice("z = " + std::to_string(z) + " is off the support coset");
    const std::int64_t k = static_cast<std::int64_t>(std::llround(u)) - s.kmin;
    if (k < 0 || k >= static_cast<std::int64_t>(s.probs.cols())) return 0.0;
    double mass = 0.0;
    for (std::size_t x = 0; x < s.probs.rows(); ++x) mass += s.probs(x, static_cast<std::size_t>(k));
    return mass;
  }

  // P(S_N in (a,b)), open interval, final slice.  When the table was built by
  // rounding a real-valued functional the caller is responsible for inflating
  // the endpoints by rounding_error.
  double interval_prob(double a, double b) const {
    const int n = horizon();
    const auto m = masses(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double v = value(n, static_cast<std::int64_t>(k));
      if (v > a && v < b) acc += m[k];
    }
    return acc;
  }

  double mean(int n) const {
    const auto m = masses(n);
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) s += m[k] * value(n, static_cast<std::int64_t>(k));
    return s;
  }

  double variance(int n) const {
    const auto m = masses(n);
    const double mu = mean(n);
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k)
      s += m[k] * sqr(value(n, static_cast<std::int64_t>(k)) - mu);
    return s;
  }
};

// Round a real-valued functional onto a grid of step h (default K / 2^12).
// |S_N(rounded) - S_N| <= N h / 2.
inline Functional round_functional(const Functional& f, double h = 0.0) {
  if (h <= 0.0) h = std::max(f.bound, 1e-12) / 4096.0;
  std::vector<matrix> vals = f.values;
  for (auto& m : vals)
    for (double& v : m.data()) v = std::round(v / h) * h;
  return Functional::from_values(std::move(vals), h);
}

// Forward DP.  Requires a declared lattice step.
inline DistTable exact_sn_distribution(const Chain& chain, const MarginalSet& marginals,
                                       const Functional& f,
                                       std::optional<std::size_t> from_state = std::nullopt,
                                       double grid_guard = 1e6) {
  check_functional_shape(chain, f);
  if (!f.lattice) throw error("exact_sn_distribution needs a lattice functional (round first)");
  const double t = *f.lattice;
  if (static_cast<double>(chain.horizon) * std::max(f.bound, t) / t > grid_guard)
    throw GridTooLarge("N*K/t exceeds the grid guard");

  DistTable table;
  table.step = t;
  table.from_state = from_state;
  table.offset.assign(static_cast<std::size_t>(chain.horizon) + 1, 0.0);

  DistTable::Slice s0;
  s0.kmin = 0;
  s0.probs = matrix(chain.n_states(1), 1, 0.0);
  if (from_state) {
    s0.probs(*from_state, 0) = 1.0;
  } else {
    for (std::size_t x = 0; x < chain.n_states(1); ++x) s0.probs(x, 0) = marginals.at(1)[x];
  }
  table.slices.push_back(std::move(s0));

  for (int n = 1; n <= chain.horizon; ++n) {
    const matrix& k = chain.kernel(n);
    const matrix& fv = f.value(n);
    const double cn = f.coset(n);
    table.offset[static_cast<std::size_t>(n)] = table.offset[static_cast<std::size_t>(n - 1)] + cn;

    // integer shifts j with f = cn + j t
    basic_matrix<std::int64_t> shift(k.rows(), k.cols());
    std::int64_t jmin = 0, jmax = 0;
    for (std::size_t x = 0; x < k.rows(); ++x)
      for (std::size_t y = 0; y < k.cols(); ++y) {
        const std::int64_t j = static_cast<std::int64_t>(std::llround((fv(x, y) - cn) / t));
        shift(x, y) = j;
        if (k(x, y) > 0) {
          jmin = std::min(jmin, j);
          jmax = std::max(jmax, j);
        }
      }

    const auto& prev = table.slices.back();
    DistTable::Slice next;
    next.kmin = prev.kmin + jmin;
    const std::size_t width = prev.probs.cols() + static_cast<std::size_t>(jmax - jmin);
    next.probs = matrix(chain.n_states(n + 1), width, 0.0);
    for (std::size_t x = 0; x < k.rows(); ++x)
      for (std::size_t kk = 0; kk < prev.probs.cols(); ++kk) {
        const double p = prev.probs(x, kk);
        if (p == 0.0) continue;
        for (std::size_t y = 0; y < k.cols(); ++y) {
          if (k(x, y) == 0.0) continue;
          next.probs(y, kk + static_cast<std::size_t>(shift(x, y) - jmin)) += p * k(x, y);
        }
      }
    table.slices.push_back(std::move(next));
  }
  return table;
}

// Restrict the final slice to a terminal event A and renormalize: the law of
// S_N given X_{N+1} in A (and X_1 = from_state if the table was conditioned).
inline DistTable condition_on_terminal(const DistTable& table,
                                       const std::vector<std::size_t>& event) {
  DistTable out = table;
  auto& s = out.slices.back();
  std::vector<bool> keep(s.probs.rows(), false);
  for (std::size_t y : event) keep[y] = true;
  double mass = 0.0;
  for (std::size_t y = 0; y < s.probs.rows(); ++y)
    for (std::size_t k = 0; k < s.probs.cols(); ++k) {
      if (!keep[y]) s.probs(y, k) = 0.0;
      mass += s.probs(y, k);
    }
  if (mass <= 0.0) throw NullConditioningEvent("terminal event has zero probability");
  for (double& v : s.probs.data()) v /= mass;
  return out;
}

// ----------------------------------------------------------------------------
// moments: exact mean, variance and central moments up to order r (r <= 8).
// ----------------------------------------------------------------------------

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> central;  // central[j] = E (S - E S)^j, j = 0..r
};

inline Moments moments(const DistTable& table, int r = 4) {
  if (r > 8) throw error("moment order capped at 8");
  const int n = table.horizon();
  Moments mo;
  mo.mean = table.mean(n);
  mo.central.assign(static_cast<std::size_t>(r) + 1, 0.0);
  const auto m = table.masses(n);
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double d = table.value(n, static_cast<std::int64_t>(k)) - mo.mean;
    double pw = 1.0;
    for (int j = 0; j <= r; ++j) {
      mo.central[static_cast<std::size_t>(j)] += m[k] * pw;
      pw *= d;
    }
  }
  mo.variance = r >= 2 ? mo.central[2] : table.variance(n);
  return mo;
}

// ----------------------------------------------------------------------------
// clt_distance: Kolmogorov distance of S_N to Normal(E S_N, V_N), sup over
// lattice points of the CDF difference.
// ----------------------------------------------------------------------------

inline double clt_distance(const DistTable& table) {
  const int n = table.horizon();
  const double mu = table.mean(n), var = table.variance(n);
  if (var <= 0.0) throw DegenerateVariance("V_N = 0");
  const double sd = std::sqrt(var);
  const auto m = table.masses(n);
  double cdf = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    const double v = table.value(n, static_cast<std::int64_t>(k));
    worst = std::max(worst, std::fabs(cdf - normal_cdf((v - mu) / sd)));  // left limit
    cdf += m[k];
    worst = std::max(worst, std::fabs(cdf - normal_cdf((v - mu) / sd)));
  }
  return worst;
}

// ----------------------------------------------------------------------------
// llt_lattice_check: exact P(S_N = z_N) over the Gaussian local prediction
// t*exp(-z^2/2)/sqrt(2 pi V_N), z = (z_N - E S_N)/sqrt(V_N).
// ----------------------------------------------------------------------------

struct LltRatio {
  double exact = 0.0;
  double prediction = 0.0;
  double ratio = 0.0;
  double z_score = 0.0;
};

inline LltRatio llt_lattice_check(const DistTable& table, double z_target) {
  const int n = table.horizon();
  const double mu = table.mean(n), var = table.variance(n);
  if (var <= 0.0) throw DegenerateVariance("V_N = 0");
  LltRatio out;
  out.exact = table.point_prob(z_target);
  out.z_score = (z_target - mu) / std::sqrt(var);
  out.prediction =
      table.step * std::exp(-0.5 * sqr(out.z_score)) / std::sqrt(2.0 * kPi * var);
  out.ratio = out.prediction > 0 ? out.exact / out.prediction : kPosInf;
  return out;
}

// ----------------------------------------------------------------------------
// universal_bound_check: interval mass against the graininess-aware envelope
//   lower (1 - delta/L - eps) and upper (1 + 21 delta/L + eps) multiples of
//   the Gaussian mass, plus the crude [1/3, 3] sandwich for L > 2 delta + eps.
// ----------------------------------------------------------------------------

struct UniversalBoundReport {
  double exact = 0.0;
  double gaussian = 0.0;          // e^{-z^2/2} |a-b| / sqrt(2 pi V_N)
  double lower = 0.0, upper = 0.0;
  bool envelope_holds = false;
  bool crude_applicable = false;  // |a-b| > 2 delta + eps
  bool crude_holds = false;       // exact in [1/3, 3] * gaussian
};

inline UniversalBoundReport universal_bound_check(const DistTable& table, double a, double b,
                                                  double z_target, double delta_f,
                                                  double eps = 0.1) {
  const double len = b - a;
  if (!(len > delta_f)) throw IntervalTooShort("need |a-b| > delta(f)");
  const int n = table.horizon();
  const double mu = table.mean(n), var = table.variance(n);
  if (var <= 0.0) throw DegenerateVariance("V_N = 0");
  UniversalBoundReport rep;
  rep.exact = table.interval_prob(z_target + a + table.rounding_error,
                                  z_target + b - table.rounding_error);
  // Deliberately deflated interval when rounding applies; the envelope also
  // gets the eps slack, so exactness of the grid is what matters here.
  const double z = (z_target - mu) / std::sqrt(var);
  rep.gaussian = std::exp(-0.5 * z * z) * len / std::sqrt(2.0 * kPi * var);
  rep.lower = rep.gaussian * std::max(0.0, 1.0 - delta_f / len - eps);
  rep.upper = rep.gaussian * (1.0 + 21.0 * delta_f / len + eps);
  rep.envelope_holds = rep.exact >= rep.lower && rep.exact <= rep.upper;
  rep.crude_applicable = len > 2.0 * delta_f + eps;
  rep.crude_holds = rep.exact >= rep.gaussian / 3.0 && rep.exact <= 3.0 * rep.gaussian;
  return rep;
}

// ----------------------------------------------------------------------------
// Log-domain final distribution: same DP with log-probabilities, for tail
// masses far below double underflow.  Returns the final slice only.
// ----------------------------------------------------------------------------

struct LogFinalSlice {
  double step = 1.0;
  double offset = 0.0;
  std::int64_t kmin = 0;
  std::vector<double> log_mass;  // log P(S_N = offset + (kmin+k) step), summed over states

  double value(std::size_t k) const {
    return offset + static_cast<double>(kmin + static_cast<std::int64_t>(k)) * step;
  }
  // log P(S_N >= y)
  double log_upper_tail(double y) const {
    double acc = kNegInf;
    for (std::size_t k = 0; k < log_mass.size(); ++k)
      if (value(k) >= y) acc = log_add(acc, log_mass[k]);
    return acc;
  }
  // log P(S_N <= y)
  double log_lower_tail(double y) const {
    double acc = kNegInf;
    for (std::size_t k = 0; k < log_mass.size(); ++k)
      if (value(k) <= y) acc = log_add(acc, log_mass[k]);
    return acc;
  }
};

inline LogFinalSlice log_final_distribution(const Chain& chain, const MarginalSet& marginals,
                                            const Functional& f,
                                            std::optional<std::size_t> from_state = std::nullopt,
                                            double grid_guard = 1e6) {
  check_functional_shape(chain, f);
  if (!f.lattice) throw error("log_final_distribution needs a lattice functional");
  const double t = *f.lattice;
  if (static_cast<double>(chain.horizon) * std::max(f.bound, t) / t > grid_guard)
    throw GridTooLarge("N*K/t exceeds the grid guard");

  std::int64_t kmin = 0;
  double offset = 0.0;
  matrix cur(chain.n_states(1), 1, kNegInf);
  for (std::size_t x = 0; x < chain.n_states(1); ++x) {
    const double p = from_state ? (x == *from_state ? 1.0 : 0.0) : marginals.at(1)[x];
    cur(x, 0) = p > 0 ? std::log(p) : kNegInf;
  }

  for (int n = 1; n <= chain.horizon; ++n) {
    const matrix& k = chain.kernel(n);
    const matrix& fv = f.value(n);
    const double cn = f.coset(n);
    offset += cn;
    basic_matrix<std::int64_t> shift(k.rows(), k.cols());
    std::int64_t jmin = 0, jmax = 0;
    for (std::size_t x = 0; x < k.rows(); ++x)
      for (std::size_t y = 0; y < k.cols(); ++y) {
        const std::int64_t j = static_cast<std::int64_t>(std::llround((fv(x, y) - cn) / t));
        shift(x, y) = j;
        if (k(x, y) > 0) {
          jmin = std::min(jmin, j);
          jmax = std::max(jmax, j);
        }
      }
    const std::size_t width = cur.cols() + static_cast<std::size_t>(jmax - jmin);
    matrix next(chain.n_states(n + 1), width, kNegInf);
    for (std::size_t x = 0; x < k.rows(); ++x)
      for (std::size_t kk = 0; kk < cur.cols(); ++kk) {
        const double lp = cur(x, kk);
        if (lp == kNegInf) continue;
        for (std::size_t y = 0; y < k.cols(); ++y) {
          if (k(x, y) == 0.0) continue;
          auto& cell = next(y, kk + static_cast<std::size_t>(shift(x, y) - jmin));
          cell = log_add(cell, lp + std::log(k(x, y)));
        }
      }
    cur = std::move(next);
    kmin += jmin;
  }

  LogFinalSlice out;
  out.step = t;
  out.offset = offset;
  out.kmin = kmin;
  out.log_mass.assign(cur.cols(), kNegInf);
  for (std::size_t x = 0; x < cur.rows(); ++x)
    for (std::size_t k = 0; k < cur.cols(); ++k)
      out.log_mass[k] = log_add(out.log_mass[k], cur(x, k));
  return out;
}

// Variance curve V_n for n = 1..N (exact, from the slice marginals).
inline std::vector<double> variance_curve(const DistTable& table) {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(table.horizon()));
  for (int n = 1; n <= table.horizon(); ++n) v.push_back(table.variance(n));
  return v;
}

}  // namespace mclt
