#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mclt/chain.hpp"
#include "mclt/exact_dist.hpp"
#include "mclt/hexagons.hpp"
#include "mclt/large_dev.hpp"
#include "mclt/reduction.hpp"

// Markov chains in random environment with a finite ergodic noise process:
// the noise emits a symbol per time step, each symbol names a (kernel, f)
// pair from a finite family sharing one stationary law.  Quenching a noise
// realization produces an ordinary inhomogeneous chain that the rest of the
// library analyzes.

namespace mclt::mcre {

struct FamilyMember {
  matrix kernel;
  matrix f;
};

struct Family {
  std::vector<FamilyMember> members;
  std::vector<double> mu;  // common stationary law
  std::optional<double> lattice;

  std::size_t n_states() const { return mu.size(); }
};

// ----------------------------------------------------------------------------
// Noise processes.
// ----------------------------------------------------------------------------

struct NoiseProcess {
  enum class Kind { Bernoulli, Markov, Rotation } kind = Kind::Bernoulli;
  std::vector<double> weights;          // Bernoulli
  matrix transition;                    // Markov
  std::vector<double> stationary;       // Markov
  double angle = 0.0;                   // Rotation: omega -> omega + angle  (mod 2 pi)
  std::vector<double> arc_bounds;       // Rotation: 0 = b0 < b1 < ... < bk = 2 pi

  static NoiseProcess bernoulli(std::vector<double> w) {
    NoiseProcess n;
    n.kind = Kind::Bernoulli;
    n.weights = std::move(w);
    return n;
  }
  static NoiseProcess markov(matrix t, std::vector<double> pi) {
    NoiseProcess n;
    n.kind = Kind::Markov;
    n.transition = std::move(t);
    n.stationary = std::move(pi);
    return n;
  }
  static NoiseProcess rotation(double alpha, std::vector<double> bounds) {
    NoiseProcess n;
    n.kind = Kind::Rotation;
    n.angle = alpha;
    n.arc_bounds = std::move(bounds);
    return n;
  }

  // Symbol sequence for steps 1..N.  Replay-deterministic in (seed, omega0).
  std::vector<int> symbols(int n_steps, std::uint64_t seed, double omega0 = 0.0) const {
    std::vector<int> out(static_cast<std::size_t>(n_steps), 0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw = [&](const std::vector<double>& w) {
      double u = unif(rng), acc = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u <= acc) return static_cast<int>(i);
      }
      return static_cast<int>(w.size()) - 1;
    };
    switch (kind) {
      case Kind::Bernoulli:
        for (auto& s : out) s = draw(weights);
        break;
      case Kind::Markov: {
        int cur = draw(stationary);
        for (auto& s : out) {
          s = cur;
          std::vector<double> row(transition.cols());
          for (std::size_t j = 0; j < row.size(); ++j)
            row[j] = transition(static_cast<std::size_t>(cur), j);
          cur = draw(row);
        }
        break;
      }
      case Kind::Rotation: {
        const double two_pi = 2.0 * kPi;
        double w = std::fmod(omega0, two_pi);
        if (w < 0) w += two_pi;
        for (auto& s : out) {
          w = std::fmod(w + angle, two_pi);
          if (w < 0) w += two_pi;
          int arc = 0;
          for (std::size_t b = 1; b + 1 < arc_bounds.size() && w >= arc_bounds[b]; ++b) ++arc;
          s = arc;
        }
        break;
      }
    }
    return out;
  }
};

// ----------------------------------------------------------------------------
// Family ellipticity: every kernel pair must satisfy the two-step bound with
// the common stationary background.
// ----------------------------------------------------------------------------

inline double family_ellipticity(const Family& fam) {
  for (const auto& e : fam.members) {
    const auto next = vec_mat(fam.mu, e.kernel);
    for (std::size_t i = 0; i < fam.mu.size(); ++i)
      if (std::fabs(next[i] - fam.mu[i]) > 1e-10)
        throw NotStationary("family kernel does not preserve the common law");
  }
  const std::size_t ns = fam.n_states();
  double density_sup = 0.0, twostep_inf = kPosInf;
  auto density = [&](const matrix& k, std::size_t x, std::size_t y) {
    return fam.mu[y] > 0 ? k(x, y) / fam.mu[y] : 0.0;
  };
  for (const auto& e : fam.members)
    for (std::size_t x = 0; x < ns; ++x)
      for (std::size_t y = 0; y < ns; ++y)
        density_sup = std::max(density_sup, density(e.kernel, x, y));
  for (const auto& e1 : fam.members)
    for (const auto& e2 : fam.members)
      for (std::size_t x = 0; x < ns; ++x)
        for (std::size_t z = 0; z < ns; ++z) {
          double acc = 0.0;
          for (std::size_t y = 0; y < ns; ++y)
            acc += density(e1.kernel, x, y) * density(e2.kernel, y, z) * fam.mu[y];
          twostep_inf = std::min(twostep_inf, acc);
        }
  if (!(twostep_inf > 0.0))
    throw NonUniformlyElliptic("a kernel pair has a vanishing two-step density");
  return std::min(density_sup > 0 ? 1.0 / density_sup : 1.0, twostep_inf * (1.0 - 1e-12));
}

// ----------------------------------------------------------------------------
// quench: the realized inhomogeneous chain for one noise draw.
// ----------------------------------------------------------------------------

struct QuenchedChain {
  Chain chain;
  Functional f;
  std::vector<int> symbols;
  double eps0 = 0.0;
};

inline QuenchedChain quench_from_symbols(const Family& fam, const std::vector<int>& symbols) {
  QuenchedChain q;
  q.symbols = symbols;
  q.eps0 = family_ellipticity(fam);
  const int n = static_cast<int>(symbols.size());
  q.chain.horizon = n;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < fam.n_states(); ++i) labels.push_back("s" + std::to_string(i));
  q.chain.states.assign(static_cast<std::size_t>(n) + 1, labels);
  q.chain.initial = fam.mu;
  std::vector<matrix> vals;
  for (int step = 0; step < n; ++step) {
    const auto& mem = fam.members[static_cast<std::size_t>(symbols[static_cast<std::size_t>(step)])];
    q.chain.kernels.push_back(mem.kernel);
    vals.push_back(mem.f);
  }
  q.f = Functional::from_values(std::move(vals), fam.lattice);
  return q;
}

inline QuenchedChain quench(const NoiseProcess& noise, const Family& fam, int n_steps,
                            std::uint64_t seed, double omega0 = 0.0) {
  return quench_from_symbols(fam, noise.symbols(n_steps, seed, omega0));
}

// ----------------------------------------------------------------------------
// quenched_structure_fn: single-position structure constants as a pure
// function of the three consecutive symbols around the position.
// ----------------------------------------------------------------------------

inline void quenched_structure_fn(const Family& fam, int s0, int s1, int s2,
                                  const std::vector<double>& xis, double& u,
                                  std::vector<double>& d) {
  QuenchedChain q = quench_from_symbols(fam, {s0, s1, s2});
  auto m = validate_chain(q.chain);
  position_structure(q.chain, m, q.f, 3, xis, u, d);
}

// ----------------------------------------------------------------------------
// quenched_variance_growth: exact V_N^omega across independent noise draws.
// ----------------------------------------------------------------------------

struct VarianceGrowthReport {
  std::vector<int> horizons;
  // per horizon: slopes V_N^omega / N for each draw
  std::vector<std::vector<double>> slopes;
  std::vector<double> relative_spread;  // (max-min)/mean per horizon
};

inline VarianceGrowthReport quenched_variance_growth(const NoiseProcess& noise,
                                                     const Family& fam,
                                                     const std::vector<int>& horizons,
                                                     int trials, std::uint64_t seed) {
  VarianceGrowthReport rep;
  rep.horizons = horizons;
  const int n_max = *std::max_element(horizons.begin(), horizons.end());
  rep.slopes.assign(horizons.size(), {});
  for (int tr = 0; tr < trials; ++tr) {
    const double omega0 = 2.0 * kPi * static_cast<double>(tr) / std::max(trials, 1);
    QuenchedChain q = quench(noise, fam, n_max, seed + static_cast<std::uint64_t>(tr), omega0);
    for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
      Chain c = prefix_chain(q.chain, horizons[hi]);
      Functional f = prefix_functional(q.f, horizons[hi]);
      auto m = validate_chain(c);
      const double v = eigendata(c, m, f, 0.0).variance;
      rep.slopes[hi].push_back(v / horizons[hi]);
    }
  }
  for (const auto& sl : rep.slopes) {
    double lo = kPosInf, hi = kNegInf, mean = 0.0;
    for (double v : sl) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mean += v;
    }
    mean /= static_cast<double>(sl.size());
    rep.relative_spread.push_back(mean > 0 ? (hi - lo) / mean : 0.0);
  }
  return rep;
}

// ----------------------------------------------------------------------------
// quenched_llt_check: per-draw exact point mass at the rounded mean against
// the quenched Gaussian prediction with the pooled variance slope.
// ----------------------------------------------------------------------------

struct QuenchedLltReport {
  std::vector<double> ratios;     // per accepted draw
  double pooled_sigma2 = 0.0;
  double median_ratio = 0.0;
  int skipped_reducible = 0;      // draws whose realized chain classified off 1Z
};

inline QuenchedLltReport quenched_llt_check(const NoiseProcess& noise, const Family& fam,
                                            int horizon, int draws, std::uint64_t seed) {
  QuenchedLltReport rep;
  std::vector<QuenchedChain> qs;
  for (int tr = 0; tr < draws; ++tr) {
    const double omega0 = 2.0 * kPi * static_cast<double>(tr) / std::max(draws, 1);
    qs.push_back(quench(noise, fam, horizon, seed + 1000 + static_cast<std::uint64_t>(tr), omega0));
  }
  double pooled = 0.0;
  std::vector<double> variances;
  for (auto& q : qs) {
    auto m = validate_chain(q.chain);
    variances.push_back(eigendata(q.chain, m, q.f, 0.0).variance);
    pooled += variances.back() / horizon;
  }
  rep.pooled_sigma2 = pooled / static_cast<double>(qs.size());

  for (std::size_t i = 0; i < qs.size(); ++i) {
    auto& q = qs[i];
    auto m = validate_chain(q.chain);
    // classification on a short prefix keeps this cheap; the realized lattice
    // must be 1Z for the integer point-mass LLT
    const int probe = std::min(horizon, 48);
    Chain pc = prefix_chain(q.chain, probe);
    Functional pf = prefix_functional(q.f, probe);
    auto pm = validate_chain(pc);
    const auto stats = structure_constants(pc, pm, pf, default_xi_grid(pf));
    const auto range = classify_range(stats, pf, &pc, &pm);
    if (range.essential != RangeKind::Lattice ||
        std::fabs(range.essential_step - 1.0) > 1e-6) {
      ++rep.skipped_reducible;
      continue;
    }
    const DistTable table = exact_sn_distribution(q.chain, m, q.f);
    const double mean = table.mean(horizon);
    // nearest lattice point to the mean on the support coset
    const double gamma = table.offset.back();
    const double z = gamma + std::round((mean - gamma) / table.step) * table.step;
    const double exact = table.point_prob(z);
    const double zs = (z - mean) / std::sqrt(variances[i]);
    const double pred = std::exp(-0.5 * zs * zs) /
                        std::sqrt(2.0 * kPi * rep.pooled_sigma2 * horizon);
    rep.ratios.push_back(exact / pred);
  }
  if (!rep.ratios.empty()) {
    auto sorted = rep.ratios;
    std::sort(sorted.begin(), sorted.end());
    rep.median_ratio = sorted[sorted.size() / 2];
  }
  return rep;
}

}  // namespace mclt::mcre
