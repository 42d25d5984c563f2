#pragma once

#include <optional>
#include <vector>

#include "mclt/chain.hpp"
#include "mclt/hexagons.hpp"
#include "mclt/reduction.hpp"

// Homogeneous specialization: one kernel, one stationary law, one summand
// function.  Green-Kubo asymptotic variance, coboundary and periodicity
// detection, the infinite-horizon eigenfunction by projective-metric
// iteration, and max/min mean cycles over the support graph.

namespace mclt::homog {

// Wrap (kernel, mu) as a finite-horizon chain for reuse of the generic
// machinery.
inline Chain as_chain(const matrix& kernel, const std::vector<double>& mu, int horizon) {
  Chain c;
  c.horizon = horizon;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < kernel.rows(); ++i) labels.push_back("s" + std::to_string(i));
  c.states.assign(static_cast<std::size_t>(horizon) + 1, labels);
  c.initial = mu;
  for (int n = 1; n <= horizon; ++n) c.kernels.push_back(kernel);
  return c;
}

inline Functional as_functional(const matrix& f, int horizon,
                                std::optional<double> lattice = std::nullopt) {
  std::vector<matrix> vals(static_cast<std::size_t>(horizon), f);
  return Functional::from_values(std::move(vals), lattice);
}

inline void require_stationary(const matrix& kernel, const std::vector<double>& mu) {
  const auto next = vec_mat(mu, kernel);
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (std::fabs(next[i] - mu[i]) > 1e-10)
      throw NotStationary("mu pi != mu at state " + std::to_string(i));
}

// Single-position structure constants of the homogeneous pair.
inline void homogeneous_structure(const matrix& kernel, const std::vector<double>& mu,
                                  const matrix& f, const std::vector<double>& xis, double& u,
                                  std::vector<double>& d) {
  Chain c = as_chain(kernel, mu, 3);
  auto m = validate_chain(c);
  position_structure(c, m, as_functional(f, 3), 3, xis, u, d);
}

// ----------------------------------------------------------------------------
// green_kubo_sigma2: sigma^2 = E(f0^2) + 2 sum_{k>=1} E(f0 f_k) for centered
// f, truncated once the exponentially decaying terms drop below 1e-14.
// ----------------------------------------------------------------------------

inline double green_kubo_sigma2(const matrix& kernel, const std::vector<double>& mu,
                                const matrix& f, int max_lag = 100000) {
  require_stationary(kernel, mu);
  double mean = 0.0;
  for (std::size_t x = 0; x < kernel.rows(); ++x)
    for (std::size_t y = 0; y < kernel.cols(); ++y) mean += mu[x] * kernel(x, y) * f(x, y);

  // phi(z) = E(fbar(z, X_next)), psi = state-weighted left factor
  std::vector<double> phi(kernel.rows(), 0.0);
  double var0 = 0.0;
  for (std::size_t x = 0; x < kernel.rows(); ++x)
    for (std::size_t y = 0; y < kernel.cols(); ++y) {
      const double fb = f(x, y) - mean;
      var0 += mu[x] * kernel(x, y) * fb * fb;
      phi[x] += kernel(x, y) * fb;
    }

  double sigma2 = var0;
  // E(f0 f_k) = sum_{x,y} mu(x) pi(x,y) fbar(x,y) (pi^{k-1} phi)(y)
  std::vector<double> prop = phi;  // pi^{k-1} phi, starting at k = 1
  for (int k = 1; k <= max_lag; ++k) {
    double term = 0.0;
    for (std::size_t x = 0; x < kernel.rows(); ++x)
      for (std::size_t y = 0; y < kernel.cols(); ++y)
        term += mu[x] * kernel(x, y) * (f(x, y) - mean) * prop[y];
    sigma2 += 2.0 * term;
    if (k > 8 && std::fabs(term) < 1e-14) break;
    prop = mat_vec(kernel, prop);
  }
  return sigma2;
}

// ----------------------------------------------------------------------------
// coboundary_detect: if the single-position structure constant vanishes,
// reconstruct f(x,y) = a(y) - a(x) + kappa.
// ----------------------------------------------------------------------------

struct Coboundary {
  std::vector<double> a;
  double kappa = 0.0;
};

inline std::optional<Coboundary> coboundary_detect(const matrix& kernel,
                                                   const std::vector<double>& mu,
                                                   const matrix& f) {
  require_stationary(kernel, mu);
  double u = 0.0;
  std::vector<double> d;
  homogeneous_structure(kernel, mu, f, {}, u, d);
  if (u > 1e-9) return std::nullopt;

  Chain c = as_chain(kernel, mu, 4);
  auto m = validate_chain(c);
  const auto gd = gradient_decomposition(c, m, as_functional(f, 4));
  Coboundary cb;
  cb.a = gd.a_at(3);
  cb.kappa = 0.0;
  for (std::size_t x = 0; x < kernel.rows(); ++x)
    for (std::size_t y = 0; y < kernel.cols(); ++y)
      cb.kappa += mu[x] * kernel(x, y) * f(x, y);
  for (std::size_t x = 0; x < kernel.rows(); ++x)
    for (std::size_t y = 0; y < kernel.cols(); ++y)
      if (kernel(x, y) > 0 &&
          std::fabs(f(x, y) - (cb.a[y] - cb.a[x] + cb.kappa)) > 1e-8)
        return std::nullopt;
  return cb;
}

// ----------------------------------------------------------------------------
// periodicity_detect: scan for d(xi) = 0 at xi > 0; at the smallest zero xi*,
// t = 2 pi / xi* and a phase function a with f + a(x) - a(y) + kappa in tZ
// a.s., reconstructed by spanning-tree propagation over the support graph.
// ----------------------------------------------------------------------------

struct Periodicity {
  double t = 0.0;
  std::vector<double> a;
  double kappa = 0.0;
};

namespace detail {

struct EdgeConstraint {
  long m = 0;
  double b = 0.0;
};

inline double mod_into(double v, double t) {
  double r = std::fmod(v, t);
  if (r < 0) r += t;
  return r;
}

}  // namespace detail

inline std::optional<Periodicity> periodicity_detect(const matrix& kernel,
                                                     const std::vector<double>& mu,
                                                     const matrix& f,
                                                     std::vector<double> xi_grid = {}) {
  require_stationary(kernel, mu);
  if (xi_grid.empty()) xi_grid = default_xi_grid(as_functional(f, 1));
  double u = 0.0;
  std::vector<double> d;
  homogeneous_structure(kernel, mu, f, xi_grid, u, d);
  double xi_star = 0.0;
  for (std::size_t i = 0; i < xi_grid.size(); ++i)
    if (d[i] < kCorangeTol) {
      xi_star = xi_grid[i];
      break;
    }
  if (xi_star == 0.0) return std::nullopt;
  const double t = 2.0 * kPi / xi_star;

  // Spanning tree over the (undirected view of the) support graph, with
  // a(v) = rho(v) + depth(v) * kappa.
  const std::size_t ns = kernel.rows();
  std::vector<double> rho(ns, 0.0);
  std::vector<long> depth(ns, 0);
  std::vector<int> seen(ns, 0);
  std::vector<std::size_t> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    const std::size_t v = queue.back();
    queue.pop_back();
    for (std::size_t w = 0; w < ns; ++w) {
      if (kernel(v, w) > 0 && !seen[w]) {  // forward edge v -> w
        rho[w] = rho[v] + f(v, w);
        depth[w] = depth[v] + 1;
        seen[w] = 1;
        queue.push_back(w);
      }
      if (kernel(w, v) > 0 && !seen[w]) {  // backward edge w -> v
        rho[w] = rho[v] - f(w, v);
        depth[w] = depth[v] - 1;
        seen[w] = 1;
        queue.push_back(w);
      }
    }
  }

  // Every support edge (x -> y) yields (depth x - depth y + 1) kappa ==
  // rho(y) - rho(x) - f(x,y)  (mod t).
  std::vector<detail::EdgeConstraint> cons;
  for (std::size_t x = 0; x < ns; ++x)
    for (std::size_t y = 0; y < ns; ++y)
      if (kernel(x, y) > 0 && seen[x] && seen[y])
        cons.push_back({depth[x] - depth[y] + 1, rho[y] - rho[x] - f(x, y)});

  std::vector<double> candidates;
  for (const auto& ec : cons) {
    if (ec.m == 0) {
      if (std::fabs(std::remainder(ec.b, t)) > 1e-8)
        throw InconsistentPhases("cycle with zero kappa-multiplier has phase defect");
      continue;
    }
    const long mm = std::labs(ec.m);
    for (long j = 0; j < mm; ++j)
      candidates.push_back(detail::mod_into((ec.b + static_cast<double>(j) * t) /
                                                static_cast<double>(ec.m),
                                            t));
  }
  if (candidates.empty()) candidates.push_back(0.0);

  for (double kappa : candidates) {
    bool good = true;
    std::vector<double> a(ns, 0.0);
    for (std::size_t v = 0; v < ns; ++v)
      a[v] = detail::mod_into(rho[v] + static_cast<double>(depth[v]) * kappa, t);
    for (std::size_t x = 0; x < ns && good; ++x)
      for (std::size_t y = 0; y < ns && good; ++y)
        if (kernel(x, y) > 0 &&
            std::fabs(std::remainder(f(x, y) + a[x] - a[y] + kappa, t)) > 1e-8)
          good = false;
    if (good) {
      Periodicity p;
      p.t = t;
      p.a = std::move(a);
      p.kappa = kappa;
      return p;
    }
  }
  throw InconsistentPhases("no kappa candidate satisfies the coset identity");
}

// ----------------------------------------------------------------------------
// birkhoff_eigenfunction: iterate h <- L^xi h / normalization to the fixed
// point in the Hilbert projective metric; p = log(mean L^xi h / mean h).
// ----------------------------------------------------------------------------

struct BirkhoffResult {
  std::vector<double> h;      // normalized, integral 1 under mu
  double p = 0.0;
  int iterations = 0;
  double max_double_step_contraction = 0.0;  // measured ratio, <= tanh(Delta/4)
};

inline double projective_distance(const std::vector<double>& h, const std::vector<double>& g) {
  double rmax = 0.0, rmin = kPosInf;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double r = h[i] / g[i];
    rmax = std::max(rmax, r);
    rmin = std::min(rmin, r);
  }
  return std::log(rmax / rmin);
}

inline BirkhoffResult birkhoff_eigenfunction(const matrix& kernel,
                                             const std::vector<double>& mu, const matrix& f,
                                             double xi, double tol = 1e-12,
                                             int max_iter = 100000) {
  require_stationary(kernel, mu);
  const std::size_t ns = kernel.rows();
  auto apply = [&](const std::vector<double>& h) {
    std::vector<double> out(ns, 0.0);
    for (std::size_t x = 0; x < ns; ++x)
      for (std::size_t y = 0; y < ns; ++y)
        if (kernel(x, y) > 0) out[x] += kernel(x, y) * std::exp(xi * f(x, y)) * h[y];
    return out;
  };
  auto mean_mu = [&](const std::vector<double>& h) {
    double s = 0.0;
    for (std::size_t i = 0; i < ns; ++i) s += mu[i] * h[i];
    return s;
  };

  BirkhoffResult res;
  std::vector<double> h(ns, 1.0);
  double prev_dist = kPosInf, prev_prev = kPosInf;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> nh = apply(h);
    res.p = std::log(mean_mu(nh));
    for (double& v : nh) v *= std::exp(-res.p);
    const double dist = projective_distance(nh, h);
    if (prev_prev < kPosInf && prev_prev > 1e-14)
      res.max_double_step_contraction =
          std::max(res.max_double_step_contraction, dist / prev_prev);
    prev_prev = prev_dist;
    prev_dist = dist;
    h = std::move(nh);
    res.iterations = it + 1;
    if (dist < tol) break;
  }
  const double norm = mean_mu(h);
  for (double& v : h) v /= norm;
  res.h = std::move(h);
  return res;
}

// ----------------------------------------------------------------------------
// Max-mean cycle over the support graph (Karp's dynamic program, run per
// strongly connected component).
// ----------------------------------------------------------------------------

namespace detail {

// SCCs by mutual reachability (transitive closure); the graphs here have at
// most a dozen vertices.
inline std::vector<std::vector<std::size_t>> sccs(const std::vector<std::vector<bool>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<bool>> reach = adj;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = true;
  std::vector<bool> used(n, false);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i]) continue;
    std::vector<std::size_t> comp{i};
    used[i] = true;
    for (std::size_t j = i + 1; j < n; ++j)
      if (!used[j] && reach[i][j] && reach[j][i]) {
        comp.push_back(j);
        used[j] = true;
      }
    out.push_back(std::move(comp));
  }
  return out;
}

}  // namespace detail

// Karp: max over cycles of (sum of f over the cycle) / length.
inline double max_mean_cycle(const matrix& kernel, const matrix& f) {
  const std::size_t n = kernel.rows();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) adj[x][y] = kernel(x, y) > 0;

  double best = kNegInf;
  for (const auto& comp : detail::sccs(adj)) {
    // single vertex without self-loop has no cycle
    if (comp.size() == 1 && !adj[comp[0]][comp[0]]) continue;
    const std::size_t k = comp.size();
    std::vector<std::size_t> id(n, 0);
    for (std::size_t i = 0; i < k; ++i) id[comp[i]] = i;
    // F[len][v]
    std::vector<std::vector<double>> F(k + 1, std::vector<double>(k, kNegInf));
    for (std::size_t v = 0; v < k; ++v) F[0][v] = 0.0;
    for (std::size_t len = 1; len <= k; ++len)
      for (std::size_t vi = 0; vi < k; ++vi) {
        const std::size_t v = comp[vi];
        for (std::size_t ui = 0; ui < k; ++ui) {
          const std::size_t u = comp[ui];
          if (!adj[u][v] || F[len - 1][ui] == kNegInf) continue;
          F[len][vi] = std::max(F[len][vi], F[len - 1][ui] + f(u, v));
        }
      }
    for (std::size_t vi = 0; vi < k; ++vi) {
      if (F[k][vi] == kNegInf) continue;
      double worst = kPosInf;
      for (std::size_t len = 0; len < k; ++len) {
        if (F[len][vi] == kNegInf) continue;
        worst = std::min(worst, (F[k][vi] - F[len][vi]) / static_cast<double>(k - len));
      }
      best = std::max(best, worst);
    }
  }
  return best;
}

inline double min_mean_cycle(const matrix& kernel, const matrix& f) {
  matrix neg = f;
  for (double& v : neg.data()) v = -v;
  return -max_mean_cycle(kernel, neg);
}

}  // namespace mclt::homog
