#pragma once

#include <map>
#include <vector>

#include "mclt/chain.hpp"

// Hexagons at position n are pairs of admissible length-3 paths sharing their
// endpoints; their balance Gamma drives the structure constants
//   u_n = E(Gamma^2)^(1/2),  d_n(xi) = E(|e^{i xi Gamma} - 1|^2)^(1/2)
// under the hexagon measure.  Sums are exact; the six-coordinate enumeration
// is organized through the conditional independence of the two bridge
// coordinates, which costs |S|^5 instead of |S|^6 per position.

namespace mclt {

struct Hexagon {
  int position = 0;              // n, with 3 <= n <= N
  std::size_t x_nm2 = 0;         // shared left endpoint, time n-2
  std::size_t x_nm1 = 0, y_nm1 = 0;
  std::size_t x_n = 0, y_n = 0;
  std::size_t y_np1 = 0;         // shared right endpoint, time n+1
};

struct WeightedHexagon {
  Hexagon hex;
  double weight = 0.0;
};

// Balance: top path (x_{n-2}, x_{n-1}, x_n, y_{n+1}) minus bottom path
// (x_{n-2}, y_{n-1}, y_n, y_{n+1}).
inline double balance(const Functional& f, const Hexagon& h) {
  const int n = h.position;
  const matrix& f2 = f.value(n - 2);
  const matrix& f1 = f.value(n - 1);
  const matrix& f0 = f.value(n);
  return (f2(h.x_nm2, h.x_nm1) + f1(h.x_nm1, h.x_n) + f0(h.x_n, h.y_np1)) -
         (f2(h.x_nm2, h.y_nm1) + f1(h.y_nm1, h.y_n) + f0(h.y_n, h.y_np1));
}

inline std::size_t hexagon_count(const Chain& c, int n) {
  return c.n_states(n - 2) * c.n_states(n - 1) * c.n_states(n - 1) * c.n_states(n) *
         c.n_states(n) * c.n_states(n + 1);
}

// Full weighted enumeration of Hex(N, n).  Weights are
//   law(X_{n-2}, X_{n-1}) * law(X_n, X_{n+1}) * bridge(x_n | x_{n-1}, y_{n+1})
//   * bridge(y_{n-1} | x_{n-2}, y_n),
// zero exactly off the admissible set; they sum to 1.
inline std::vector<WeightedHexagon> hexagon_measure(const Chain& chain, const MarginalSet& m,
                                                    int n, std::size_t guard = 10'000'000) {
  if (n < 3 || n > chain.horizon) throw error("hexagon position out of range");
  if (hexagon_count(chain, n) > guard)
    throw TooManyHexagons("position " + std::to_string(n) + ": " +
                          std::to_string(hexagon_count(chain, n)) + " hexagons");
  const matrix law_left = pair_law(chain, m, n - 2);   // (x_{n-2}, x_{n-1})
  const matrix law_right = pair_law(chain, m, n);      // (y_n, y_{n+1})
  const auto br_mid = bridge_table(chain, m, n - 1);   // x_n | (x_{n-1} -> y_{n+1})
  const auto br_low = bridge_table(chain, m, n - 2);   // y_{n-1} | (x_{n-2} -> y_n)

  std::vector<WeightedHexagon> out;
  for (std::size_t a = 0; a < law_left.rows(); ++a)
    for (std::size_t b = 0; b < law_left.cols(); ++b) {
      const double w_ab = law_left(a, b);
      if (w_ab == 0.0) continue;
      for (std::size_t yn = 0; yn < law_right.rows(); ++yn)
        for (std::size_t yp = 0; yp < law_right.cols(); ++yp) {
          const double w_cd = law_right(yn, yp);
          if (w_cd == 0.0) continue;
          const auto& bm = br_mid[b][yp];
          const auto& bl = br_low[a][yn];
          for (std::size_t xn = 0; xn < bm.size(); ++xn) {
            if (bm[xn] == 0.0) continue;
            for (std::size_t ym = 0; ym < bl.size(); ++ym) {
              if (bl[ym] == 0.0) continue;
              WeightedHexagon wh;
              wh.hex = Hexagon{n, a, b, ym, xn, yn, yp};
              wh.weight = w_ab * w_cd * bm[xn] * bl[ym];
              out.push_back(wh);
            }
          }
        }
    }
  return out;
}

// ----------------------------------------------------------------------------
// Structure constants.
// ----------------------------------------------------------------------------

struct HexagonStats {
  std::vector<double> xis;                  // frequency grid
  std::vector<double> u;                    // u_n, n = 3..N (index n-3)
  std::vector<std::vector<double>> d;       // d[i][n-3] = d_n(xis[i])
  double UN = 0.0;                          // sum u_n^2
  std::vector<double> DN;                   // DN[i] = sum_n d_n(xis[i])^2

  int first_position() const { return 3; }
  double u_at(int n) const { return u[static_cast<std::size_t>(n - 3)]; }
  double d_at(std::size_t xi_index, int n) const {
    return d[xi_index][static_cast<std::size_t>(n - 3)];
  }

  // Prefix aggregate sum_{n=3}^{m} u_n^2.
  double UN_prefix(int mpos) const {
    double s = 0.0;
    for (int n = 3; n <= mpos; ++n) s += sqr(u_at(n));
    return s;
  }
  std::vector<double> DN_prefix(std::size_t xi_index, const std::vector<int>& ms) const {
    std::vector<double> out;
    for (int mpos : ms) {
      double s = 0.0;
      for (int n = 3; n <= mpos; ++n) s += sqr(d_at(xi_index, n));
      out.push_back(s);
    }
    return out;
  }
};

// Per-position u_n and d_n over a frequency grid, by exact summation.
inline void position_structure(const Chain& chain, const MarginalSet& m, const Functional& f,
                               int n, const std::vector<double>& xis, double& u_out,
                               std::vector<double>& d_out, std::size_t guard = 10'000'000) {
  if (hexagon_count(chain, n) > guard)
    throw TooManyHexagons("position " + std::to_string(n));
  const matrix law_left = pair_law(chain, m, n - 2);
  const matrix law_right = pair_law(chain, m, n);
  const auto br_mid = bridge_table(chain, m, n - 1);
  const auto br_low = bridge_table(chain, m, n - 2);
  const matrix& f2 = f.value(n - 2);
  const matrix& f1 = f.value(n - 1);
  const matrix& f0 = f.value(n);

  double e_gamma2 = 0.0;
  std::vector<cplx> e_exp(xis.size(), cplx(0.0, 0.0));
  std::vector<cplx> ea(xis.size()), eb(xis.size());

  for (std::size_t a = 0; a < law_left.rows(); ++a)
    for (std::size_t b = 0; b < law_left.cols(); ++b) {
      const double w_ab = law_left(a, b);
      if (w_ab == 0.0) continue;
      for (std::size_t yn = 0; yn < law_right.rows(); ++yn)
        for (std::size_t yp = 0; yp < law_right.cols(); ++yp) {
          const double w = w_ab * law_right(yn, yp);
          if (w == 0.0) continue;
          const auto& bm = br_mid[b][yp];
          const auto& bl = br_low[a][yn];

          // top-path sums over x_n, bottom-path sums over y_{n-1}
          double ma = 0.0, sa = 0.0, mb = 0.0, sb = 0.0;
          std::fill(ea.begin(), ea.end(), cplx(0, 0));
          std::fill(eb.begin(), eb.end(), cplx(0, 0));
          for (std::size_t xn = 0; xn < bm.size(); ++xn) {
            const double p = bm[xn];
            if (p == 0.0) continue;
            const double aval = f2(a, b) + f1(b, xn) + f0(xn, yp);
            ma += p * aval;
            sa += p * aval * aval;
            for (std::size_t i = 0; i < xis.size(); ++i)
              ea[i] += p * std::polar(1.0, xis[i] * aval);
          }
          for (std::size_t ym = 0; ym < bl.size(); ++ym) {
            const double p = bl[ym];
            if (p == 0.0) continue;
            const double bval = f2(a, ym) + f1(ym, yn) + f0(yn, yp);
            mb += p * bval;
            sb += p * bval * bval;
            for (std::size_t i = 0; i < xis.size(); ++i)
              eb[i] += p * std::polar(1.0, xis[i] * bval);
          }
          e_gamma2 += w * (sa - 2.0 * ma * mb + sb);
          for (std::size_t i = 0; i < xis.size(); ++i) e_exp[i] += w * ea[i] * std::conj(eb[i]);
        }
    }

  u_out = std::sqrt(std::max(e_gamma2, 0.0));
  d_out.resize(xis.size());
  for (std::size_t i = 0; i < xis.size(); ++i) {
    // |e^{i xi Gamma} - 1|^2 = 2 - 2 Re e^{i xi Gamma}
    d_out[i] = std::sqrt(std::max(2.0 - 2.0 * e_exp[i].real(), 0.0));
  }
}

inline HexagonStats structure_constants(const Chain& chain, const MarginalSet& m,
                                        const Functional& f, std::vector<double> xis,
                                        std::size_t guard = 10'000'000) {
  check_functional_shape(chain, f);
  HexagonStats st;
  st.xis = std::move(xis);
  st.DN.assign(st.xis.size(), 0.0);
  st.d.assign(st.xis.size(), {});
  if (chain.horizon < 3) return st;
  for (int n = 3; n <= chain.horizon; ++n) {
    double u = 0.0;
    std::vector<double> d;
    position_structure(chain, m, f, n, st.xis, u, d, guard);
    st.u.push_back(u);
    st.UN += u * u;
    for (std::size_t i = 0; i < st.xis.size(); ++i) {
      st.d[i].push_back(d[i]);
      st.DN[i] += d[i] * d[i];
    }
  }
  return st;
}

// Default frequency grid: 64 equispaced points on (0, 2 pi / delta_min], with
// the candidate lattice frequencies 2 pi / (t/j) merged in when a lattice step
// is declared.  delta_min is the smallest nonzero value increment of f.
inline std::vector<double> default_xi_grid(const Functional& f, std::size_t points = 64) {
  double delta_min = kPosInf;
  for (const auto& mtx : f.values) {
    const auto& v = mtx.data();
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        const double d = std::fabs(v[i] - v[j]);
        if (d > kLatticeTol) delta_min = std::min(delta_min, d);
      }
  }
  if (delta_min == kPosInf) delta_min = std::max(f.bound, 1.0);  // constant f
  const double xi_max = 2.0 * kPi / delta_min;
  std::vector<double> grid;
  for (std::size_t i = 1; i <= points; ++i)
    grid.push_back(xi_max * static_cast<double>(i) / static_cast<double>(points));
  if (f.lattice) {
    for (int j = 1; 2.0 * kPi * j / *f.lattice <= xi_max * (1.0 + 1e-12); ++j)
      grid.push_back(2.0 * kPi * j / *f.lattice);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
             grid.end());
  return grid;
}

}  // namespace mclt
