#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Small shared pieces: a dense matrix, log-space accumulation, tolerance
// constants, and the error taxonomy used across the library.

namespace mclt {

using cplx = std::complex<double>;

inline constexpr double kPi           = 3.14159265358979323846;
inline constexpr double kRowSumTol    = 1e-12;  // stochasticity tolerance
inline constexpr double kRowDriftMax  = 1e-9;   // renormalize below this, reject above
inline constexpr double kLatticeTol   = 1e-9;   // residue constancy check
inline constexpr double kCorangeTol   = 1e-8;   // zero-test for d_n(xi)
inline constexpr double kNegInf       = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf       = std::numeric_limits<double>::infinity();

// ----------------------------------------------------------------------------
// Errors.  Every named failure mode from the operation contracts gets its own
// type so callers (and tests) can catch precisely.
// ----------------------------------------------------------------------------

struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

#define MCLT_ERROR(NAME)                                        \
  struct NAME : error {                                         \
    explicit NAME(const std::string& what) : error(#NAME ": " + what) {} \
  }

MCLT_ERROR(NonStochasticRow);
MCLT_ERROR(EmptyStateSet);
MCLT_ERROR(BadChainSpec);
MCLT_ERROR(NotTwoStepElliptic);
MCLT_ERROR(ZeroBridgeMass);
MCLT_ERROR(TooManyHexagons);
MCLT_ERROR(NotIntegerValued);
MCLT_ERROR(InconclusiveAtHorizon);
MCLT_ERROR(NotSummable);
MCLT_ERROR(GridTooLarge);
MCLT_ERROR(DegenerateVariance);
MCLT_ERROR(OffLattice);
MCLT_ERROR(NullConditioningEvent);
MCLT_ERROR(IntervalTooShort);
MCLT_ERROR(OutOfDomain);
MCLT_ERROR(NotReachable);
MCLT_ERROR(NonUniformlyElliptic);
MCLT_ERROR(InconsistentPhases);
MCLT_ERROR(NotStationary);

#undef MCLT_ERROR

// ----------------------------------------------------------------------------
// Dense row-major matrix.  State spaces here have at most a dozen points, so
// a plain vector<double> wins over any linear-algebra dependency.
// ----------------------------------------------------------------------------

template <class T>
class basic_matrix {
 public:
  basic_matrix() = default;
  basic_matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  friend basic_matrix operator*(const basic_matrix& a, const basic_matrix& b) {
    basic_matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const T aik = a(i, k);
        if (aik == T{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

using matrix  = basic_matrix<double>;
using cmatrix = basic_matrix<cplx>;

// Row vector times matrix, y = x A.
inline std::vector<double> vec_mat(const std::vector<double>& x, const matrix& a) {
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (x[i] == 0.0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += x[i] * a(i, j);
  }
  return y;
}

// Matrix times column vector, y = A x.
template <class T>
inline std::vector<T> mat_vec(const basic_matrix<T>& a, const std::vector<T>& x) {
  std::vector<T> y(a.rows(), T{});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T acc{};
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

// ----------------------------------------------------------------------------
// Log-space arithmetic (for tail masses far below DBL_MIN).
// ----------------------------------------------------------------------------

inline double log_add(double la, double lb) {
  if (la == kNegInf) return lb;
  if (lb == kNegInf) return la;
  if (la < lb) std::swap(la, lb);
  return la + std::log1p(std::exp(lb - la));
}

inline double log_sum(const std::vector<double>& ls) {
  double m = kNegInf;
  for (double v : ls) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : ls) s += std::exp(v - m);
  return m + std::log(s);
}

// ----------------------------------------------------------------------------
// Real gcd with tolerance: the generator of the smallest tZ containing a set
// of reals, or 0 when the set is incommensurable (group dense in R).
// ----------------------------------------------------------------------------

inline double real_gcd(double a, double b, double tol = kLatticeTol) {
  a = std::fabs(a);
  b = std::fabs(b);
  if (a < b) std::swap(a, b);
  // Euclid; if the remainders shrink below tol without reaching an exact
  // divisor the pair is treated as incommensurable.
  for (int iter = 0; iter < 200 && b > tol; ++iter) {
    double r = std::fmod(a, b);
    if (r > b - tol) r = 0.0;          // fmod landed just under b
    a = b;
    b = (r < tol) ? 0.0 : r;
  }
  return (b > tol) ? 0.0 : a;          // b>tol after 200 rounds: call it dense
}

inline double real_gcd(const std::vector<double>& xs, double tol = kLatticeTol) {
  double g = 0.0;
  for (double x : xs) {
    if (std::fabs(x) < tol) continue;
    g = (g == 0.0) ? std::fabs(x) : real_gcd(g, x, tol);
    if (g == 0.0) return 0.0;  // incommensurable pair found
  }
  return g;
}

inline double sqr(double x) { return x * x; }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace mclt
