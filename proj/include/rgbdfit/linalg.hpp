#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "rgbdfit/error.hpp"

namespace rgbdfit {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
using Mat = std::array<std::array<double, N>, N>;

using Vec3 = Vec<3>;
using Vec4 = Vec<4>;
using Mat3 = Mat<3>;
using Mat4 = Mat<4>;

template <std::size_t N>
double dot(const Vec<N>& a, const Vec<N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t N>
double norm(const Vec<N>& v) {
  return std::sqrt(dot(v, v));
}

template <std::size_t N>
Vec<N> mul(const Mat<N>& m, const Vec<N>& v) {
  Vec<N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) out[i] += m[i][j] * v[j];
  }
  return out;
}

template <std::size_t N>
double frobenius(const Mat<N>& m) {
  double s = 0.0;
  for (const auto& row : m) {
    for (double v : row) s += v * v;
  }
  return std::sqrt(s);
}

template <std::size_t N>
double trace(const Mat<N>& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += m[i][i];
  return s;
}

template <std::size_t N>
bool all_finite(const Mat<N>& m) {
  for (const auto& row : m) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template <std::size_t N>
struct EigenDecomposition {
  Vec<N> values;   // ascending
  Mat<N> vectors;  // column j pairs with values[j]
  int sweeps = 0;
};

/// Full eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Stops once the off-diagonal Frobenius norm drops to
/// 1e-13 ||S||_F; throws NonConvergence after max_sweeps.
template <std::size_t N>
EigenDecomposition<N> jacobi_eigen(Mat<N> a, int max_sweeps = 50) {
  if (!all_finite(a)) throw DegenerateFit("non-finite entry in symmetric matrix");
  EigenDecomposition<N> out{};
  auto& v = out.vectors;
  for (std::size_t i = 0; i < N; ++i) v[i][i] = 1.0;

  const double scale = frobenius(a);
  const double tol = 1e-13 * scale;
  auto off_norm = [&a] {
    double s = 0.0;
    for (std::size_t p = 0; p < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) s += 2.0 * a[p][q] * a[p][q];
    }
    return std::sqrt(s);
  };

  int sweep = 0;
  while (off_norm() > tol) {
    if (sweep == max_sweeps) {
      throw NonConvergence("Jacobi eigen-solver did not converge in " + std::to_string(max_sweeps) +
                           " sweeps");
    }
    ++sweep;
    for (std::size_t p = 0; p < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        // Rotation angle that annihilates a[p][q] (Rutishauser's form).
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < N; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        a[p][q] = a[q][p] = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  out.sweeps = sweep;

  std::array<std::size_t, N> order{};
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&a](std::size_t i, std::size_t j) { return a[i][i] < a[j][j]; });
  Mat<N> sorted{};
  for (std::size_t j = 0; j < N; ++j) {
    out.values[j] = a[order[j]][order[j]];
    for (std::size_t k = 0; k < N; ++k) sorted[k][j] = v[k][order[j]];
  }
  v = sorted;
  return out;
}

template <std::size_t N>
struct EigenPair {
  Vec<N> vector;  // unit norm
  double value = 0.0;
  double gap = 0.0;  // distance to the next eigenvalue
};

template <std::size_t N>
EigenPair<N> smallest_eigenvector(const Mat<N>& s) {
  const auto eig = jacobi_eigen(s);
  EigenPair<N> out;
  for (std::size_t k = 0; k < N; ++k) out.vector[k] = eig.vectors[k][0];
  const double n = norm(out.vector);
  for (double& x : out.vector) x /= n;
  // Rayleigh quotient in extended precision: second-order accurate in the
  // eigenvector error, so near-null eigenvalues resolve below double epsilon.
  long double q = 0.0L;
  for (std::size_t i = 0; i < N; ++i) {
    long double row = 0.0L;
    for (std::size_t j = 0; j < N; ++j) row += static_cast<long double>(s[i][j]) * out.vector[j];
    q += row * out.vector[i];
  }
  long double vv = 0.0L;
  for (double x : out.vector) vv += static_cast<long double>(x) * x;
  out.value = static_cast<double>(q / vv);
  out.gap = N > 1 ? eig.values[1] - eig.values[0] : 0.0;
  return out;
}

/// Cholesky factor of a 3x3 symmetric positive definite matrix. Pivots below
/// 1e-12 trace(S) mark the matrix rank deficient.
class Cholesky3 {
 public:
  static Cholesky3 factor(const Mat3& s) {
    Cholesky3 c;
    if (!all_finite(s)) return c;
    const double tr = trace(s);
    const double floor = 1e-12 * std::abs(tr);
    auto& l = c.l_;
    for (std::size_t j = 0; j < 3; ++j) {
      double d = s[j][j];
      for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
      if (!(d > floor)) return c;
      l[j][j] = std::sqrt(d);
      c.inv_diag_[j] = 1.0 / l[j][j];
      for (std::size_t i = j + 1; i < 3; ++i) {
        double v = s[i][j];
        for (std::size_t k = 0; k < j; ++k) v -= l[i][k] * l[j][k];
        l[i][j] = v * c.inv_diag_[j];
      }
    }
    c.ok_ = true;
    return c;
  }

  bool ok() const { return ok_; }
  const Mat3& lower() const { return l_; }

  Vec3 solve(const Vec3& rhs) const {
    if (!ok_) throw DegenerateFit("rank-deficient 3x3 system");
    Vec3 y{};
    for (std::size_t i = 0; i < 3; ++i) {
      double v = rhs[i];
      for (std::size_t k = 0; k < i; ++k) v -= l_[i][k] * y[k];
      y[i] = v * inv_diag_[i];
    }
    Vec3 x{};
    for (std::size_t ii = 3; ii-- > 0;) {
      double v = y[ii];
      for (std::size_t k = ii + 1; k < 3; ++k) v -= l_[k][ii] * x[k];
      x[ii] = v * inv_diag_[ii];
    }
    return x;
  }

 private:
  Mat3 l_{};
  Vec3 inv_diag_{};
  bool ok_ = false;
};

inline Vec3 solve_spd3(const Mat3& s, const Vec3& rhs) { return Cholesky3::factor(s).solve(rhs); }

/// Minimum-norm least-squares solution via the eigen-decomposition, treating
/// eigenvalues below 1e-12 trace(S) as zero. Fallback for rank-deficient
/// normal equations.
inline Vec3 pseudo_solve3(const Mat3& s, const Vec3& rhs) {
  const auto eig = jacobi_eigen(s);
  const double cut = 1e-12 * std::abs(trace(s));
  Vec3 x{};
  for (std::size_t j = 0; j < 3; ++j) {
    if (!(eig.values[j] > cut)) continue;
    double proj = 0.0;
    for (std::size_t k = 0; k < 3; ++k) proj += eig.vectors[k][j] * rhs[k];
    for (std::size_t k = 0; k < 3; ++k) x[k] += eig.vectors[k][j] * proj / eig.values[j];
  }
  return x;
}

}  // namespace rgbdfit
