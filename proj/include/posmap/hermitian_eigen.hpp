#ifndef POSMAP_HERMITIAN_EIGEN_HPP
#define POSMAP_HERMITIAN_EIGEN_HPP

// Dense Hermitian eigensolver: complex Householder reduction to a Hermitian
// tridiagonal matrix, a diagonal phase similarity that makes the tridiagonal
// real, then implicit QL with Wilkinson-style shifts (tql2).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "posmap/matrix.hpp"

namespace posmap {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HermitianEigen {
  std::vector<double> values;  // nondecreasing
  ComplexMatrix vectors;       // column k belongs to values[k]; empty if not requested
};

namespace detail {

// Implicit QL on a real symmetric tridiagonal matrix (diag d, subdiag e with
// e[k] = T(k+1, k), e.back() ignored). Eigenvectors are accumulated into the
// columns of z (row-major, n x n) when z is non-empty.
inline void tql2(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z) {
  const std::size_t n = d.size();
  if (n == 0) return;
  e[n - 1] = 0.0;
  const bool vectors = !z.empty();
  const double eps = std::numeric_limits<double>::epsilon();
  const int max_iter = 60 + 30 * static_cast<int>(n);
  double f = 0.0;
  double tst1 = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n - 1) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_iter) throw ConvergenceError("tql2: QL iteration did not converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          if (vectors) {
            for (std::size_t k = 0; k < n; ++k) {
              double* zk = z.data() + k * n;
              h = zk[ii + 1];
              zk[ii + 1] = s * zk[ii] + c * h;
              zk[ii] = c * zk[ii] - s * h;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace detail

/// Eigen-decomposition of a Hermitian matrix. The input is symmetrized before
/// reduction; inputs farther than `tol.eq_atol` from Hermitian are rejected.
inline HermitianEigen hermitian_eigen(const ComplexMatrix& h, const Tolerance& tol = {},
                                      bool want_vectors = true) {
  require_hermitian(h, tol, "hermitian_eigen");
  const std::size_t n = h.rows();
  HermitianEigen out;
  if (n == 0) return out;

  std::vector<Complex> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = 0.5 * (h(i, j) + std::conj(h(j, i)));
  auto at = [&](std::size_t i, std::size_t j) -> Complex& { return a[i * n + j]; };

  std::vector<Complex> q;
  if (want_vectors) {
    q.assign(n * n, Complex{});
    for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;
  }

  std::vector<Complex> v(n), p(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    const std::size_t m = n - k - 1;  // length of the column below the diagonal
    double tail = 0.0;
    for (std::size_t i = 1; i < m; ++i) tail += std::norm(at(k + 1 + i, k));
    if (tail == 0.0) continue;
    const Complex x0 = at(k + 1, k);
    const double ax0 = std::abs(x0);
    const double sigma = std::sqrt(tail + ax0 * ax0);
    const Complex phase = ax0 == 0.0 ? Complex{1.0, 0.0} : x0 / ax0;
    const Complex alpha = -phase * sigma;

    for (std::size_t i = 0; i < m; ++i) v[i] = at(k + 1 + i, k);
    v[0] -= alpha;
    const double tau = 1.0 / (sigma * (sigma + ax0));  // 2 / |v|^2

    // p = tau * A22 v ; A22 <- A22 - v w^dagger - w v^dagger, w = p - (tau/2)(v^dagger p) v
    Complex vp{};
    for (std::size_t i = 0; i < m; ++i) {
      Complex acc{};
      const Complex* row = a.data() + (k + 1 + i) * n + (k + 1);
      for (std::size_t j = 0; j < m; ++j) acc += row[j] * v[j];
      p[i] = tau * acc;
      vp += std::conj(v[i]) * p[i];
    }
    const Complex kc = 0.5 * tau * vp.real();
    for (std::size_t i = 0; i < m; ++i) p[i] -= kc * v[i];
    for (std::size_t i = 0; i < m; ++i) {
      Complex* row = a.data() + (k + 1 + i) * n + (k + 1);
      for (std::size_t j = 0; j < m; ++j) row[j] -= v[i] * std::conj(p[j]) + p[i] * std::conj(v[j]);
    }
    at(k + 1, k) = alpha;
    at(k, k + 1) = std::conj(alpha);
    for (std::size_t i = 1; i < m; ++i) {
      at(k + 1 + i, k) = 0.0;
      at(k, k + 1 + i) = 0.0;
    }

    if (want_vectors) {
      // Q <- Q H on columns k+1..n-1
      for (std::size_t r = 0; r < n; ++r) {
        Complex* qrow = q.data() + r * n + (k + 1);
        Complex s{};
        for (std::size_t j = 0; j < m; ++j) s += qrow[j] * v[j];
        s *= tau;
        for (std::size_t j = 0; j < m; ++j) qrow[j] -= s * std::conj(v[j]);
      }
    }
  }

  std::vector<double> diag(n), sub(n, 0.0);
  std::vector<Complex> phases(n, Complex{1.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) diag[i] = at(i, i).real();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Complex ek = at(k + 1, k);
    const double mag = std::abs(ek);
    sub[k] = mag;
    phases[k + 1] = mag == 0.0 ? phases[k] : phases[k] * (ek / mag);
  }

  std::vector<double> z;
  if (want_vectors) {
    z.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
  }
  detail::tql2(diag, sub, z);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

  out.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.values[k] = diag[order[k]];

  if (want_vectors) {
    // eigenvectors = Q * diag(phases) * Z
    std::vector<Complex> qd(n * n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) qd[r * n + c] = q[r * n + c] * phases[c];
    out.vectors = ComplexMatrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
      const Complex* qrow = qd.data() + r * n;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t col = order[k];
        Complex acc{};
        for (std::size_t c = 0; c < n; ++c) acc += qrow[c] * z[c * n + col];
        out.vectors(r, k) = acc;
      }
    }
  }
  return out;
}

inline std::vector<double> hermitian_eigenvalues(const ComplexMatrix& h, const Tolerance& tol = {}) {
  return hermitian_eigen(h, tol, false).values;
}

inline double min_eigenvalue(const ComplexMatrix& h, const Tolerance& tol = {}) {
  const auto ev = hermitian_eigenvalues(h, tol);
  return ev.empty() ? 0.0 : ev.front();
}

}  // namespace posmap

#endif  // POSMAP_HERMITIAN_EIGEN_HPP
