#ifndef POSMAP_LINALG_HPP
#define POSMAP_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "posmap/hermitian_eigen.hpp"
#include "posmap/matrix.hpp"

namespace posmap {

struct BipartiteDims {
  std::size_t dA = 1;
  std::size_t dB = 1;

  std::size_t total() const noexcept { return dA * dB; }
  friend bool operator==(const BipartiteDims&, const BipartiteDims&) = default;
};

enum class Subsystem { A, B };

/// True iff the smallest eigenvalue of the Hermitian matrix is >= -psd_slack.
inline bool is_psd(const ComplexMatrix& h, const Tolerance& tol = {}) {
  return min_eigenvalue(h, tol) >= -tol.psd_slack;
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix; eigenvalues at or
/// below `cutoff` are treated as zero.
inline ComplexMatrix hermitian_pseudo_inverse(const ComplexMatrix& b, double cutoff,
                                              const Tolerance& tol = {}) {
  const auto eig = hermitian_eigen(b, tol);
  const std::size_t n = b.rows();
  ComplexMatrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lambda = eig.values[k];
    if (lambda <= cutoff) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const Complex vik = eig.vectors(i, k) / lambda;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * std::conj(eig.vectors(j, k));
    }
  }
  return out;
}

/// Assembles [[A, X], [X^dagger, B]].
inline ComplexMatrix assemble_2x2_blocks(const ComplexMatrix& a, const ComplexMatrix& x,
                                         const ComplexMatrix& b) {
  ComplexMatrix m(a.rows() + b.rows(), a.cols() + b.cols());
  m.set_block(0, 0, a);
  m.set_block(0, a.cols(), x);
  m.set_block(a.rows(), 0, dagger(x));
  m.set_block(a.rows(), a.cols(), b);
  return m;
}

/// Positivity of [[A, X], [X^dagger, B]] decided through the Schur complement
/// A - X B^{-1} X^dagger. For singular B the pseudo-inverse is used together
/// with the range condition (I - B B^+) X^dagger = 0.
inline bool schur_positivity(const ComplexMatrix& a, const ComplexMatrix& x, const ComplexMatrix& b,
                             const Tolerance& tol = {}) {
  if (!a.is_square() || !b.is_square() || x.rows() != a.rows() || x.cols() != b.rows()) {
    throw DimensionError("schur_positivity: A " + a.shape() + ", X " + x.shape() + ", B " +
                         b.shape());
  }
  require_hermitian(a, tol, "schur_positivity(A)");
  require_hermitian(b, tol, "schur_positivity(B)");
  const auto beig = hermitian_eigen(b, tol);
  if (!beig.values.empty() && beig.values.front() < -tol.psd_slack) {
    throw std::invalid_argument("schur_positivity: B has eigenvalue " +
                                std::to_string(beig.values.front()) + " below -psd_slack");
  }

  const std::size_t k = b.rows();
  const double cutoff = tol.psd_slack;
  ComplexMatrix b_plus(k, k);
  ComplexMatrix range_projector(k, k);
  for (std::size_t c = 0; c < k; ++c) {
    const double lambda = beig.values[c];
    if (lambda <= cutoff) continue;
    for (std::size_t i = 0; i < k; ++i) {
      const Complex vic = beig.vectors(i, c);
      for (std::size_t j = 0; j < k; ++j) {
        const Complex outer = vic * std::conj(beig.vectors(j, c));
        b_plus(i, j) += outer / lambda;
        range_projector(i, j) += outer;
      }
    }
  }

  const ComplexMatrix xd = dagger(x);
  const bool singular = k > 0 && beig.values.front() <= cutoff;
  if (singular) {
    const ComplexMatrix leak = xd - range_projector * xd;
    if (max_abs(leak) > tol.eq_atol) return false;
  }
  ComplexMatrix schur = a - x * b_plus * xd;
  // restore exact Hermiticity lost to rounding in the triple product
  schur = 0.5 * (schur + dagger(schur));
  return is_psd(schur, tol);
}

/// Transpose on one tensor factor in the computational product basis.
inline ComplexMatrix partial_transpose(const ComplexMatrix& m, BipartiteDims dims, Subsystem which) {
  const std::size_t n = dims.total();
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError("partial_transpose: matrix " + m.shape() + " does not match dims " +
                         std::to_string(dims.dA) + "x" + std::to_string(dims.dB));
  }
  ComplexMatrix out(n, n);
  for (std::size_t a = 0; a < dims.dA; ++a)
    for (std::size_t b = 0; b < dims.dB; ++b)
      for (std::size_t a2 = 0; a2 < dims.dA; ++a2)
        for (std::size_t b2 = 0; b2 < dims.dB; ++b2) {
          const Complex value = m(a * dims.dB + b, a2 * dims.dB + b2);
          if (which == Subsystem::B) {
            out(a * dims.dB + b2, a2 * dims.dB + b) = value;
          } else {
            out(a2 * dims.dB + b, a * dims.dB + b2) = value;
          }
        }
  return out;
}

/// Singular values (descending) by one-sided Jacobi orthogonalization of the
/// columns. Accurate for the smallest singular values, which is what rank
/// certificates need.
inline std::vector<double> singular_values(const ComplexMatrix& m) {
  ComplexMatrix a = m.rows() >= m.cols() ? m : dagger(m);
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  // column-major working copy
  std::vector<Complex> w(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) w[j * rows + i] = a(i, j);
  auto col = [&](std::size_t j) { return w.data() + j * rows; };

  const double eps = std::numeric_limits<double>::epsilon();
  double frob2 = 0.0;
  for (const auto& x : w) frob2 += std::norm(x);
  // Columns below this squared length are rounding noise and never rotated.
  const double negligible = eps * eps * frob2;
  constexpr int kMaxSweeps = 80;
  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        Complex* cp = col(p);
        Complex* cq = col(q);
        double alpha = 0.0, beta = 0.0;
        Complex gamma{};
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += std::norm(cp[i]);
          beta += std::norm(cq[i]);
          gamma += std::conj(cp[i]) * cq[i];
        }
        const double g = std::abs(gamma);
        if (alpha <= negligible || beta <= negligible) continue;
        if (g == 0.0 || g <= eps * std::sqrt(alpha * beta)) continue;
        converged = false;
        const Complex phase = std::conj(gamma) / g;  // rotates q so <p|q> is real
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const Complex xp = cp[i];
          const Complex xq = cq[i] * phase;
          cp[i] = c * xp - s * xq;
          cq[i] = s * xp + c * xq;
        }
      }
    }
  }
  if (!converged) throw ConvergenceError("singular_values: Jacobi sweeps did not converge");
  std::vector<double> sv(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += std::norm(col(j)[i]);
    sv[j] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

/// Number of singular values strictly above `threshold`.
inline std::size_t numerical_rank(const ComplexMatrix& m, double threshold) {
  const auto sv = singular_values(m);
  return static_cast<std::size_t>(
      std::count_if(sv.begin(), sv.end(), [&](double s) { return s > threshold; }));
}

/// Matrix whose columns are the given vectors (all of equal length).
inline ComplexMatrix stack_columns(const std::vector<ComplexVector>& vectors) {
  if (vectors.empty()) return {};
  const std::size_t n = vectors.front().size();
  ComplexMatrix m(n, vectors.size());
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].size() != n) throw DimensionError("stack_columns: ragged vectors");
    for (std::size_t i = 0; i < n; ++i) m(i, j) = vectors[j][i];
  }
  return m;
}

}  // namespace posmap

#endif  // POSMAP_LINALG_HPP
