#ifndef POSMAP_TESTS_SUPPORT_HPP
#define POSMAP_TESTS_SUPPORT_HPP

// Test-only helpers. Eigen is the independent oracle: anything checked
// against it is computed without the library's own eigensolver or SVD.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

#include "posmap/blockcert.hpp"
#include "posmap/random.hpp"

namespace posmap::testing {

using EMat = Eigen::MatrixXcd;

inline EMat to_eigen(const ComplexMatrix& m) {
  EMat e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline ComplexMatrix from_eigen(const EMat& e) {
  ComplexMatrix m(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

inline double oracle_min_eigenvalue(const ComplexMatrix& h) {
  const EMat e = to_eigen(h);
  Eigen::SelfAdjointEigenSolver<EMat> es(0.5 * (e + e.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline Eigen::VectorXd oracle_eigenvalues(const ComplexMatrix& h) {
  const EMat e = to_eigen(h);
  Eigen::SelfAdjointEigenSolver<EMat> es(0.5 * (e + e.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline Eigen::VectorXd oracle_singular_values(const ComplexMatrix& m) {
  Eigen::JacobiSVD<EMat> svd(to_eigen(m));
  return svd.singularValues();
}

/// Partial transpose on the second factor, written independently of the library.
inline EMat oracle_partial_transpose_b(const EMat& m, Eigen::Index da, Eigen::Index db) {
  EMat out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < da; ++i)
    for (Eigen::Index j = 0; j < da; ++j) out.block(i * db, j * db, db, db) = m.block(i * db, j * db, db, db).transpose();
  return out;
}

inline std::vector<double> random_weights(std::size_t n, Rng& rng, bool allow_zero) {
  std::vector<double> a(n);
  double s = 0.0;
  for (auto& x : a) {
    x = rng.uniform(0.05, 1.0);
    if (allow_zero && rng.uniform() < 0.15) x = 0.0;
    s += x;
  }
  if (s == 0.0) {
    a[rng.index(n)] = 1.0;
    return a;
  }
  for (auto& x : a) x /= s;
  return a;
}

inline UpperTriangular<Complex> random_phases(std::size_t n, Rng& rng, bool unit) {
  UpperTriangular<Complex> z(n);
  for (auto& v : z.values()) v = unit ? rng.unit_phase() : rng.uniform(0.0, 1.0) * rng.unit_phase();
  return z;
}

/// M_ij = sqrt(a_i a_j) V_i V_j^+ with Haar unitaries V_i and M_ii = a_i 1:
/// every product relation holds with equality.
inline BlockSpec unitary_recipe(std::size_t n, std::size_t k, Rng& rng) {
  BlockSpec s;
  s.n_blocks = n;
  s.block_size = k;
  s.alphas = random_weights(n, rng, true);
  s.z = random_phases(n, rng, rng.uniform() < 0.5);
  std::vector<ComplexMatrix> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(haar_unitary(k, rng));
  s.blocks = UpperTriangular<ComplexMatrix>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j)
      s.blocks.at(i, j) = std::sqrt(s.alphas[i] * s.alphas[j]) * (v[i] * dagger(v[j]));
    s.diag_blocks.push_back(s.alphas[i] * ComplexMatrix::identity(k));
  }
  return s;
}

/// Rank-one recipe: unit vectors psi_i, M_ij = sqrt(a_i a_j) |psi_i><psi_j|,
/// M_ii = a_i |psi_i><psi_i| (cond2 strict off the psi_i direction).
inline BlockSpec rank_one_recipe(std::size_t n, std::size_t k, Rng& rng) {
  BlockSpec s;
  s.n_blocks = n;
  s.block_size = k;
  s.alphas = random_weights(n, rng, false);
  s.z = random_phases(n, rng, rng.uniform() < 0.5);
  std::vector<ComplexVector> psi;
  for (std::size_t i = 0; i < n; ++i) psi.push_back(random_unit_vector(k, rng));
  s.blocks = UpperTriangular<ComplexMatrix>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j)
      s.blocks.at(i, j) = std::sqrt(s.alphas[i] * s.alphas[j]) * ComplexMatrix::outer(psi[i], psi[j]);
    s.diag_blocks.push_back(s.alphas[i] * ComplexMatrix::outer(psi[i], psi[i]));
  }
  return s;
}

}  // namespace posmap::testing

#endif  // POSMAP_TESTS_SUPPORT_HPP
