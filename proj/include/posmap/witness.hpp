#ifndef POSMAP_WITNESS_HPP
#define POSMAP_WITNESS_HPP

// Entanglement-witness analysis for the maps in maps.hpp: product-vector
// expectations, the PPT state that the new family detects, the spanning set
// of zero-expectation product vectors, and the partial-transpose covariance
// used for nd-optimality.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "posmap/linalg.hpp"
#include "posmap/maps.hpp"
#include "posmap/random.hpp"

namespace posmap {

/// <psi (x) phi| W |psi (x) phi>
inline double expectation_product(const Witness& w, std::span<const Complex> psi,
                                  std::span<const Complex> phi) {
  if (psi.size() != w.dims.dA || phi.size() != w.dims.dB) {
    throw DimensionError("expectation_product: vector lengths " + std::to_string(psi.size()) + "," +
                         std::to_string(phi.size()) + " vs dims " + std::to_string(w.dims.dA) + "," +
                         std::to_string(w.dims.dB));
  }
  const ComplexVector v = kron(psi, phi);
  const Complex value = sandwich(v, w.matrix, v);
  if (std::abs(value.imag()) > 1e-10) {
    throw NotHermitianError("expectation_product: imaginary part " + std::to_string(value.imag()));
  }
  return value.real();
}

/// Minimum of <psi (x) phi|W|psi (x) phi> over unit product vectors, by
/// alternating exact minimization over each factor from random starts.
/// Works on the operator directly and is independent of any map.
inline double min_product_expectation(const Witness& w, std::size_t trials, std::uint64_t seed,
                                      std::size_t max_alternations = 200) {
  const std::size_t da = w.dims.dA, db = w.dims.dB;
  Tolerance loose;
  loose.eq_atol = 1e-8;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    ComplexVector phi = random_unit_vector(db, derive_seed(seed, t));
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_alternations; ++it) {
      ComplexMatrix reduced_a(da, da);  // <phi| W_ij |phi>
      for (std::size_t i = 0; i < da; ++i)
        for (std::size_t j = 0; j < da; ++j) {
          Complex acc{};
          for (std::size_t a = 0; a < db; ++a) {
            if (phi[a] == Complex{}) continue;
            Complex row{};
            for (std::size_t b = 0; b < db; ++b) row += w.matrix(i * db + a, j * db + b) * phi[b];
            acc += std::conj(phi[a]) * row;
          }
          reduced_a(i, j) = acc;
        }
      const auto ea = hermitian_eigen(reduced_a, loose);
      const ComplexVector psi = ea.vectors.column(0);
      ComplexMatrix reduced_b(db, db);  // sum_ij conj(psi_i) psi_j W_ij
      for (std::size_t i = 0; i < da; ++i)
        for (std::size_t j = 0; j < da; ++j) {
          const Complex c = std::conj(psi[i]) * psi[j];
          if (c == Complex{}) continue;
          for (std::size_t a = 0; a < db; ++a)
            for (std::size_t b = 0; b < db; ++b) reduced_b(a, b) += c * w.matrix(i * db + a, j * db + b);
        }
      const auto eb = hermitian_eigen(reduced_b, loose);
      phi = eb.vectors.column(0);
      const double value = eb.values.front();
      best = std::min(best, value);
      if (prev - value < 1e-12) break;
      prev = value;
    }
  }
  return best;
}

enum class BlockCase { Diagonal, Stripe, Residual, Zero };

inline const char* to_string(BlockCase c) {
  switch (c) {
    case BlockCase::Diagonal: return "diagonal";
    case BlockCase::Stripe: return "stripe";
    case BlockCase::Residual: return "residual";
    case BlockCase::Zero: return "zero";
  }
  return "unknown";
}

/// PPT state rho = c * sum_ij e_ij (x) rho_ij on C^d (x) C^d, d = 2KN.
struct PptDetector {
  std::size_t n = 0;
  std::size_t k = 0;
  ComplexMatrix rho;
  std::vector<BlockCase> block_table;  // d x d, row-major
  double normalization = 0.0;          // c
  double unnormalized_trace = 0.0;

  std::size_t dimension() const noexcept { return 2 * k * n; }
  BlockCase block_case(std::size_t i, std::size_t j) const { return block_table.at(i * dimension() + j); }
};

/// Case rule for block (i, j) of the detector, with i = (p, r), j = (q, s) in
/// (block, position-in-block) coordinates. |i - j| is a positive multiple of
/// 2K exactly when p != q and r == s.
inline BlockCase detector_block_case(std::size_t i, std::size_t j, std::size_t k) {
  const std::size_t bs = 2 * k;
  if (i == j) return BlockCase::Diagonal;
  const std::size_t p = i / bs, r = i % bs, q = j / bs, s = j % bs;
  if (p == q) return BlockCase::Zero;
  if (r == s) return BlockCase::Stripe;
  return BlockCase::Residual;
}

inline double expected_detection_value(std::size_t n, std::size_t k) {
  const double tk = 2.0 * static_cast<double>(k);
  const double nn = static_cast<double>(n);
  return -1.0 / ((tk + 1.0) * tk * tk * tk * nn * (nn - 1.0));
}

/// Diagonal-plus-stripe and residual contributions to Tr(W rho) before the
/// 1/(2K+1) normalization.
inline double expected_stripe_sum(std::size_t n, std::size_t k) {
  const double tk = 2.0 * static_cast<double>(k);
  const double nn = static_cast<double>(n);
  return 2.0 * (static_cast<double>(k) - 1.0) / (tk * tk * tk * nn * (nn - 1.0));
}

inline double expected_residual_sum(std::size_t n, std::size_t k) {
  const double tk = 2.0 * static_cast<double>(k);
  const double nn = static_cast<double>(n);
  return -(tk - 1.0) / (tk * tk * tk * nn * (nn - 1.0));
}

inline PptDetector build_ppt_detector(std::size_t n, std::size_t k, const UpperTriangular<Complex>& z,
                                      const Witness& witness) {
  if (n < 2 || k < 1) throw std::invalid_argument("build_ppt_detector: need N >= 2, K >= 1");
  if (witness.provenance && witness.provenance->family != MapFamily::NewFamily) {
    throw std::invalid_argument(std::string("build_ppt_detector: witness comes from the ") +
                                to_string(witness.provenance->family) + " family, not the new family");
  }
  if (witness.provenance && (witness.provenance->n != n || witness.provenance->k != k)) {
    throw std::invalid_argument("build_ppt_detector: (N, K) differ from the witness provenance");
  }
  if (z.n() != n) throw std::invalid_argument("build_ppt_detector: phase table must have N rows");
  const std::size_t bs = 2 * k;
  const std::size_t d = bs * n;
  if (witness.dims.dA != d || witness.dims.dB != d) {
    throw DimensionError("build_ppt_detector: witness dims do not match d = 2KN = " + std::to_string(d));
  }

  auto phase = [&](std::size_t p, std::size_t q) -> Complex {
    return p < q ? z.at(p, q) : std::conj(z.at(q, p));
  };
  const double dd = static_cast<double>(d);
  const double nn = static_cast<double>(n);
  const double tk = static_cast<double>(bs);
  const double diag_weight = tk * (nn - 1.0) - 1.0;
  const double residual_scale = 1.0 / (tk * tk * nn * (nn - 1.0));

  PptDetector det;
  det.n = n;
  det.k = k;
  det.block_table.resize(d * d);
  det.rho = ComplexMatrix(d * d, d * d);
  double tr = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const BlockCase c = detector_block_case(i, j, k);
      det.block_table[i * d + j] = c;
      switch (c) {
        case BlockCase::Diagonal: {
          ComplexMatrix b = (1.0 / dd) * ComplexMatrix::identity(d) - diag_weight * witness.block(i, i);
          tr += trace(b).real();
          det.rho.set_block(i * d, j * d, b);
          break;
        }
        case BlockCase::Stripe:
          det.rho.set_block(i * d, j * d, -witness.block(i, j));
          break;
        case BlockCase::Residual:
          det.rho(i * d + i, j * d + j) = residual_scale * phase(i / bs, j / bs);
          break;
        case BlockCase::Zero:
          break;
      }
    }
  }
  det.unnormalized_trace = tr;
  det.normalization = 1.0 / (tk + 1.0);
  if (std::abs(tr - (tk + 1.0)) > 1e-8) {
    throw std::logic_error("build_ppt_detector: block trace " + std::to_string(tr) +
                           " differs from 2K+1; witness blocks are not the 1/d-normalized Choi blocks");
  }
  det.rho *= det.normalization;
  return det;
}

struct DetectionResult {
  double value = 0.0;  // Tr(W rho)
  double diagonal_sum = 0.0;
  double stripe_sum = 0.0;
  double near_diagonal_sum = 0.0;
  double residual_sum = 0.0;
  double expected = 0.0;  // closed form
};

inline DetectionResult detection_value(const Witness& w, const PptDetector& det) {
  const std::size_t d = det.dimension();
  if (w.matrix.rows() != det.rho.rows() || w.dims.dA != d) {
    throw DimensionError("detection_value: witness and detector dimensions differ");
  }
  DetectionResult r;
  r.value = trace_of_product(w.matrix, det.rho).real();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      // Tr(W_ij rho_ji)
      double term = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          term += (w.matrix(i * d + a, j * d + b) * det.rho(j * d + b, i * d + a)).real();
      switch (det.block_case(i, j)) {
        case BlockCase::Diagonal: r.diagonal_sum += term; break;
        case BlockCase::Stripe: r.stripe_sum += term; break;
        case BlockCase::Residual: r.residual_sum += term; break;
        case BlockCase::Zero: r.near_diagonal_sum += term; break;
      }
    }
  r.expected = expected_detection_value(det.n, det.k);
  return r;
}

enum class LeftConvention { Plain, ConjugateLeft };

inline const char* to_string(LeftConvention c) {
  return c == LeftConvention::Plain ? "plain" : "conjugate-left";
}

enum class ZeroVectorKind { Diagonal, PhiPair, PhiTildePair };

struct ProductVector {
  ComplexVector left;
  ComplexVector right;
  ZeroVectorKind kind = ZeroVectorKind::Diagonal;
  std::size_t m = 0;
  std::size_t n = 0;
};

struct ZeroProductSet {
  std::vector<ProductVector> vectors;
  UpperTriangular<double> phases;  // alpha_mn over basis pairs m < n, z = exp(i alpha)
  LeftConvention convention = LeftConvention::Plain;
  double max_abs_expectation = 0.0;
  double min_singular_value = 0.0;
  std::size_t rank = 0;
  bool zeros_ok = false;
  bool spanning_ok = false;
};

/// Block pairs whose phase is not unimodular.
class NecessityFailure : public std::domain_error {
 public:
  NecessityFailure(std::string what, std::vector<std::pair<std::size_t, std::size_t>> pairs)
      : std::domain_error(std::move(what)), pairs_(std::move(pairs)) {}
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept { return pairs_; }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
};

inline constexpr double kZeroExpectationAtol = 1e-10;
inline constexpr double kSpanningSingularFloor = 1e-8;
inline constexpr double kCovarianceAtol = 1e-12;

namespace detail {

inline std::vector<ProductVector> zero_vectors(const MapSpec& spec, LeftConvention conv,
                                               UpperTriangular<double>& phases) {
  const std::size_t d = spec.dimension();
  const std::size_t bs = spec.block_size();
  phases = UpperTriangular<double>(d);
  std::vector<ProductVector> out;
  out.reserve(d * d);
  auto finish = [&](ComplexVector left, ComplexVector right, ZeroVectorKind kind, std::size_t m,
                    std::size_t n) {
    if (conv == LeftConvention::ConjugateLeft) left = conjugate(left);
    out.push_back({std::move(left), std::move(right), kind, m, n});
  };
  for (std::size_t kk = 0; kk < d; ++kk) {
    finish(basis_vector(d, kk), basis_vector(d, kk), ZeroVectorKind::Diagonal, kk, kk);
  }
  const Complex iu{0.0, 1.0};
  for (std::size_t m = 0; m < d; ++m) {
    for (std::size_t n = m + 1; n < d; ++n) {
      const double alpha = std::arg(spec.phase(m / bs, n / bs));
      phases.at(m, n) = alpha;
      const Complex half = std::polar(1.0, -alpha / 2.0);
      ComplexVector phi = basis_vector(d, m);
      phi[n] = half;
      finish(phi, phi, ZeroVectorKind::PhiPair, m, n);
      ComplexVector chi = basis_vector(d, m);
      chi[n] = iu * half;
      ComplexVector chi_tilde = basis_vector(d, m);
      chi_tilde[n] = -iu * half;
      finish(chi, chi_tilde, ZeroVectorKind::PhiTildePair, m, n);
    }
  }
  return out;
}

inline void evaluate_zero_set(const Witness& w, ZeroProductSet& set,
                              const ComplexMatrix* right_transform = nullptr) {
  std::vector<ComplexVector> stacked;
  stacked.reserve(set.vectors.size());
  set.max_abs_expectation = 0.0;
  for (const auto& pv : set.vectors) {
    const ComplexVector right = right_transform ? (*right_transform) * pv.right : pv.right;
    set.max_abs_expectation = std::max(set.max_abs_expectation, std::abs(expectation_product(w, pv.left, right)));
    stacked.push_back(kron(pv.left, right));
  }
  const auto sv = singular_values(stack_columns(stacked));
  set.min_singular_value = sv.empty() ? 0.0 : sv.back();
  set.rank = static_cast<std::size_t>(
      std::count_if(sv.begin(), sv.end(), [](double s) { return s > kSpanningSingularFloor; }));
  const std::size_t full = w.dims.dA * w.dims.dB;
  set.zeros_ok = set.max_abs_expectation <= kZeroExpectationAtol;
  set.spanning_ok = set.rank == full && set.vectors.size() == full;
}

inline void require_new_family(const MapSpec& spec, const char* who) {
  if (spec.family != MapFamily::NewFamily) {
    throw std::invalid_argument(std::string(who) + ": requires a new-family MapSpec");
  }
}

inline void require_unimodular(const MapSpec& spec, const Tolerance& tol, const char* who) {
  std::vector<std::pair<std::size_t, std::size_t>> bad;
  std::string list;
  for (std::size_t p = 0; p < spec.n; ++p)
    for (std::size_t q = p + 1; q < spec.n; ++q)
      if (std::abs(std::abs(spec.z.at(p, q)) - 1.0) > tol.eq_atol) {
        bad.emplace_back(p, q);
        list += " z_" + std::to_string(p + 1) + "," + std::to_string(q + 1);
      }
  if (!bad.empty()) {
    throw NecessityFailure(std::string(who) + ": optimality requires |z_ij| = 1; violated by" + list,
                           std::move(bad));
  }
}

}  // namespace detail

/// Which left factor makes the product vectors zeros of the witness: decided
/// once on the (N, K) = (2, 1) member with a non-real phase.
inline LeftConvention detect_left_convention() {
  static const LeftConvention convention = [] {
    UpperTriangular<Complex> z(2, std::polar(1.0, std::numbers::pi / 3.0));
    const MapSpec spec = MapSpec::new_family(2, 1, z, default_antisymmetric_unitary(2));
    const Witness w = make_witness(spec);
    bool plain_ok = false, conj_ok = false;
    for (auto conv : {LeftConvention::Plain, LeftConvention::ConjugateLeft}) {
      ZeroProductSet set;
      set.vectors = detail::zero_vectors(spec, conv, set.phases);
      detail::evaluate_zero_set(w, set);
      (conv == LeftConvention::Plain ? plain_ok : conj_ok) = set.zeros_ok;
    }
    if (plain_ok == conj_ok) {
      throw std::logic_error("detect_left_convention: conventions are not distinguishable");
    }
    return plain_ok ? LeftConvention::Plain : LeftConvention::ConjugateLeft;
  }();
  return convention;
}

inline ZeroProductSet optimality_zero_set(const MapSpec& spec, const Witness& w, const Tolerance& tol = {}) {
  detail::require_new_family(spec, "optimality_zero_set");
  validate(spec, tol);
  detail::require_unimodular(spec, tol, "optimality_zero_set");
  const std::size_t d = spec.dimension();
  if (w.dims.dA != d || w.dims.dB != d) throw DimensionError("optimality_zero_set: witness dims");
  ZeroProductSet set;
  set.convention = detect_left_convention();
  set.vectors = detail::zero_vectors(spec, set.convention, set.phases);
  detail::evaluate_zero_set(w, set);
  return set;
}

struct NdOptimalityReport {
  double covariance_residual = 0.0;
  bool covariance_ok = false;
  double gamma_max_abs_expectation = 0.0;
  double gamma_min_singular_value = 0.0;
  std::size_t gamma_rank = 0;
  bool gamma_zero_set_ok = false;
  bool gamma_spanning_ok = false;

  bool ok() const noexcept { return covariance_ok && gamma_zero_set_ok && gamma_spanning_ok; }
};

/// max |(1 (x) V) W (1 (x) V^+) - W^Gamma| with V = 1_N (x) U^+, the transpose
/// taken on the second factor; blockwise, so the cost is O(d^5).
inline double covariance_residual(const Witness& w, const ComplexMatrix& v) {
  const std::size_t da = w.dims.dA, db = w.dims.dB;
  if (v.rows() != db || v.cols() != db) throw DimensionError("covariance_residual: V has wrong size");
  const ComplexMatrix vd = dagger(v);
  double residual = 0.0;
  for (std::size_t i = 0; i < da; ++i)
    for (std::size_t j = 0; j < da; ++j) {
      const ComplexMatrix b = w.block(i, j);
      residual = std::max(residual, max_abs_diff(v * b * vd, transpose(b)));
    }
  return residual;
}

inline NdOptimalityReport nd_optimality_check(const MapSpec& spec, const Witness& w, const Tolerance& tol = {}) {
  detail::require_new_family(spec, "nd_optimality_check");
  validate(spec, tol);
  detail::require_unimodular(spec, tol, "nd_optimality_check");
  const std::size_t d = spec.dimension();
  if (w.dims.dA != d || w.dims.dB != d) throw DimensionError("nd_optimality_check: witness dims");

  const ComplexMatrix v = kron(ComplexMatrix::identity(spec.n), dagger(spec.unitary));
  NdOptimalityReport report;
  report.covariance_residual = covariance_residual(w, v);
  report.covariance_ok = report.covariance_residual <= kCovarianceAtol;

  Witness gamma;
  gamma.dims = w.dims;
  gamma.matrix = partial_transpose(w.matrix, w.dims, Subsystem::B);
  ZeroProductSet set;
  set.convention = detect_left_convention();
  set.vectors = detail::zero_vectors(spec, set.convention, set.phases);
  detail::evaluate_zero_set(gamma, set, &v);
  report.gamma_max_abs_expectation = set.max_abs_expectation;
  report.gamma_min_singular_value = set.min_singular_value;
  report.gamma_rank = set.rank;
  report.gamma_zero_set_ok = set.zeros_ok;
  report.gamma_spanning_ok = set.spanning_ok;
  return report;
}

/// max over matrix units e_rs of |(U^+ e_rs U)^T - U e_rs^T U^+|.
inline double antisymmetric_conjugation_identity(const ComplexMatrix& u) {
  if (!u.is_square()) throw DimensionError("antisymmetric_conjugation_identity: U not square");
  const std::size_t n = u.rows();
  const ComplexMatrix ud = dagger(u);
  double residual = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t s = 0; s < n; ++s) {
      const ComplexMatrix e = matrix_unit(n, r, s);
      residual = std::max(residual, max_abs_diff(transpose(ud * e * u), u * transpose(e) * ud));
    }
  return residual;
}

}  // namespace posmap

#endif  // POSMAP_WITNESS_HPP
