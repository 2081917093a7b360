#ifndef POSMAP_BLOCKCERT_HPP
#define POSMAP_BLOCKCERT_HPP

// Block matrices of the form
//
//   [ (1-a_1) 1      -z_12 M_12   ...  -z_1N M_1N ]
//   [ -z_12^* M_12^+  (1-a_2) 1   ...  -z_2N M_2N ]
//   [      ...                                     ]
//
// with weights a_i summing to one and |z_ij| <= 1. When
//   M_ij M_kj^+ = a_j M_ik   (M_ji := M_ij^+, M_ii the diagonal data)
//   M_ii <= a_i 1
// hold, the matrix is positive semidefinite. `check_conditions` evaluates the
// hypotheses; `inductive_certify` replays the induction on the number of
// block rows (normalize the weights, rescale the blocks, fold the last block
// row into new phases, bound the new diagonal) down to a single block.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "posmap/linalg.hpp"
#include "posmap/pairs.hpp"

namespace posmap {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BlockSpec {
  std::size_t n_blocks = 0;
  std::size_t block_size = 0;
  std::vector<double> alphas;
  UpperTriangular<Complex> z;
  UpperTriangular<ComplexMatrix> blocks;  // M_ij, i < j
  std::vector<ComplexMatrix> diag_blocks; // M_ii

  /// z_ij for i < j, conj(z_ji) for i > j, 1 on the diagonal.
  Complex phase(std::size_t i, std::size_t j) const {
    if (i == j) return 1.0;
    return i < j ? z.at(i, j) : std::conj(z.at(j, i));
  }

  /// M_ij for i < j, M_ji^+ for i > j, M_ii on the diagonal.
  ComplexMatrix block(std::size_t i, std::size_t j) const {
    if (i == j) return diag_blocks.at(i);
    return i < j ? blocks.at(i, j) : dagger(blocks.at(j, i));
  }
};

/// Throws SpecError when the structural invariants of a BlockSpec fail.
inline void validate(const BlockSpec& spec, const Tolerance& tol = {}) {
  const std::size_t n = spec.n_blocks;
  const std::size_t k = spec.block_size;
  if (n == 0 || k == 0) throw SpecError("BlockSpec: N and K must be positive");
  if (spec.alphas.size() != n) throw SpecError("BlockSpec: expected N weights");
  if (spec.z.n() != n || spec.blocks.n() != n) throw SpecError("BlockSpec: pair tables must have N rows");
  if (spec.diag_blocks.size() != n) throw SpecError("BlockSpec: expected N diagonal blocks");

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = spec.alphas[i];
    if (!std::isfinite(a) || a < -tol.eq_atol || a > 1.0 + tol.eq_atol) {
      throw SpecError("BlockSpec: weight alpha_" + std::to_string(i + 1) + " = " + std::to_string(a) +
                      " outside [0,1]");
    }
    sum += a;
  }
  if (std::abs(sum - 1.0) > tol.eq_atol) {
    throw SpecError("BlockSpec: weights sum to " + std::to_string(sum) + ", expected 1");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(spec.z.at(i, j)) > 1.0 + tol.eq_atol) {
        throw SpecError("BlockSpec: |z_" + std::to_string(i + 1) + std::to_string(j + 1) + "| > 1");
      }
      const ComplexMatrix& m = spec.blocks.at(i, j);
      if (m.rows() != k || m.cols() != k) throw SpecError("BlockSpec: off-diagonal block has wrong shape");
      if (spec.alphas[j] <= tol.eq_atol && max_abs(m) > tol.eq_atol) {
        throw SpecError("BlockSpec: alpha_" + std::to_string(j + 1) + " = 0 forces M_" +
                        std::to_string(i + 1) + std::to_string(j + 1) + " = 0");
      }
    }
    const ComplexMatrix& d = spec.diag_blocks[i];
    if (d.rows() != k || d.cols() != k) throw SpecError("BlockSpec: diagonal block has wrong shape");
    if (hermiticity_error(d) > tol.eq_atol) {
      throw SpecError("BlockSpec: M_" + std::to_string(i + 1) + std::to_string(i + 1) + " not Hermitian");
    }
    if (!is_psd(d, tol)) {
      throw SpecError("BlockSpec: M_" + std::to_string(i + 1) + std::to_string(i + 1) + " not PSD");
    }
  }
}

/// (N K) x (N K) matrix with diagonal blocks (1 - a_i) 1_K and off-diagonal
/// blocks -z_ij M_ij above the diagonal, -conj(z_ij) M_ij^+ below.
inline ComplexMatrix assemble(const BlockSpec& spec, const Tolerance& tol = {}) {
  validate(spec, tol);
  const std::size_t n = spec.n_blocks;
  const std::size_t k = spec.block_size;
  ComplexMatrix m(n * k, n * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < k; ++r) m(i * k + r, i * k + r) = 1.0 - spec.alphas[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const ComplexMatrix upper = -spec.z.at(i, j) * spec.blocks.at(i, j);
      m.set_block(i * k, j * k, upper);
      m.set_block(j * k, i * k, dagger(upper));
    }
  }
  return m;
}

/// Location of a condition residual, zero-based block indices. For the
/// defining relation k == i; for the diagonal bound i == j == k.
struct ViolationSite {
  std::string condition;  // "def", "cond1" or "cond2"
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t k = 0;
};

struct ConditionReport {
  bool def_ok = true;
  bool cond1_ok = true;
  bool cond2_ok = true;
  double def_violation = 0.0;
  double cond1_violation = 0.0;
  double cond2_violation = 0.0;
  double max_violation = 0.0;
  std::optional<ViolationSite> witness_triple;

  bool all_ok() const noexcept { return def_ok && cond1_ok && cond2_ok; }
};

inline ConditionReport check_conditions(const BlockSpec& spec, const Tolerance& tol = {}) {
  validate(spec, tol);
  const std::size_t n = spec.n_blocks;
  const std::size_t k = spec.block_size;
  ConditionReport report;
  auto note = [&](double v, double& slot, const char* name, std::size_t i, std::size_t j,
                  std::size_t kk) {
    slot = std::max(slot, v);
    if (!report.witness_triple || v > report.max_violation) {
      report.max_violation = v;
      report.witness_triple = ViolationSite{name, i, j, kk};
    }
  };

  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      const ComplexMatrix& mij = spec.blocks.at(i, j);
      // i == k: M_ij M_ij^+ = a_j M_ii
      const ComplexMatrix def_residual = mij * dagger(mij) - spec.alphas[j] * spec.diag_blocks[i];
      note(max_abs(def_residual), report.def_violation, "def", i, j, i);
      for (std::size_t kk = 0; kk < j; ++kk) {
        if (kk == i) continue;
        const ComplexMatrix residual =
            mij * dagger(spec.blocks.at(kk, j)) - spec.alphas[j] * spec.block(i, kk);
        note(max_abs(residual), report.cond1_violation, "cond1", i, j, kk);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const ComplexMatrix gap = spec.alphas[i] * ComplexMatrix::identity(k) - spec.diag_blocks[i];
    const double v = std::max(0.0, -min_eigenvalue(gap, tol));
    note(v, report.cond2_violation, "cond2", i, i, i);
  }
  report.def_ok = report.def_violation <= tol.eq_atol;
  report.cond1_ok = report.cond1_violation <= tol.eq_atol;
  report.cond2_ok = report.cond2_violation <= tol.eq_atol;
  return report;
}

/// Facts verified while folding block row N into the remaining N-1 rows.
struct StepCheck {
  std::size_t level = 0;          // number of block rows before the step
  double alpha_last = 0.0;        // weight of the folded row
  double max_new_phase = 0.0;     // max |z'_ij|
  double phase_bound_excess = 0.0;  // max of |z'_ij| - ((1-a_N)|z_ij| + a_N |z_iN||z_jN|)
  bool phase_ok = true;
  double rescaled_relation_violation = 0.0;  // M'_ij M'_kj^+ = a'_j M'_ik (incl. k == i)
  bool rescaled_relation_ok = true;
  double rescaled_diag_violation = 0.0;      // M'_ii <= a'_i 1
  bool rescaled_diag_ok = true;
  double diag_bound_margin = 0.0;  // min eig of B_i - (1 - a'_i) 1 over i
  bool diag_bound_ok = true;
  double schur_identity_residual = 0.0;  // |M_beta - (M_{N-1} - X B^{-1} X^+)|_max
  double loewner_gap = 0.0;              // min eig of M_beta - M'_{N-1}
  bool loewner_ok = true;

  bool ok() const noexcept {
    return phase_ok && rescaled_relation_ok && rescaled_diag_ok && diag_bound_ok && loewner_ok;
  }
};

struct InductiveCertificate {
  std::vector<BlockSpec> chain;                 // N, N-1, ..., 1 block rows
  std::vector<double> level_min_eigenvalues;    // of assemble(chain[l])
  std::vector<StepCheck> steps;                 // steps[s] maps chain[s] -> chain[s+1]
  bool degenerate_guard_used = false;  // a_N ~ 1: final level certified by eigenvalues
};

struct CertifyFailure {
  std::size_t step = 0;  // 0: hypotheses at entry; s >= 1: s-th reduction
  std::string check;
  double value = 0.0;
  std::optional<ViolationSite> site;
  std::string message;
};

struct CertifyResult {
  std::optional<InductiveCertificate> certificate;
  std::optional<CertifyFailure> failure;
  bool ok() const noexcept { return certificate.has_value() && !failure.has_value(); }
};

namespace detail {

// Fold the last block row into the others. Requires 1 - a_N > 0.
inline BlockSpec reduce_last_block(const BlockSpec& spec) {
  const std::size_t n = spec.n_blocks;
  const std::size_t last = n - 1;
  const double a_last = spec.alphas[last];
  const double scale = 1.0 / (1.0 - a_last);  // a'_i / a_i, and sqrt(a'_i a'_j / (a_i a_j))

  BlockSpec out;
  out.n_blocks = n - 1;
  out.block_size = spec.block_size;
  out.alphas.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) out.alphas[i] = spec.alphas[i] * scale;
  out.z = UpperTriangular<Complex>(n - 1);
  out.blocks = UpperTriangular<ComplexMatrix>(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j + 1 < n; ++j) {
      out.z.at(i, j) = (1.0 - a_last) * spec.z.at(i, j) +
                       a_last * spec.z.at(i, last) * std::conj(spec.z.at(j, last));
      out.blocks.at(i, j) = scale * spec.blocks.at(i, j);
    }
    out.diag_blocks.push_back(scale * spec.diag_blocks[i]);
  }
  return out;
}

inline StepCheck verify_step(const BlockSpec& spec, const BlockSpec& reduced, const Tolerance& tol) {
  const std::size_t n = spec.n_blocks;
  const std::size_t k = spec.block_size;
  const std::size_t last = n - 1;
  const double a_last = spec.alphas[last];
  StepCheck step;
  step.level = n;
  step.alpha_last = a_last;

  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j + 1 < n; ++j) {
      const double zp = std::abs(reduced.z.at(i, j));
      const double bound = (1.0 - a_last) * std::abs(spec.z.at(i, j)) +
                           a_last * std::abs(spec.z.at(i, last)) * std::abs(spec.z.at(j, last));
      step.max_new_phase = std::max(step.max_new_phase, zp);
      step.phase_bound_excess = std::max(step.phase_bound_excess, zp - bound);
    }
  }
  step.phase_ok = step.max_new_phase <= 1.0 + tol.eq_atol && step.phase_bound_excess <= tol.eq_atol;

  const ConditionReport rescaled = check_conditions(reduced, tol);
  step.rescaled_relation_violation = std::max(rescaled.def_violation, rescaled.cond1_violation);
  step.rescaled_relation_ok = rescaled.def_ok && rescaled.cond1_ok;
  step.rescaled_diag_violation = rescaled.cond2_violation;
  step.rescaled_diag_ok = rescaled.cond2_ok;

  // M_beta: diagonal B_i, off-diagonal -z'_ij M'_ij
  const std::size_t m = (n - 1) * k;
  ComplexMatrix beta(m, m);
  step.diag_bound_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double ap = reduced.alphas[i];
    const double zn2 = std::norm(spec.z.at(i, last));
    ComplexMatrix b_i = (1.0 - ap * (1.0 - a_last)) * ComplexMatrix::identity(k) -
                        (zn2 * a_last) * reduced.diag_blocks[i];
    const ComplexMatrix margin = b_i - (1.0 - ap) * ComplexMatrix::identity(k);
    step.diag_bound_margin = std::min(step.diag_bound_margin, min_eigenvalue(margin, tol));
    beta.set_block(i * k, i * k, b_i);
    for (std::size_t j = i + 1; j + 1 < n; ++j) {
      const ComplexMatrix upper = -reduced.z.at(i, j) * reduced.blocks.at(i, j);
      beta.set_block(i * k, j * k, upper);
      beta.set_block(j * k, i * k, dagger(upper));
    }
  }
  step.diag_bound_ok = step.diag_bound_margin >= -tol.psd_slack;

  // Schur complement of the (1 - a_N) 1 corner equals M_beta.
  const ComplexMatrix full = assemble(spec, tol);
  const ComplexMatrix top = full.block(0, 0, m, m);
  const ComplexMatrix column = full.block(0, m, m, k);
  const ComplexMatrix schur = top - (1.0 / (1.0 - a_last)) * (column * dagger(column));
  step.schur_identity_residual = max_abs_diff(schur, beta);

  const ComplexMatrix lower = assemble(reduced, tol);
  ComplexMatrix gap = beta - lower;
  gap = 0.5 * (gap + dagger(gap));
  step.loewner_gap = min_eigenvalue(gap, tol);
  step.loewner_ok = step.loewner_gap >= -tol.psd_slack;
  return step;
}

inline std::string first_failed_check(const StepCheck& s) {
  if (!s.phase_ok) return "phase_bound";
  if (!s.rescaled_relation_ok) return "rescaled_relation";
  if (!s.rescaled_diag_ok) return "rescaled_diag_bound";
  if (!s.diag_bound_ok) return "diag_lower_bound";
  if (!s.loewner_ok) return "loewner_order";
  return {};
}

}  // namespace detail

inline CertifyResult inductive_certify(const BlockSpec& spec, const Tolerance& tol = {}) {
  CertifyResult result;
  const ConditionReport entry = check_conditions(spec, tol);
  if (!entry.all_ok()) {
    CertifyFailure f;
    f.step = 0;
    f.site = entry.witness_triple;
    f.check = f.site ? f.site->condition : "conditions";
    f.value = entry.max_violation;
    f.message = "hypotheses fail at entry (" + f.check + ")";
    result.failure = f;
    return result;
  }

  InductiveCertificate cert;
  cert.chain.push_back(spec);
  while (true) {
    const BlockSpec& current = cert.chain.back();
    const ComplexMatrix assembled = assemble(current, tol);
    cert.level_min_eigenvalues.push_back(min_eigenvalue(assembled, tol));
    const std::size_t n = current.n_blocks;
    if (n == 1) break;
    const double a_last = current.alphas[n - 1];
    if (1.0 - a_last <= tol.eq_atol) {
      // Remaining weights vanish; the matrix is block diagonal and the
      // eigenvalue oracle settles it directly.
      cert.degenerate_guard_used = true;
      break;
    }
    BlockSpec reduced = detail::reduce_last_block(current);
    StepCheck step = detail::verify_step(current, reduced, tol);
    const std::size_t index = cert.steps.size() + 1;
    if (!step.ok()) {
      CertifyFailure f;
      f.step = index;
      f.check = detail::first_failed_check(step);
      f.value = f.check == "diag_lower_bound" ? step.diag_bound_margin
                : f.check == "loewner_order"  ? step.loewner_gap
                : f.check == "phase_bound"    ? step.max_new_phase
                                              : std::max(step.rescaled_relation_violation,
                                                         step.rescaled_diag_violation);
      f.message = "step " + std::to_string(index) + " violates " + f.check;
      result.failure = f;
      return result;
    }
    cert.steps.push_back(step);
    cert.chain.push_back(std::move(reduced));
  }

  const double last_min = cert.level_min_eigenvalues.back();
  if (last_min < -tol.psd_slack) {
    CertifyFailure f;
    f.step = cert.steps.size() + 1;
    f.check = "base_case";
    f.value = last_min;
    f.message = "terminal level is not positive semidefinite";
    result.failure = f;
    return result;
  }
  result.certificate = std::move(cert);
  return result;
}

}  // namespace posmap

#endif  // POSMAP_BLOCKCERT_HPP
