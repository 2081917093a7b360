#ifndef POSMAP_MAPS_HPP
#define POSMAP_MAPS_HPP

// Positive maps on matrix algebras realized through their action on matrix
// units, W_ij = map(e_ij). Every family here has the block form
//
//   map(X) = c * [ A_p            -w_pq B_pq ]      A_p  = 1 (Tr X - Tr X_pp)
//                [ -w_qp B_qp     ...        ]      B_pq = X_pq + twist(X_qp)
//
// with w_pq = z_pq above the diagonal and conj(z_qp) below; the families
// differ in the block size, the prefactor c and the twist.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "posmap/blockcert.hpp"
#include "posmap/linalg.hpp"
#include "posmap/pairs.hpp"
#include "posmap/random.hpp"

namespace posmap {

enum class MapFamily {
  Reduction,
  GeneralizedReduction,
  Robertson,
  GeneralizedRobertson,
  ComplexRobertsonExtension,
  NewFamily,
};

inline const char* to_string(MapFamily f) {
  switch (f) {
    case MapFamily::Reduction: return "reduction";
    case MapFamily::GeneralizedReduction: return "generalized-reduction";
    case MapFamily::Robertson: return "robertson";
    case MapFamily::GeneralizedRobertson: return "generalized-robertson";
    case MapFamily::ComplexRobertsonExtension: return "complex-robertson";
    case MapFamily::NewFamily: return "new";
  }
  return "unknown";
}

inline std::optional<MapFamily> parse_family(const std::string& s) {
  for (auto f : {MapFamily::Reduction, MapFamily::GeneralizedReduction, MapFamily::Robertson,
                 MapFamily::GeneralizedRobertson, MapFamily::ComplexRobertsonExtension,
                 MapFamily::NewFamily}) {
    if (s == to_string(f)) return f;
  }
  return std::nullopt;
}

/// [[0,1],[-1,0]] repeated along the diagonal: real, antisymmetric, orthogonal.
inline ComplexMatrix default_antisymmetric_unitary(std::size_t two_k) {
  if (two_k < 2 || two_k % 2 != 0) {
    throw std::invalid_argument("antisymmetric unitaries exist only in even dimension, got " +
                                std::to_string(two_k));
  }
  ComplexMatrix j(two_k, two_k);
  for (std::size_t b = 0; b < two_k; b += 2) {
    j(b, b + 1) = 1.0;
    j(b + 1, b) = -1.0;
  }
  return j;
}

inline ComplexMatrix sigma_y() {
  return ComplexMatrix{{0.0, Complex{0.0, -1.0}}, {Complex{0.0, 1.0}, 0.0}};
}

/// X -> Tr(X) 1 - X on 2x2 matrices (unnormalized reduction map).
inline ComplexMatrix reduction_2x2(const ComplexMatrix& x) {
  if (x.rows() != 2 || x.cols() != 2) throw DimensionError("reduction_2x2 expects a 2x2 matrix");
  return trace(x) * ComplexMatrix::identity(2) - x;
}

struct MapSpec {
  MapFamily family = MapFamily::Reduction;
  std::size_t n = 2;  // number of diagonal blocks
  std::size_t k = 1;  // half block size for the unitary-twisted families
  UpperTriangular<Complex> z;  // per block pair; only read by z-parameterized families
  ComplexMatrix unitary;       // 2k x 2k antisymmetric unitary, when applicable

  static MapSpec reduction(std::size_t n) {
    MapSpec s;
    s.family = MapFamily::Reduction;
    s.n = n;
    s.z = UpperTriangular<Complex>(n, Complex{1.0, 0.0});
    return s;
  }
  static MapSpec generalized_reduction(std::size_t n, UpperTriangular<Complex> z) {
    MapSpec s;
    s.family = MapFamily::GeneralizedReduction;
    s.n = n;
    s.z = std::move(z);
    return s;
  }
  static MapSpec robertson() {
    MapSpec s;
    s.family = MapFamily::Robertson;
    s.n = 2;
    s.z = UpperTriangular<Complex>(2, Complex{1.0, 0.0});
    return s;
  }
  static MapSpec generalized_robertson(std::size_t k, ComplexMatrix u) {
    MapSpec s;
    s.family = MapFamily::GeneralizedRobertson;
    s.n = 2;
    s.k = k;
    s.z = UpperTriangular<Complex>(2, Complex{1.0, 0.0});
    s.unitary = std::move(u);
    return s;
  }
  static MapSpec complex_robertson_extension(std::size_t n, UpperTriangular<Complex> z) {
    MapSpec s;
    s.family = MapFamily::ComplexRobertsonExtension;
    s.n = n;
    s.z = std::move(z);
    return s;
  }
  static MapSpec new_family(std::size_t n, std::size_t k, UpperTriangular<Complex> z, ComplexMatrix u) {
    MapSpec s;
    s.family = MapFamily::NewFamily;
    s.n = n;
    s.k = k;
    s.z = std::move(z);
    s.unitary = std::move(u);
    return s;
  }

  bool has_phases() const noexcept {
    return family == MapFamily::GeneralizedReduction ||
           family == MapFamily::ComplexRobertsonExtension || family == MapFamily::NewFamily;
  }
  bool has_unitary() const noexcept {
    return family == MapFamily::GeneralizedRobertson || family == MapFamily::NewFamily;
  }

  std::size_t block_size() const noexcept {
    switch (family) {
      case MapFamily::Reduction:
      case MapFamily::GeneralizedReduction: return 1;
      case MapFamily::Robertson:
      case MapFamily::ComplexRobertsonExtension: return 2;
      case MapFamily::GeneralizedRobertson:
      case MapFamily::NewFamily: return 2 * k;
    }
    return 0;
  }

  std::size_t dimension() const noexcept { return n * block_size(); }

  double prefactor() const noexcept {
    const double nm1 = static_cast<double>(n) - 1.0;
    switch (family) {
      case MapFamily::Reduction:
      case MapFamily::GeneralizedReduction: return 1.0 / nm1;
      case MapFamily::Robertson: return 0.5;
      case MapFamily::GeneralizedRobertson: return 1.0 / (2.0 * static_cast<double>(k));
      case MapFamily::ComplexRobertsonExtension: return 1.0 / (2.0 * nm1);
      case MapFamily::NewFamily: return 1.0 / (2.0 * static_cast<double>(k) * nm1);
    }
    return 0.0;
  }

  /// Phase attached to block pair (p, q): z_pq above, conj(z_qp) below, 1 on
  /// the diagonal. Families without phases read as all ones.
  Complex phase(std::size_t p, std::size_t q) const {
    if (p == q || !has_phases()) return 1.0;
    return p < q ? z.at(p, q) : std::conj(z.at(q, p));
  }
};

inline void validate(const MapSpec& spec, const Tolerance& tol = {}) {
  if (spec.n < 2) throw SpecError("MapSpec: need at least two blocks (N >= 2)");
  if (spec.family == MapFamily::Robertson && spec.n != 2) throw SpecError("Robertson map has N = 2");
  if (spec.family == MapFamily::GeneralizedRobertson && spec.n != 2) {
    throw SpecError("generalized Robertson map has N = 2");
  }
  if (spec.has_unitary() && spec.k < 1) throw SpecError("MapSpec: K must be positive");
  if (spec.has_phases()) {
    if (spec.z.n() != spec.n) {
      throw SpecError("MapSpec: expected " + std::to_string(UpperTriangular<Complex>::count(spec.n)) +
                      " phases z_ij");
    }
    for (std::size_t p = 0; p < spec.n; ++p)
      for (std::size_t q = p + 1; q < spec.n; ++q)
        if (!(std::abs(spec.z.at(p, q)) <= 1.0 + tol.eq_atol)) {
          throw SpecError("MapSpec: |z_" + std::to_string(p + 1) + "," + std::to_string(q + 1) +
                          "| exceeds 1");
        }
  }
  if (spec.has_unitary()) {
    const ComplexMatrix& u = spec.unitary;
    const std::size_t two_k = 2 * spec.k;
    if (u.rows() != two_k || u.cols() != two_k) {
      throw SpecError("MapSpec: unitary must be " + std::to_string(two_k) + "x" + std::to_string(two_k));
    }
    if (max_abs_diff(dagger(u) * u, ComplexMatrix::identity(two_k)) > tol.eq_atol) {
      throw SpecError("MapSpec: U is not unitary");
    }
    if (max_abs_diff(transpose(u), -u) > tol.eq_atol) throw SpecError("MapSpec: U is not antisymmetric");
  }
}

/// A linear map M_{d_in} -> M_{d_out} stored as the images of matrix units.
struct LinearMap {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::vector<ComplexMatrix> images;  // images[i * d_in + j] = map(e_ij)

  const ComplexMatrix& image(std::size_t i, std::size_t j) const { return images.at(i * d_in + j); }
  ComplexMatrix& image(std::size_t i, std::size_t j) { return images.at(i * d_in + j); }

  static LinearMap zero(std::size_t d_in, std::size_t d_out) {
    LinearMap m;
    m.d_in = d_in;
    m.d_out = d_out;
    m.images.assign(d_in * d_in, ComplexMatrix(d_out, d_out));
    return m;
  }

  static LinearMap identity(std::size_t d) {
    LinearMap m = zero(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) m.image(i, j)(i, j) = 1.0;
    return m;
  }
};

/// a * f + b * g
inline LinearMap combine(Complex a, const LinearMap& f, Complex b, const LinearMap& g) {
  if (f.d_in != g.d_in || f.d_out != g.d_out) throw DimensionError("combine: map dimensions differ");
  LinearMap out = f;
  for (std::size_t k = 0; k < out.images.size(); ++k) out.images[k] = a * f.images[k] + b * g.images[k];
  return out;
}

/// max over (i, j) of |map(e_ij)^dagger - map(e_ji)|.
inline double hermiticity_preservation_error(const LinearMap& map) {
  double err = 0.0;
  for (std::size_t i = 0; i < map.d_in; ++i)
    for (std::size_t j = i; j < map.d_in; ++j)
      err = std::max(err, max_abs_diff(dagger(map.image(i, j)), map.image(j, i)));
  return err;
}

namespace detail {

enum class Twist { None, Reduction2, Unitary };

inline ComplexMatrix apply_twist(Twist t, const ComplexMatrix& y, const ComplexMatrix& u) {
  switch (t) {
    case Twist::None: return ComplexMatrix(y.rows(), y.cols());
    case Twist::Reduction2: return reduction_2x2(y);
    case Twist::Unitary: return u * transpose(y) * dagger(u);
  }
  return {};
}

inline Twist twist_of(MapFamily f) {
  switch (f) {
    case MapFamily::Reduction:
    case MapFamily::GeneralizedReduction: return Twist::None;
    case MapFamily::Robertson:
    case MapFamily::ComplexRobertsonExtension: return Twist::Reduction2;
    case MapFamily::GeneralizedRobertson:
    case MapFamily::NewFamily: return Twist::Unitary;
  }
  return Twist::None;
}

}  // namespace detail

inline LinearMap build(const MapSpec& spec, const Tolerance& tol = {}) {
  validate(spec, tol);
  const std::size_t bs = spec.block_size();
  const std::size_t nb = spec.n;
  const std::size_t d = spec.dimension();
  const double c = spec.prefactor();
  const detail::Twist twist = detail::twist_of(spec.family);

  LinearMap map = LinearMap::zero(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t p = i / bs, r = i % bs;
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t q = j / bs, s = j % bs;
      ComplexMatrix& out = map.image(i, j);
      if (p == q) {
        // Only traces reach the diagonal blocks; off-diagonal blocks see nothing.
        if (r == s) {
          for (std::size_t b = 0; b < nb; ++b) {
            if (b == p) continue;
            for (std::size_t t = 0; t < bs; ++t) out(b * bs + t, b * bs + t) = c;
          }
        }
        continue;
      }
      const ComplexMatrix unit = matrix_unit(bs, r, s);
      const ComplexMatrix twisted = detail::apply_twist(twist, unit, spec.unitary);
      out.set_block(p * bs, q * bs, (-c * spec.phase(p, q)) * unit);
      out.set_block(q * bs, p * bs, (-c * spec.phase(q, p)) * twisted);
    }
  }
  return map;
}

/// map(X) = sum_ij X_ij map(e_ij)
inline ComplexMatrix apply(const LinearMap& map, const ComplexMatrix& x) {
  if (x.rows() != map.d_in || x.cols() != map.d_in) {
    throw DimensionError("apply: input " + x.shape() + " but map acts on " + std::to_string(map.d_in) +
                         "x" + std::to_string(map.d_in));
  }
  ComplexMatrix out(map.d_out, map.d_out);
  for (std::size_t i = 0; i < map.d_in; ++i)
    for (std::size_t j = 0; j < map.d_in; ++j) {
      const Complex xij = x(i, j);
      if (xij == Complex{}) continue;
      const auto src = map.image(i, j).data();
      auto dst = out.data();
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += xij * src[t];
    }
  return out;
}

/// Dual map under the trace pairing: Tr(A^+ map(B)) = Tr(adjoint(map)(A)^+ B).
inline LinearMap adjoint(const LinearMap& map) {
  LinearMap out = LinearMap::zero(map.d_out, map.d_in);
  for (std::size_t i = 0; i < map.d_in; ++i)
    for (std::size_t j = 0; j < map.d_in; ++j) {
      const ComplexMatrix& w = map.image(i, j);
      for (std::size_t a = 0; a < map.d_out; ++a)
        for (std::size_t b = 0; b < map.d_out; ++b) {
          if (w(a, b) == Complex{}) continue;
          out.image(a, b)(i, j) = std::conj(w(a, b));
        }
    }
  return out;
}

/// Bipartite Hermitian operator on C^dA (x) C^dB, optionally tagged with the
/// map it was built from.
struct Witness {
  ComplexMatrix matrix;
  BipartiteDims dims;
  std::optional<MapSpec> provenance;

  /// Block (i, j) of the first tensor factor: a dB x dB matrix.
  ComplexMatrix block(std::size_t i, std::size_t j) const {
    return matrix.block(i * dims.dB, j * dims.dB, dims.dB, dims.dB);
  }
};

/// (1/d) sum_ij e_ij (x) map(e_ij)
inline Witness choi(const LinearMap& map) {
  if (map.d_in != map.d_out) {
    throw DimensionError("choi: map is not an endomorphism (" + std::to_string(map.d_in) + " -> " +
                         std::to_string(map.d_out) + ")");
  }
  const std::size_t d = map.d_in;
  Witness w;
  w.dims = {d, d};
  w.matrix = ComplexMatrix(d * d, d * d);
  const double scale = 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) w.matrix.set_block(i * d, j * d, scale * map.image(i, j));
  return w;
}

inline Witness make_witness(const MapSpec& spec, const Tolerance& tol = {}) {
  Witness w = choi(build(spec, tol));
  w.provenance = spec;
  return w;
}

/// Block data of map(|psi><psi|) for psi = (+)_i sqrt(a_i) psi_i with unit
/// psi_i: map(P) = prefactor * assemble(result).
inline BlockSpec rank_one_block_spec(const MapSpec& spec, std::span<const Complex> psi,
                                     const Tolerance& tol = {}) {
  validate(spec, tol);
  const std::size_t bs = spec.block_size();
  const std::size_t nb = spec.n;
  if (psi.size() != spec.dimension()) throw DimensionError("rank_one_block_spec: vector length");
  const double total = norm(psi);
  if (total == 0.0) throw std::invalid_argument("rank_one_block_spec: zero vector");

  BlockSpec out;
  out.n_blocks = nb;
  out.block_size = bs;
  out.alphas.resize(nb);
  std::vector<ComplexVector> unit(nb);
  for (std::size_t p = 0; p < nb; ++p) {
    ComplexVector part(psi.begin() + p * bs, psi.begin() + (p + 1) * bs);
    for (auto& x : part) x /= total;
    const double len = norm(part);
    out.alphas[p] = len * len;
    if (len > 0.0) {
      for (auto& x : part) x /= len;
    } else {
      part.assign(bs, Complex{});
      part[0] = 1.0;
    }
    unit[p] = std::move(part);
  }

  const detail::Twist twist = detail::twist_of(spec.family);
  // twist(X_qp) with X_qp ~ |psi_q><psi_p|
  auto pair_block = [&](std::size_t p, std::size_t q) {
    const ComplexMatrix direct = ComplexMatrix::outer(unit[p], unit[q]);
    const ComplexMatrix flipped = ComplexMatrix::outer(unit[q], unit[p]);
    return std::sqrt(out.alphas[p] * out.alphas[q]) *
           (direct + detail::apply_twist(twist, flipped, spec.unitary));
  };
  out.z = UpperTriangular<Complex>(nb);
  out.blocks = UpperTriangular<ComplexMatrix>(nb);
  for (std::size_t p = 0; p < nb; ++p) {
    for (std::size_t q = p + 1; q < nb; ++q) {
      out.z.at(p, q) = spec.phase(p, q);
      out.blocks.at(p, q) = pair_block(p, q);
    }
    const ComplexMatrix diag = pair_block(p, p);
    out.diag_blocks.push_back(0.5 * (diag + dagger(diag)));
  }
  return out;
}

struct ScanOptions {
  std::size_t max_alternations = 200;
  double improvement_tol = 1e-12;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ScanResult {
  double min_value = std::numeric_limits<double>::infinity();
  ComplexVector argmin;
  std::size_t best_trial = 0;
  std::size_t total_alternations = 0;
};

namespace detail {

struct SparseImages {
  struct Entry {
    std::uint32_t row;
    std::uint32_t col;
    Complex value;
  };
  std::vector<std::vector<Entry>> entries;

  explicit SparseImages(const LinearMap& map) : entries(map.images.size()) {
    for (std::size_t k = 0; k < map.images.size(); ++k) {
      const ComplexMatrix& w = map.images[k];
      for (std::size_t a = 0; a < w.rows(); ++a)
        for (std::size_t b = 0; b < w.cols(); ++b)
          if (w(a, b) != Complex{}) {
            entries[k].push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), w(a, b)});
          }
    }
  }
};

struct TrialOutcome {
  double value = std::numeric_limits<double>::infinity();
  ComplexVector psi;
  std::size_t alternations = 0;
};

inline TrialOutcome run_seesaw_trial(const LinearMap& map, const SparseImages& sparse,
                                     std::uint64_t seed, const ScanOptions& opts) {
  const std::size_t din = map.d_in;
  const std::size_t dout = map.d_out;
  // loose Hermiticity check for intermediate quadratic forms
  Tolerance loose;
  loose.eq_atol = 1e-8;

  ComplexVector psi = random_unit_vector(din, seed);
  auto image_of = [&](const ComplexVector& v) {
    ComplexMatrix out(dout, dout);
    for (std::size_t i = 0; i < din; ++i) {
      if (v[i] == Complex{}) continue;
      for (std::size_t j = 0; j < din; ++j) {
        const Complex coeff = v[i] * std::conj(v[j]);
        if (coeff == Complex{}) continue;
        for (const auto& e : sparse.entries[i * din + j]) out(e.row, e.col) += coeff * e.value;
      }
    }
    return out;
  };

  TrialOutcome best;
  auto eig = hermitian_eigen(image_of(psi), loose);
  best.value = eig.values.front();
  best.psi = psi;
  for (std::size_t it = 0; it < opts.max_alternations; ++it) {
    ++best.alternations;
    const ComplexVector y = eig.vectors.column(0);
    // phi(j, i) = <y| map(e_ij) |y>
    ComplexMatrix phi(din, din);
    for (std::size_t i = 0; i < din; ++i)
      for (std::size_t j = 0; j < din; ++j) {
        Complex acc{};
        for (const auto& e : sparse.entries[i * din + j]) acc += std::conj(y[e.row]) * e.value * y[e.col];
        phi(j, i) = acc;
      }
    const auto phi_eig = hermitian_eigen(phi, loose);
    ComplexVector next = phi_eig.vectors.column(0);
    eig = hermitian_eigen(image_of(next), loose);
    const double value = eig.values.front();
    const double improvement = best.value - value;
    if (value < best.value) {
      best.value = value;
      best.psi = next;
    }
    if (improvement < opts.improvement_tol) break;
  }
  return best;
}

}  // namespace detail

/// Minimum over sampled unit vectors psi of lambda_min(map(|psi><psi|)), each
/// start refined by alternating exact minimization over the output vector and
/// the input vector. A falsifier for positivity: negative values certify that
/// the map is not positive; nonnegative values are evidence only.
inline ScanResult positivity_scan(const LinearMap& map, std::size_t trials, std::uint64_t seed,
                                  const ScanOptions& opts = {}) {
  if (trials == 0) throw std::invalid_argument("positivity_scan: trials must be >= 1");
  if (hermiticity_preservation_error(map) > 1e-8) {
    throw std::invalid_argument("positivity_scan: map does not preserve Hermiticity");
  }
  const detail::SparseImages sparse(map);
  std::vector<detail::TrialOutcome> outcomes(trials);

  unsigned workers = opts.threads != 0 ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, trials));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < trials; t += workers) {
          outcomes[t] = detail::run_seesaw_trial(map, sparse, derive_seed(seed, t), opts);
        }
      });
    }
  }

  ScanResult result;
  for (std::size_t t = 0; t < trials; ++t) {
    result.total_alternations += outcomes[t].alternations;
    if (outcomes[t].value < result.min_value) {
      result.min_value = outcomes[t].value;
      result.argmin = outcomes[t].psi;
      result.best_trial = t;
    }
  }
  return result;
}

}  // namespace posmap

#endif  // POSMAP_MAPS_HPP
