#ifndef POSMAP_RANDOM_HPP
#define POSMAP_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "posmap/matrix.hpp"

namespace posmap {

/// SplitMix64 finalizer; used to derive independent per-trial seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal() { return normal_(engine_); }

  /// Standard complex Gaussian (E|z|^2 = 1).
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

  Complex unit_phase() { return std::polar(1.0, uniform(0.0, 2.0 * std::numbers::pi)); }

  std::uint64_t next_u64() { return engine_(); }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline ComplexVector random_unit_vector(std::size_t d, Rng& rng) {
  ComplexVector v(d);
  double n = 0.0;
  while (n == 0.0) {
    for (auto& x : v) x = rng.complex_normal();
    n = norm(v);
  }
  for (auto& x : v) x /= n;
  return v;
}

inline ComplexVector random_unit_vector(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  return random_unit_vector(d, rng);
}

inline ComplexMatrix random_complex_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  ComplexMatrix m(rows, cols);
  for (auto& x : m.data()) x = rng.complex_normal();
  return m;
}

inline ComplexMatrix random_hermitian(std::size_t d, Rng& rng) {
  const ComplexMatrix g = random_complex_matrix(d, d, rng);
  return 0.5 * (g + dagger(g));
}

/// Haar-distributed unitary via modified Gram-Schmidt on a complex Ginibre
/// matrix (positive diagonal of R, which fixes the phase ambiguity).
inline ComplexMatrix haar_unitary(std::size_t d, Rng& rng) {
  ComplexMatrix q = random_complex_matrix(d, d, rng);
  for (std::size_t j = 0; j < d; ++j) {
    for (int pass = 0; pass < 2; ++pass) {  // reorthogonalize once
      for (std::size_t k = 0; k < j; ++k) {
        Complex proj{};
        for (std::size_t i = 0; i < d; ++i) proj += std::conj(q(i, k)) * q(i, j);
        for (std::size_t i = 0; i < d; ++i) q(i, j) -= proj * q(i, k);
      }
    }
    double n = 0.0;
    for (std::size_t i = 0; i < d; ++i) n += std::norm(q(i, j));
    n = std::sqrt(n);
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= n;
  }
  return q;
}

inline ComplexMatrix haar_unitary(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  return haar_unitary(d, rng);
}

}  // namespace posmap

#endif  // POSMAP_RANDOM_HPP
