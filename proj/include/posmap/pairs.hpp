#ifndef POSMAP_PAIRS_HPP
#define POSMAP_PAIRS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace posmap {

/// Values indexed by unordered pairs i < j of {0, ..., n-1}, stored row by row:
/// (0,1), (0,2), ..., (0,n-1), (1,2), ...
template <class T>
class UpperTriangular {
 public:
  UpperTriangular() = default;
  explicit UpperTriangular(std::size_t n, const T& fill = T{}) : n_(n), values_(count(n), fill) {}
  UpperTriangular(std::size_t n, std::vector<T> values) : n_(n), values_(std::move(values)) {
    if (values_.size() != count(n_)) {
      throw std::invalid_argument("expected " + std::to_string(count(n_)) +
                                  " upper-triangular entries, got " + std::to_string(values_.size()));
    }
  }

  static constexpr std::size_t count(std::size_t n) noexcept { return n < 2 ? 0 : n * (n - 1) / 2; }

  static constexpr std::size_t index(std::size_t i, std::size_t j, std::size_t n) noexcept {
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& at(std::size_t i, std::size_t j) { return values_[checked(i, j)]; }
  const T& at(std::size_t i, std::size_t j) const { return values_[checked(i, j)]; }

  const std::vector<T>& values() const noexcept { return values_; }
  std::vector<T>& values() noexcept { return values_; }

 private:
  std::size_t checked(std::size_t i, std::size_t j) const {
    if (!(i < j && j < n_)) {
      throw std::out_of_range("pair (" + std::to_string(i) + "," + std::to_string(j) +
                              ") is not an upper-triangular pair for n=" + std::to_string(n_));
    }
    return index(i, j, n_);
  }

  std::size_t n_ = 0;
  std::vector<T> values_;
};

}  // namespace posmap

#endif  // POSMAP_PAIRS_HPP
