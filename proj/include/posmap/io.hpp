#ifndef POSMAP_IO_HPP
#define POSMAP_IO_HPP

// JSON exchange formats. Matrices are {rows, cols, re, im} with row-major
// lists; block and pair indices are 1-based on the wire.

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "posmap/blockcert.hpp"
#include "posmap/maps.hpp"

namespace posmap {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline void require_object(const Json& j, const std::string& what) {
  if (!j.is_object()) throw FormatError(what + ": expected a JSON object");
}

/// Strict parsing: every key must be in `allowed`.
inline void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw FormatError(what + ": unknown field '" + key + "'");
  }
}

inline const Json& field(const Json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(what + ": missing field '" + key + "'");
  return *it;
}

inline std::size_t as_size(const Json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw FormatError(what + ": expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

inline double as_double(const Json& j, const std::string& what) {
  if (!j.is_number()) throw FormatError(what + ": expected a number");
  return j.get<double>();
}

inline std::vector<double> as_doubles(const Json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(as_double(x, what));
  return out;
}

}  // namespace io

inline Json to_json(const ComplexMatrix& m) {
  Json re = Json::array(), im = Json::array();
  for (const Complex& x : m.data()) {
    re.push_back(x.real());
    im.push_back(x.imag());
  }
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j;
}

inline ComplexMatrix matrix_from_json(const Json& j, const std::string& what = "matrix") {
  io::require_object(j, what);
  io::reject_unknown(j, {"rows", "cols", "re", "im"}, what);
  const std::size_t rows = io::as_size(io::field(j, "rows", what), what + ".rows");
  const std::size_t cols = io::as_size(io::field(j, "cols", what), what + ".cols");
  const auto re = io::as_doubles(io::field(j, "re", what), what + ".re");
  const auto im = j.contains("im") ? io::as_doubles(j["im"], what + ".im") : std::vector<double>(re.size(), 0.0);
  if (re.size() != rows * cols || im.size() != rows * cols) {
    throw FormatError(what + ": re/im must hold rows*cols = " + std::to_string(rows * cols) + " entries");
  }
  std::vector<Complex> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = {re[i], im[i]};
  return ComplexMatrix(rows, cols, std::move(data));
}

/// Pair table as {re: [...], im: [...]} in the order (1,2), (1,3), ..., (N-1,N).
inline Json to_json(const UpperTriangular<Complex>& z) {
  Json re = Json::array(), im = Json::array();
  for (const Complex& x : z.values()) {
    re.push_back(x.real());
    im.push_back(x.imag());
  }
  Json j;
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j;
}

/// Accepts a number (every pair gets it), an array of reals, or {re, im}.
inline UpperTriangular<Complex> phases_from_json(const Json& j, std::size_t n, const std::string& what = "z") {
  const std::size_t count = UpperTriangular<Complex>::count(n);
  if (j.is_number()) return UpperTriangular<Complex>(n, Complex{j.get<double>(), 0.0});
  std::vector<Complex> values;
  if (j.is_array()) {
    for (double x : io::as_doubles(j, what)) values.emplace_back(x, 0.0);
  } else if (j.is_object()) {
    io::reject_unknown(j, {"re", "im"}, what);
    const auto re = io::as_doubles(io::field(j, "re", what), what + ".re");
    const auto im = j.contains("im") ? io::as_doubles(j["im"], what + ".im") : std::vector<double>(re.size(), 0.0);
    if (im.size() != re.size()) throw FormatError(what + ": re and im lengths differ");
    for (std::size_t i = 0; i < re.size(); ++i) values.emplace_back(re[i], im[i]);
  } else {
    throw FormatError(what + ": expected a number, an array, or {re, im}");
  }
  if (values.size() != count) {
    throw FormatError(what + ": expected " + std::to_string(count) + " pair entries for N=" + std::to_string(n) +
                      ", got " + std::to_string(values.size()));
  }
  return UpperTriangular<Complex>(n, std::move(values));
}

inline Json to_json(const MapSpec& spec) {
  Json j;
  j["family"] = to_string(spec.family);
  j["N"] = spec.n;
  j["K"] = spec.k;
  if (spec.has_phases()) j["z"] = to_json(spec.z);
  if (spec.has_unitary()) j["unitary"] = to_json(spec.unitary);
  return j;
}

/// `unitary` may be a matrix object or one of the names "J" and "sigma_y".
inline ComplexMatrix unitary_from_name(const std::string& name, std::size_t k) {
  if (name == "J") return default_antisymmetric_unitary(2 * k);
  if (name == "sigma_y") {
    if (k != 1) throw FormatError("unitary sigma_y is 2x2 and needs K=1");
    return sigma_y();
  }
  throw FormatError("unknown unitary name '" + name + "' (expected J or sigma_y)");
}

inline MapSpec map_spec_from_json(const Json& j, const std::string& what = "map_spec") {
  io::require_object(j, what);
  io::reject_unknown(j, {"family", "N", "K", "z", "unitary"}, what);
  const Json& fam = io::field(j, "family", what);
  if (!fam.is_string()) throw FormatError(what + ".family: expected a string");
  const auto family = parse_family(fam.get<std::string>());
  if (!family) throw FormatError(what + ": unknown family '" + fam.get<std::string>() + "'");

  MapSpec spec;
  spec.family = *family;
  spec.n = j.contains("N") ? io::as_size(j["N"], what + ".N") : (spec.family == MapFamily::Robertson ||
                                                                     spec.family == MapFamily::GeneralizedRobertson
                                                                 ? 2
                                                                 : 0);
  if (spec.n == 0) throw FormatError(what + ": missing field 'N'");
  spec.k = j.contains("K") ? io::as_size(j["K"], what + ".K") : 1;
  if (spec.family == MapFamily::Robertson) spec.k = 1;

  if (spec.has_phases()) {
    spec.z = j.contains("z") ? phases_from_json(j["z"], spec.n, what + ".z") : UpperTriangular<Complex>(spec.n, 1.0);
  } else {
    if (j.contains("z")) throw FormatError(what + ": family '" + fam.get<std::string>() + "' takes no z");
    spec.z = UpperTriangular<Complex>(spec.n, 1.0);
  }
  if (spec.has_unitary()) {
    if (!j.contains("unitary") || j["unitary"].is_string()) {
      spec.unitary = unitary_from_name(j.value("unitary", std::string("J")), spec.k);
    } else {
      spec.unitary = matrix_from_json(j["unitary"], what + ".unitary");
    }
  } else if (j.contains("unitary")) {
    throw FormatError(what + ": family '" + fam.get<std::string>() + "' takes no unitary");
  }
  return spec;
}

/// {n_blocks, block_size, alphas, z, off_diagonal: [{i, j, matrix}], diagonal: [matrix]}
inline Json to_json(const BlockSpec& spec) {
  Json off = Json::array();
  for (std::size_t i = 0; i < spec.n_blocks; ++i)
    for (std::size_t j = i + 1; j < spec.n_blocks; ++j) {
      Json e;
      e["i"] = i + 1;
      e["j"] = j + 1;
      e["matrix"] = to_json(spec.blocks.at(i, j));
      off.push_back(std::move(e));
    }
  Json diag = Json::array();
  for (const auto& m : spec.diag_blocks) diag.push_back(to_json(m));
  Json j;
  j["n_blocks"] = spec.n_blocks;
  j["block_size"] = spec.block_size;
  j["alphas"] = spec.alphas;
  j["z"] = to_json(spec.z);
  j["off_diagonal"] = std::move(off);
  j["diagonal"] = std::move(diag);
  return j;
}

inline BlockSpec block_spec_from_json(const Json& j, const std::string& what = "block_spec") {
  io::require_object(j, what);
  io::reject_unknown(j, {"n_blocks", "block_size", "alphas", "z", "off_diagonal", "diagonal"}, what);
  BlockSpec spec;
  spec.n_blocks = io::as_size(io::field(j, "n_blocks", what), what + ".n_blocks");
  spec.block_size = io::as_size(io::field(j, "block_size", what), what + ".block_size");
  const std::size_t n = spec.n_blocks;
  if (n == 0 || spec.block_size == 0) throw FormatError(what + ": n_blocks and block_size must be positive");
  spec.alphas = io::as_doubles(io::field(j, "alphas", what), what + ".alphas");
  if (spec.alphas.size() != n) throw FormatError(what + ": alphas must have n_blocks entries");
  spec.z = phases_from_json(io::field(j, "z", what), n, what + ".z");

  spec.blocks = UpperTriangular<ComplexMatrix>(n);
  std::vector<bool> seen(UpperTriangular<ComplexMatrix>::count(n), false);
  const Json& off = io::field(j, "off_diagonal", what);
  if (!off.is_array()) throw FormatError(what + ".off_diagonal: expected an array");
  for (const auto& e : off) {
    const std::string w = what + ".off_diagonal[]";
    io::require_object(e, w);
    io::reject_unknown(e, {"i", "j", "matrix"}, w);
    const std::size_t i = io::as_size(io::field(e, "i", w), w + ".i");
    const std::size_t jj = io::as_size(io::field(e, "j", w), w + ".j");
    if (!(1 <= i && i < jj && jj <= n)) {
      throw FormatError(w + ": need 1 <= i < j <= n_blocks, got (" + std::to_string(i) + "," + std::to_string(jj) + ")");
    }
    const std::size_t idx = UpperTriangular<ComplexMatrix>::index(i - 1, jj - 1, n);
    if (seen[idx]) throw FormatError(w + ": duplicate pair (" + std::to_string(i) + "," + std::to_string(jj) + ")");
    seen[idx] = true;
    spec.blocks.at(i - 1, jj - 1) = matrix_from_json(io::field(e, "matrix", w), w + ".matrix");
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t jj = i + 1; jj < n; ++jj)
      if (!seen[UpperTriangular<ComplexMatrix>::index(i, jj, n)]) {
        throw FormatError(what + ": missing off-diagonal block (" + std::to_string(i + 1) + "," +
                          std::to_string(jj + 1) + ")");
      }

  const Json& diag = io::field(j, "diagonal", what);
  if (!diag.is_array() || diag.size() != n) throw FormatError(what + ".diagonal: expected n_blocks matrices");
  for (std::size_t i = 0; i < n; ++i) {
    spec.diag_blocks.push_back(matrix_from_json(diag[i], what + ".diagonal[" + std::to_string(i + 1) + "]"));
  }
  return spec;
}

}  // namespace posmap

#endif  // POSMAP_IO_HPP
