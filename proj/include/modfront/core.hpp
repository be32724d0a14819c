#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace modfront {

// Dense row-major matrix of doubles. All DSP state in this project is kept in
// double precision; narrowing to float32 happens only at export boundaries.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

// Dense row-major rank-3 tensor, indexed (i, j, k) with k fastest.
struct Tensor3 {
  std::size_t d0 = 0;
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t a, std::size_t b, std::size_t c, double fill = 0.0)
      : d0(a), d1(b), d2(c), data(a * b * c, fill) {}

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * d1 + j) * d2 + k];
  }
  const double& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * d1 + j) * d2 + k];
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

// Seeded RNG with fixed output mapping. mt19937_64 is fully specified by the
// standard and the conversions below avoid std::*_distribution, whose output
// is implementation defined, so a seed reproduces bit-identical streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit mantissa.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without state caching: two draws per sample, deterministic.
  double gaussian() {
    double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant at the n used here.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

 private:
  std::mt19937_64 gen_;
};

inline void fisher_yates_shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Symmetric Hamming window, peak 1.0 at the midpoint for odd lengths.
inline std::vector<double> hamming_window(int len) {
  std::vector<double> w(static_cast<std::size_t>(len), 1.0);
  if (len < 2) return w;
  const double step = 6.283185307179586476925287 / (len - 1);
  for (int n = 0; n < len; ++n) w[n] = 0.54 - 0.46 * std::cos(step * n);
  return w;
}

// Output frame count of a valid-mode strided sliding window. Caller checks
// in_len >= kernel_len.
inline std::size_t strided_frames(std::size_t in_len, int kernel_len, int stride) {
  return (in_len - static_cast<std::size_t>(kernel_len)) / static_cast<std::size_t>(stride) + 1;
}

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = 14695981039346656037ull) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(const std::string& s);

}  // namespace modfront
