#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace imtex {

// Exit-code oriented error hierarchy. The CLI maps these to process exit
// codes: UsageError -> 1, DataError -> 2, NumericError -> 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : UsageError {
  using UsageError::UsageError;
};

// All randomness in the library flows through mt19937_64 (C++11 standard,
// bit-reproducible across platforms). Distributions are hand-rolled below
// instead of <random> adaptors, whose output is implementation-defined.
using Rng = std::mt19937_64;

// Derives an independent seed from a root seed and a purpose tag, so that
// e.g. data shuffling and weight init never share a stream.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
  // splitmix64 finalizer
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform double in [0, 1) from the top 53 bits of one mt19937_64 draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller standard normal (pairs; second value cached).
class NormalSampler {
 public:
  explicit NormalSampler(Rng& rng) : rng_(rng) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(rng_);
    double u2 = uniform01(rng_);
    while (u1 <= 1e-300) u1 = uniform01(rng_);
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  Rng& rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Uniform integer in [0, n) via modulo; bias is irrelevant for n << 2^64
// but the exact rule is part of the documented shuffle algorithm.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return rng() % n;
}

// In-place Fisher-Yates shuffle driven by mt19937_64(seed). This exact
// algorithm (forward pass, j = i + rng() % (n - i)) is the documented
// permutation behind SplitManifest reproducibility.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& items, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = items.size();
  if (n < 2) return;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(items[i], items[j]);
  }
}

// Round-to-nearest-even mantissa truncation, used to emulate reduced
// matmul precision (tf32 keeps 10 explicit mantissa bits, bfloat16 keeps 7).
inline float round_mantissa(float v, int keep_bits) {
  std::uint32_t u;
  std::memcpy(&u, &v, sizeof(u));
  const int drop = 23 - keep_bits;
  const std::uint32_t lsb = 1u << drop;
  const std::uint32_t bias = (lsb >> 1) + ((u >> drop) & 1u);
  u = (u + bias) & ~(lsb - 1u);
  float out;
  std::memcpy(&out, &u, sizeof(out));
  return out;
}

inline float round_tf32(float v) { return round_mantissa(v, 10); }
inline float round_bf16(float v) { return round_mantissa(v, 7); }

// FNV-1a, used for checkpoint content hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Suffix match on hierarchical dotted names: pattern "c_attn" matches
// "decoder.h.0.attn.c_attn" and "c_attn" but not "decoder.h.0.q_attn".
inline bool name_matches_pattern(const std::string& name,
                                 const std::string& pattern) {
  return name == pattern || ends_with(name, "." + pattern);
}

}  // namespace imtex
