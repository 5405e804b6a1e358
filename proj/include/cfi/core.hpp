#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace cfi {

inline constexpr const char* version() { return "0.1.0"; }

// Malformed inputs: files, schemas, shapes, level vocabularies.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures: non-finite inputs, singular systems, unreachable targets.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// All randomness enters through explicitly passed generators. Sub-streams are
// derived from a root seed so results are invariant to worker count.
using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(seed ^ mix_seed(stream));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace cfi
