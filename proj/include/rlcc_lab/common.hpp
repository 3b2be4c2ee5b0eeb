#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rlcc {

// Invalid user input: bad config keys, inconsistent scenario, malformed files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (negative time step, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/inf showed up in parameters, gradients or features.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Units used throughout: time in microseconds, rates in Gbit/s, sizes in bits.
// One Gbit/s sustained for one microsecond is 1000 bits.
inline constexpr double kBitsPerGbpsUs = 1e3;

// Drops are reported in units of 64 KB RDMA writes.
inline constexpr double kPacketBits = 64.0 * 1024.0 * 8.0;

inline double bits_for(double rate_gbps, double dt_us) { return rate_gbps * dt_us * kBitsPerGbpsUs; }

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
}

// splitmix64 finalizer; used for seed derivation and hash splits.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream + 0x51ed270b27ULL));
}

}  // namespace rlcc
