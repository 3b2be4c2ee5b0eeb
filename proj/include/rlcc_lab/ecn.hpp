#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "rlcc_lab/common.hpp"

namespace rlcc {

// RED-style ECN marking on queue occupancy.
class EcnMarker {
 public:
  double k_min_bits = 100e3;
  double k_max_bits = 400e3;
  double p_max = 0.01;

  EcnMarker() : rng_(0) {}
  EcnMarker(double k_min, double k_max, double pmax, std::uint64_t seed)
      : k_min_bits(k_min), k_max_bits(k_max), p_max(pmax), rng_(seed) {
    validate();
  }

  void validate(double buffer_bits = std::numeric_limits<double>::infinity()) const {
    if (!(k_min_bits >= 0.0 && k_min_bits < k_max_bits && k_max_bits <= buffer_bits))
      throw ConfigError("ecn: need 0 <= k_min < k_max <= buffer");
    if (!(p_max >= 0.0 && p_max <= 1.0)) throw ConfigError("ecn: p_max must be in [0, 1]");
  }

  double probability(double occupancy_bits) const {
    if (occupancy_bits < k_min_bits) return 0.0;
    if (occupancy_bits >= k_max_bits) return 1.0;
    return p_max * (occupancy_bits - k_min_bits) / (k_max_bits - k_min_bits);
  }

  // Always consumes one draw so the stream position only depends on the
  // number of probes, not on the occupancy history.
  bool mark(double occupancy_bits) {
    const double u = uniform_(rng_);
    return u < probability(occupancy_bits);
  }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace rlcc
