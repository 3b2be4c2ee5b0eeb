#pragma once

#include <algorithm>

#include "rlcc_lab/common.hpp"

namespace rlcc {

// Fluid FIFO queue of one congested egress port.
struct PortQueue {
  double occupancy_bits = 0.0;
  double capacity_gbps = 100.0;
  double buffer_bits = 4e6;
  double dropped_bits = 0.0;
  double delivered_bits = 0.0;
  double injected_bits = 0.0;
  double last_update_us = 0.0;
};

// Integrates the queue over `dt_us` with a constant aggregate inflow.
// Everything is closed form, so injected == delivered + dropped + occupancy
// holds up to floating-point rounding.
inline PortQueue advance_queue(PortQueue q, double aggregate_rate_gbps, double dt_us) {
  if (dt_us < 0.0) throw ContractViolation("advance_queue: negative dt");
  if (aggregate_rate_gbps < 0.0) throw ContractViolation("advance_queue: negative aggregate rate");
  if (dt_us == 0.0) return q;

  const double in_bits = bits_for(aggregate_rate_gbps, dt_us);
  const double service_bits = bits_for(q.capacity_gbps, dt_us);
  const double net_rate = aggregate_rate_gbps - q.capacity_gbps;

  double delivered = 0.0;
  double dropped = 0.0;
  double occ = q.occupancy_bits;
  if (net_rate >= 0.0) {
    delivered = service_bits;
    const double headroom = q.buffer_bits - occ;
    const double growth = in_bits - service_bits;
    if (growth > headroom) {
      dropped = growth - headroom;
      occ = q.buffer_bits;
    } else {
      occ += growth;
    }
  } else {
    delivered = std::min(service_bits, occ + in_bits);
    occ = occ + in_bits - delivered;
    if (occ < 0.0) occ = 0.0;
  }

  q.occupancy_bits = occ;
  q.delivered_bits += delivered;
  q.dropped_bits += dropped;
  q.injected_bits += in_bits;
  q.last_update_us += dt_us;
  return q;
}

inline double queueing_delay_us(const PortQueue& q) {
  return q.occupancy_bits / (q.capacity_gbps * kBitsPerGbpsUs);
}

// Probe round trip through one congested port.
inline double rtt_of(const PortQueue& q, double base_rtt_us) { return base_rtt_us + queueing_delay_us(q); }

}  // namespace rlcc
