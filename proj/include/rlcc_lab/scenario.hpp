#pragma once

#include <map>
#include <random>
#include <vector>

#include "rlcc_lab/engine.hpp"

namespace rlcc {

// Resolves the seeded short-flow arrival time of a long_short spec.
inline double short_arrival_us(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.short_start_us >= 0.0) return spec.short_start_us;
  std::mt19937_64 rng(derive_seed(seed, 77));
  std::uniform_real_distribution<double> u(spec.warmup_us, 0.5 * spec.duration_us);
  return spec.warmup_us < 0.5 * spec.duration_us ? u(rng) : spec.warmup_us;
}

// Wires ports and flows for a scenario. Every flow starts at its sender's
// line rate split evenly across the flows that sender owns, with a seeded
// start offset inside the first base RTT.
inline Engine build_scenario(const ScenarioSpec& spec, const SimConfig& cfg, ControllerFactory factory) {
  spec.validate();
  Engine eng(cfg);
  eng.set_controller_factory(std::move(factory));
  std::mt19937_64 rng(derive_seed(cfg.seed, 11));
  std::uniform_real_distribution<double> jitter(0.0, cfg.base_rtt_us);

  std::vector<FlowSpec> flows;
  switch (spec.kind) {
    case ScenarioKind::ManyToOne: {
      eng.add_port(spec.initial_occupancy_bits);
      for (int h = 0; h < spec.hosts; ++h)
        for (int k = 0; k < spec.flows_per_host; ++k) {
          FlowSpec f;
          f.src_host = h;
          f.port = 0;
          f.initial_rate_gbps = cfg.line_rate_gbps / spec.flows_per_host;
          flows.push_back(f);
        }
      break;
    }
    case ScenarioKind::AllToAll: {
      for (int h = 0; h < spec.hosts; ++h) eng.add_port(spec.initial_occupancy_bits);
      const int per_host = (spec.hosts - 1) * spec.flows_per_host;
      for (int h = 0; h < spec.hosts; ++h)
        for (int d = 0; d < spec.hosts; ++d) {
          if (d == h) continue;
          for (int k = 0; k < spec.flows_per_host; ++k) {
            FlowSpec f;
            f.src_host = h;
            f.port = d;
            f.initial_rate_gbps = cfg.line_rate_gbps / per_host;
            flows.push_back(f);
          }
        }
      break;
    }
    case ScenarioKind::LongShort: {
      eng.add_port(spec.initial_occupancy_bits);
      std::map<int, int> per_host;
      std::vector<int> host_of;
      for (int i = 0; i < spec.n_long + spec.n_short; ++i) {
        const int h = i % spec.hosts;
        host_of.push_back(h);
        per_host[h] += 1;
      }
      const double t0 = short_arrival_us(spec, cfg.seed);
      std::uniform_real_distribution<double> spread(0.0, spec.short_spread_us);
      for (int i = 0; i < spec.n_long + spec.n_short; ++i) {
        FlowSpec f;
        f.src_host = host_of[static_cast<std::size_t>(i)];
        f.port = 0;
        f.initial_rate_gbps = cfg.line_rate_gbps / per_host[f.src_host];
        if (i >= spec.n_long) {
          f.size_bits = spec.short_bytes * 8.0;
          f.start_us = t0 + spread(rng);
        }
        flows.push_back(f);
      }
      break;
    }
  }
  for (auto& f : flows) {
    if (!f.size_bits && spec.start_jitter) f.start_us = jitter(rng);
    eng.add_flow(f);
  }
  return eng;
}

}  // namespace rlcc
