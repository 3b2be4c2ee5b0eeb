#pragma once

#include <cstdint>
#include <string>

#include "rlcc_lab/common.hpp"

namespace rlcc {

struct SimConfig {
  double line_rate_gbps = 100.0;
  double base_rtt_us = 10.0;
  double buffer_bits = 4e6;
  double min_rate_gbps = 0.1;
  std::uint64_t seed = 1;
  double duration_us = 50'000.0;
  // Delay between probe receipt and the rate update it produces.
  double decision_latency_us = 2.0;
  // Period of MetricsSample events; <= 0 disables sampling.
  double sample_interval_us = 100.0;
  // Record per-flow rows in the trace (large for many flows).
  bool record_flows = false;

  void validate() const {
    if (!(line_rate_gbps > 0.0)) throw ConfigError("sim: line_rate_gbps must be > 0");
    if (!(base_rtt_us > 0.0)) throw ConfigError("sim: base_rtt_us must be > 0");
    if (!(buffer_bits > 0.0)) throw ConfigError("sim: buffer_bits must be > 0");
    if (!(min_rate_gbps > 0.0 && min_rate_gbps <= line_rate_gbps))
      throw ConfigError("sim: min_rate_gbps must be in (0, line_rate_gbps]");
    if (!(duration_us > 0.0)) throw ConfigError("sim: duration_us must be > 0");
    if (!(decision_latency_us >= 0.0)) throw ConfigError("sim: decision_latency_us must be >= 0");
  }
};

enum class ScenarioKind { ManyToOne, AllToAll, LongShort };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::ManyToOne: return "many_to_one";
    case ScenarioKind::AllToAll: return "all_to_all";
    case ScenarioKind::LongShort: return "long_short";
  }
  return "?";
}

inline ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "many_to_one") return ScenarioKind::ManyToOne;
  if (s == "all_to_all") return ScenarioKind::AllToAll;
  if (s == "long_short") return ScenarioKind::LongShort;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::ManyToOne;
  // Sender hosts. For all_to_all every host is also a receiver.
  int hosts = 4;
  // many_to_one: flows per sender; all_to_all: flows per (src, dst) pair.
  int flows_per_host = 1;
  int n_long = 0;
  int n_short = 0;
  double short_bytes = 256.0 * 1024.0;
  // First short-flow arrival; < 0 picks a seeded time in [warmup, duration/2].
  double short_start_us = -1.0;
  // Short flows arrive spread over this window after short_start_us.
  double short_spread_us = 1.0;
  double duration_us = 50'000.0;
  double warmup_us = 10'000.0;
  // Preloaded queue on every port (used to pin an equilibrium in oracle runs).
  double initial_occupancy_bits = 0.0;
  // Spread long-flow starts over the first base RTT.
  bool start_jitter = true;

  int flow_count() const {
    switch (kind) {
      case ScenarioKind::ManyToOne: return hosts * flows_per_host;
      case ScenarioKind::AllToAll: return hosts * (hosts - 1) * flows_per_host;
      case ScenarioKind::LongShort: return n_long + n_short;
    }
    return 0;
  }

  int port_count() const { return kind == ScenarioKind::AllToAll ? hosts : 1; }

  void validate() const {
    if (!(duration_us > 0.0)) throw ConfigError("scenario: duration_us must be > 0");
    if (!(warmup_us >= 0.0 && warmup_us < duration_us))
      throw ConfigError("scenario: warmup_us must be in [0, duration_us)");
    if (initial_occupancy_bits < 0.0) throw ConfigError("scenario: initial_occupancy_bits must be >= 0");
    switch (kind) {
      case ScenarioKind::ManyToOne:
        if (hosts < 0 || flows_per_host < 0) throw ConfigError("many_to_one: negative host/flow count");
        break;
      case ScenarioKind::AllToAll:
        if (hosts < 2 && hosts != 0) throw ConfigError("all_to_all: needs at least 2 hosts");
        if (flows_per_host < 0) throw ConfigError("all_to_all: negative flow count");
        break;
      case ScenarioKind::LongShort:
        if (n_long < 0 || n_short < 0) throw ConfigError("long_short: negative flow count");
        if (hosts < 1) throw ConfigError("long_short: needs at least 1 sender host");
        if (n_short > 0 && !(short_bytes > 0.0)) throw ConfigError("long_short: short_bytes must be > 0");
        if (short_spread_us < 0.0) throw ConfigError("long_short: short_spread_us must be >= 0");
        break;
    }
  }

  static ScenarioSpec many_to_one(int hosts, int flows_per_host) {
    ScenarioSpec s;
    s.kind = ScenarioKind::ManyToOne;
    s.hosts = hosts;
    s.flows_per_host = flows_per_host;
    return s;
  }

  static ScenarioSpec all_to_all(int hosts, int flows_per_pair) {
    ScenarioSpec s;
    s.kind = ScenarioKind::AllToAll;
    s.hosts = hosts;
    s.flows_per_host = flows_per_pair;
    return s;
  }

  static ScenarioSpec long_short(int n_long, int n_short, int hosts = 6) {
    ScenarioSpec s;
    s.kind = ScenarioKind::LongShort;
    s.hosts = hosts;
    s.n_long = n_long;
    s.n_short = n_short;
    return s;
  }

  // Many-to-one with N total flows spread over 4 senders (or fewer if N < 4).
  static ScenarioSpec incast(int n_flows) {
    const int hosts = n_flows >= 4 && n_flows % 4 == 0 ? 4 : (n_flows % 2 == 0 && n_flows >= 2 ? 2 : 1);
    return many_to_one(hosts, n_flows / hosts);
  }

  std::string key() const {
    std::string k = to_string(kind);
    switch (kind) {
      case ScenarioKind::ManyToOne:
      case ScenarioKind::AllToAll:
        k += "_" + std::to_string(hosts) + "x" + std::to_string(flows_per_host);
        break;
      case ScenarioKind::LongShort:
        k += "_" + std::to_string(n_long) + "L" + std::to_string(n_short) + "S";
        break;
    }
    return k;
  }
};

}  // namespace rlcc
