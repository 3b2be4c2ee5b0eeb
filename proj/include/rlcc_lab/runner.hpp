#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "rlcc_lab/baselines.hpp"
#include "rlcc_lab/controller.hpp"
#include "rlcc_lab/gbt.hpp"
#include "rlcc_lab/policy.hpp"
#include "rlcc_lab/rlcc_controller.hpp"
#include "rlcc_lab/scenario.hpp"

namespace rlcc {

enum class ControllerKind { Dcqcn, Swift, RlccMlp, RlccTree, FairShare, Greedy };

inline std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Dcqcn: return "dcqcn";
    case ControllerKind::Swift: return "swift";
    case ControllerKind::RlccMlp: return "rlcc-mlp";
    case ControllerKind::RlccTree: return "rlcc-tree";
    case ControllerKind::FairShare: return "fair-share";
    case ControllerKind::Greedy: return "greedy";
  }
  return "?";
}

inline ControllerKind parse_controller_kind(const std::string& s) {
  if (s == "dcqcn") return ControllerKind::Dcqcn;
  if (s == "swift") return ControllerKind::Swift;
  if (s == "rlcc-mlp" || s == "mlp") return ControllerKind::RlccMlp;
  if (s == "rlcc-tree" || s == "tree") return ControllerKind::RlccTree;
  if (s == "fair-share") return ControllerKind::FairShare;
  if (s == "greedy") return ControllerKind::Greedy;
  throw ConfigError("unknown controller kind '" + s + "'");
}

struct ControllerSpec {
  ControllerKind kind = ControllerKind::Swift;
  DcqcnParams dcqcn;
  EcnMarker ecn;  // thresholds only; the engine seeds its own streams
  SwiftParams swift;
  std::shared_ptr<const MlpPolicy> mlp;
  std::shared_ptr<const TreeEnsemble> tree;
  RewardParams reward;
  ActionMapper mapper;
  int history = 5;
  // >= 0 overrides SimConfig::decision_latency_us
  double decision_latency_us = -1.0;

  static ControllerSpec of(ControllerKind k) {
    ControllerSpec s;
    s.kind = k;
    return s;
  }
  static ControllerSpec mlp_policy(std::shared_ptr<const MlpPolicy> p, RewardParams r = {}) {
    ControllerSpec s;
    s.kind = ControllerKind::RlccMlp;
    s.history = p->inputs() / 2;
    s.mlp = std::move(p);
    s.reward = r;
    return s;
  }
  static ControllerSpec tree_policy(std::shared_ptr<const TreeEnsemble> e, RewardParams r = {}) {
    ControllerSpec s;
    s.kind = ControllerKind::RlccTree;
    s.history = e->n_features / 2;
    s.tree = std::move(e);
    s.reward = r;
    return s;
  }
};

inline ControllerFactory make_factory(const ControllerSpec& c, const SimConfig& cfg, DecisionSink* sink = nullptr) {
  switch (c.kind) {
    case ControllerKind::Dcqcn: {
      auto p = c.dcqcn;
      p.line_rate_gbps = cfg.line_rate_gbps;
      p.min_rate_gbps = cfg.min_rate_gbps;
      return dcqcn_factory(p);
    }
    case ControllerKind::Swift: {
      auto p = c.swift;
      p.line_rate_gbps = cfg.line_rate_gbps;
      p.min_rate_gbps = cfg.min_rate_gbps;
      return swift_factory(p);
    }
    case ControllerKind::RlccMlp:
      if (!c.mlp) throw ConfigError("controller rlcc-mlp needs a policy checkpoint");
      return rlcc_factory(as_policy_fn(c.mlp), c.reward, c.mapper, c.history, sink);
    case ControllerKind::RlccTree:
      if (!c.tree) throw ConfigError("controller rlcc-tree needs an ensemble file");
      return rlcc_factory(as_policy_fn(c.tree), c.reward, c.mapper, c.history, sink);
    case ControllerKind::FairShare: return fair_share_factory(cfg.line_rate_gbps);
    case ControllerKind::Greedy: return greedy_factory();
  }
  throw ConfigError("unhandled controller kind");
}

struct MetricsReport {
  std::string scenario;
  std::string controller;
  int flows = 0;
  double normalized_goodput = 0.0;
  double mean_latency_us = 0.0;
  double p99_latency_us = 0.0;
  double drops_per_flow = 0.0;  // 64 KB-packet equivalents
  double jain_fairness = 1.0;
  double long_bw_normalized = 0.0;
  double slowdown = 1.0;           // vs ideal unimpeded completion
  double slowdown_base_rtt = 0.0;  // completion time / base RTT
  double steady_state_inflation = 1.0;
  int shorts_completed = 0;
  double conservation_error = 0.0;  // max relative per-port imbalance
};

inline double jain_index(std::span<const double> x) {
  if (x.empty()) return 1.0;
  double s = 0.0, s2 = 0.0;
  for (double v : x) {
    s += v;
    s2 += v * v;
  }
  if (s2 <= 0.0) return 1.0;
  return s * s / (static_cast<double>(x.size()) * s2);
}

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  const double rank = std::ceil(q * static_cast<double>(v.size()));
  const std::size_t k = std::min(v.size() - 1, static_cast<std::size_t>(std::max(rank, 1.0)) - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

// injected = delivered + dropped + occupancy, relative to injected.
inline double conservation_error(const PortQueue& q) {
  const double lhs = q.injected_bits;
  const double rhs = q.delivered_bits + q.dropped_bits + q.occupancy_bits;
  return std::abs(lhs - rhs) / std::max(lhs, 1.0);
}

struct BenchRun {
  MetricsReport report;
  MetricsTrace trace;
  std::vector<double> short_start_us;
  std::vector<double> short_completion_us;  // NaN if unfinished
};

// Runs `spec` under `controller`; metrics cover [warmup, duration] only.
inline BenchRun run_scenario(const ScenarioSpec& spec, const ControllerSpec& controller, SimConfig cfg,
                             DecisionSink* sink = nullptr) {
  spec.validate();
  if (controller.kind == ControllerKind::RlccMlp && controller.mlp && controller.mlp->inputs() != 2 * controller.history)
    throw ConfigError("rlcc-mlp: policy input width does not match the observation window");
  if (controller.kind == ControllerKind::RlccTree && controller.tree && controller.tree->n_features != 2 * controller.history &&
      !controller.tree->trees.empty())
    throw ConfigError("rlcc-tree: ensemble feature width does not match the observation window");
  cfg.duration_us = spec.duration_us;
  if (controller.decision_latency_us >= 0.0) cfg.decision_latency_us = controller.decision_latency_us;
  Engine eng = build_scenario(spec, cfg, make_factory(controller, cfg, sink));
  eng.set_ecn(controller.ecn.k_min_bits, controller.ecn.k_max_bits, controller.ecn.p_max);
  eng.run_until(spec.warmup_us);
  eng.begin_window();
  eng.run_until(spec.duration_us);
  const WindowStats w = eng.window_stats();

  BenchRun out;
  MetricsReport& r = out.report;
  r.scenario = spec.key();
  r.controller = to_string(controller.kind);
  r.flows = static_cast<int>(eng.flows().size());
  const double window = w.duration_us();
  const double line = cfg.line_rate_gbps;

  int ports_in_use = 0;
  double delivered = 0.0, dropped = 0.0;
  for (std::size_t i = 0; i < eng.port_count(); ++i) {
    if (eng.flows_on_port(static_cast<int>(i)) == 0) continue;
    ++ports_in_use;
    delivered += w.ports[i].delivered_bits;
    dropped += w.ports[i].dropped_bits;
    r.conservation_error = std::max(r.conservation_error, conservation_error(eng.port(static_cast<int>(i))));
  }
  if (ports_in_use > 0 && window > 0.0) r.normalized_goodput = delivered / bits_for(line * ports_in_use, window);
  if (r.flows > 0) r.drops_per_flow = dropped / kPacketBits / r.flows;

  if (!w.rtt_samples_us.empty()) {
    const double sum = std::accumulate(w.rtt_samples_us.begin(), w.rtt_samples_us.end(), 0.0);
    r.mean_latency_us = sum / static_cast<double>(w.rtt_samples_us.size());
    r.p99_latency_us = percentile(w.rtt_samples_us, 0.99);
    r.steady_state_inflation = r.mean_latency_us / cfg.base_rtt_us;
  }

  std::vector<double> long_goodput;
  double long_bits = 0.0;
  double sd_ideal = 0.0, sd_base = 0.0;
  for (const auto& f : eng.flows()) {
    const auto i = static_cast<std::size_t>(f.flow_id);
    if (f.is_long) {
      const double g = w.flow_sent_bits[i] - w.flow_dropped_bits[i];
      long_goodput.push_back(g);
      long_bits += g;
    } else {
      out.short_start_us.push_back(f.start_time_us);
      out.short_completion_us.push_back(f.completion_time_us.value_or(std::nan("")));
      if (f.completion_time_us) {
        const double fct = *f.completion_time_us - f.start_time_us;
        sd_ideal += fct / (f.size_bits / (line * kBitsPerGbpsUs) + cfg.base_rtt_us);
        sd_base += fct / cfg.base_rtt_us;
        ++r.shorts_completed;
      }
    }
  }
  r.jain_fairness = jain_index(long_goodput);
  if (window > 0.0) r.long_bw_normalized = long_bits / bits_for(line, window);
  if (r.shorts_completed > 0) {
    r.slowdown = sd_ideal / r.shorts_completed;
    r.slowdown_base_rtt = sd_base / r.shorts_completed;
  }
  out.trace = eng.trace();
  return out;
}

inline MetricsReport run_benchmark(const ScenarioSpec& spec, const ControllerSpec& controller, const SimConfig& cfg) {
  return run_scenario(spec, controller, cfg).report;
}

}  // namespace rlcc
