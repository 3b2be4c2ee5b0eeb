#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "rlcc_lab/common.hpp"
#include "rlcc_lab/config.hpp"
#include "rlcc_lab/controller.hpp"
#include "rlcc_lab/ecn.hpp"
#include "rlcc_lab/queue.hpp"

namespace rlcc {

enum class EventKind : std::uint8_t { MetricsSample, FlowStart, FlowEnd, ProbeArrival, DecisionReady };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::MetricsSample: return "MetricsSample";
    case EventKind::FlowStart: return "FlowStart";
    case EventKind::FlowEnd: return "FlowEnd";
    case EventKind::ProbeArrival: return "ProbeArrival";
    case EventKind::DecisionReady: return "DecisionReady";
  }
  return "?";
}

struct Event {
  double time_us = 0.0;
  EventKind kind = EventKind::MetricsSample;
  int flow_id = -1;  // -1 for engine-level events
  std::uint64_t seq = 0;
  // ProbeArrival -> DecisionReady payload
  double rtt_us = 0.0;
  double measured_at_us = 0.0;
  bool marked = false;
  // FlowEnd: only the most recently scheduled one is live
  std::uint64_t version = 0;

  // Lexicographic (time, flow_id, seq).
  bool operator>(const Event& o) const {
    if (time_us != o.time_us) return time_us > o.time_us;
    if (flow_id != o.flow_id) return flow_id > o.flow_id;
    return seq > o.seq;
  }
};

struct EventOutcome {
  EventKind kind = EventKind::MetricsSample;
  double time_us = 0.0;
  int flow_id = -1;
  bool stale = false;  // event referred to a finished flow or superseded FlowEnd
};

struct FlowSpec {
  int src_host = 0;
  int port = 0;
  double start_us = 0.0;
  std::optional<double> size_bits;  // finite transfer; nullopt = long-lived
  double initial_rate_gbps = 0.0;   // <= 0 means line rate
};

struct FlowState {
  int flow_id = 0;
  int src_host = 0;
  int port = 0;
  bool is_long = true;
  double rate_gbps = 0.0;
  std::unique_ptr<Controller> controller;
  std::uint64_t probe_seq = 0;
  std::optional<double> bits_remaining;
  double size_bits = 0.0;
  double start_time_us = 0.0;
  std::optional<double> completion_time_us;
  bool active = false;
  double last_rtt_us = 0.0;

  // lazy accounting, settled at every rate change
  double sent_bits = 0.0;
  double dropped_bits = 0.0;
  double last_settle_us = 0.0;
  double drop_index_at_settle = 0.0;
  double sent_at_last_decision = 0.0;
  double last_decision_us = 0.0;
  std::uint64_t end_version = 0;
  double initial_rate_gbps = 0.0;
};

struct PortSample {
  double occupancy_bits = 0.0;
  double dropped_bits = 0.0;
  double delivered_bits = 0.0;
  double injected_bits = 0.0;
  double aggregate_rate_gbps = 0.0;
};

struct FlowSample {
  int flow_id = 0;
  int port = 0;
  double rate_gbps = 0.0;
  double rtt_us = 0.0;
};

struct TraceSample {
  double time_us = 0.0;
  double long_rate_gbps = 0.0;   // aggregate of active long-lived flows
  double short_rate_gbps = 0.0;  // aggregate of active finite flows
  std::vector<PortSample> ports;
  std::vector<FlowSample> flows;
};

struct MetricsTrace {
  std::vector<TraceSample> samples;

  // One row per flow per sample; engine-level rows (flow_id = -1, one per port)
  // when per-flow recording is off.
  void write_csv(std::ostream& os) const {
    os << "time_us,flow_id,rate_gbps,rtt_us,port_occupancy_bits,dropped_bits,delivered_bits\n";
    os.precision(17);
    for (const auto& s : samples) {
      if (!s.flows.empty()) {
        for (const auto& f : s.flows) {
          const auto& p = s.ports.at(static_cast<std::size_t>(f.port));
          os << s.time_us << ',' << f.flow_id << ',' << f.rate_gbps << ',' << f.rtt_us << ',' << p.occupancy_bits
             << ',' << p.dropped_bits << ',' << p.delivered_bits << '\n';
        }
      } else {
        for (const auto& p : s.ports) {
          os << s.time_us << ",-1," << p.aggregate_rate_gbps << ",0," << p.occupancy_bits << ',' << p.dropped_bits
             << ',' << p.delivered_bits << '\n';
        }
      }
    }
  }
};

// Accounting over [start_us, end_us], see Engine::begin_window / window_stats.
struct WindowStats {
  double start_us = 0.0;
  double end_us = 0.0;
  std::vector<double> flow_sent_bits;
  std::vector<double> flow_dropped_bits;
  std::vector<PortSample> ports;  // deltas over the window (occupancy: end value)
  std::vector<double> rtt_samples_us;

  double duration_us() const { return end_us - start_us; }
};

class Engine {
 public:
  explicit Engine(SimConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;
  Engine(Engine&&) = default;
  Engine& operator=(Engine&&) = default;

  const SimConfig& config() const { return cfg_; }

  void set_controller_factory(ControllerFactory f) { factory_ = std::move(f); }

  void set_ecn(double k_min_bits, double k_max_bits, double p_max) {
    ecn_k_min_ = k_min_bits;
    ecn_k_max_ = k_max_bits;
    ecn_p_max_ = p_max;
    for (std::size_t i = 0; i < ports_.size(); ++i) ports_[i].marker = make_marker(static_cast<int>(i));
  }

  int add_port(double initial_occupancy_bits = 0.0) {
    if (started_) throw ContractViolation("add_port after the simulation started");
    Port p;
    p.q.capacity_gbps = cfg_.line_rate_gbps;
    p.q.buffer_bits = cfg_.buffer_bits;
    p.q.occupancy_bits = std::clamp(initial_occupancy_bits, 0.0, cfg_.buffer_bits);
    p.q.injected_bits = p.q.occupancy_bits;  // preloaded bits count as injected
    p.marker = make_marker(static_cast<int>(ports_.size()));
    ports_.push_back(std::move(p));
    return static_cast<int>(ports_.size()) - 1;
  }

  int add_flow(const FlowSpec& spec) {
    if (started_) throw ContractViolation("add_flow after the simulation started");
    if (spec.port < 0 || spec.port >= static_cast<int>(ports_.size()))
      throw ConfigError("add_flow: unknown port " + std::to_string(spec.port));
    if (spec.start_us < 0.0) throw ConfigError("add_flow: negative start time");
    if (spec.size_bits && !(*spec.size_bits > 0.0)) throw ConfigError("add_flow: finite flow needs size > 0");
    FlowState f;
    f.flow_id = static_cast<int>(flows_.size());
    f.src_host = spec.src_host;
    f.port = spec.port;
    f.is_long = !spec.size_bits.has_value();
    f.bits_remaining = spec.size_bits;
    f.size_bits = spec.size_bits.value_or(0.0);
    f.start_time_us = spec.start_us;
    f.initial_rate_gbps = spec.initial_rate_gbps > 0.0 ? spec.initial_rate_gbps : cfg_.line_rate_gbps;
    ports_[static_cast<std::size_t>(spec.port)].flow_count += 1;
    flows_.push_back(std::move(f));
    push(Event{spec.start_us, EventKind::FlowStart, flows_.back().flow_id});
    return flows_.back().flow_id;
  }

  double now() const { return now_; }
  bool empty() const { return events_.empty(); }
  std::size_t processed_events() const { return processed_; }
  const std::vector<FlowState>& flows() const { return flows_; }
  std::size_t port_count() const { return ports_.size(); }
  const PortQueue& port(int i) const { return ports_.at(static_cast<std::size_t>(i)).q; }
  double port_rate(int i) const { return ports_.at(static_cast<std::size_t>(i)).aggregate_rate; }
  int flows_on_port(int i) const { return ports_.at(static_cast<std::size_t>(i)).flow_count; }
  const MetricsTrace& trace() const { return trace_; }

  // Pops and processes the earliest event.
  EventOutcome step() {
    if (events_.empty()) throw ContractViolation("step on an empty event queue");
    ensure_started();
    Event ev = events_.top();
    events_.pop();
    if (ev.time_us < now_) throw ContractViolation("event scheduled in the past");
    now_ = ev.time_us;
    ++processed_;
    EventOutcome out{ev.kind, ev.time_us, ev.flow_id, false};
    if (ev.kind == EventKind::MetricsSample) {
      take_sample();
      if (cfg_.sample_interval_us > 0.0) push(Event{now_ + cfg_.sample_interval_us, EventKind::MetricsSample, -1});
      return out;
    }
    if (ev.flow_id < 0 || ev.flow_id >= static_cast<int>(flows_.size()))
      throw ConfigError("event for unknown flow id " + std::to_string(ev.flow_id));
    FlowState& f = flows_[static_cast<std::size_t>(ev.flow_id)];
    switch (ev.kind) {
      case EventKind::FlowStart: on_flow_start(f); break;
      case EventKind::FlowEnd: out.stale = !on_flow_end(f, ev.version); break;
      case EventKind::ProbeArrival: out.stale = !on_probe_arrival(f); break;
      case EventKind::DecisionReady: out.stale = !on_decision(f, ev); break;
      case EventKind::MetricsSample: break;
    }
    return out;
  }

  // Processes every event with time <= t_us, then brings all state to t_us.
  void run_until(double t_us) {
    ensure_started();
    while (!events_.empty() && events_.top().time_us <= t_us) step();
    if (t_us > now_) now_ = t_us;
    sync_all();
  }

  // Runs to `duration_us` (absolute simulated time) and returns the trace.
  const MetricsTrace& run(double duration_us) {
    run_until(duration_us);
    return trace_;
  }

  // Starts a fresh accounting window at the current time.
  void begin_window() {
    sync_all();
    window_start_ = now_;
    window_flow_sent_.assign(flows_.size(), 0.0);
    window_flow_dropped_.assign(flows_.size(), 0.0);
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      window_flow_sent_[i] = flows_[i].sent_bits;
      window_flow_dropped_[i] = flows_[i].dropped_bits;
    }
    window_ports_.clear();
    for (const auto& p : ports_) window_ports_.push_back(snapshot(p));
    rtt_samples_.clear();
    window_open_ = true;
  }

  WindowStats window_stats() {
    sync_all();
    WindowStats w;
    w.start_us = window_open_ ? window_start_ : 0.0;
    w.end_us = now_;
    w.flow_sent_bits.resize(flows_.size());
    w.flow_dropped_bits.resize(flows_.size());
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      const double s0 = window_open_ ? window_flow_sent_[i] : 0.0;
      const double d0 = window_open_ ? window_flow_dropped_[i] : 0.0;
      w.flow_sent_bits[i] = flows_[i].sent_bits - s0;
      w.flow_dropped_bits[i] = flows_[i].dropped_bits - d0;
    }
    for (std::size_t i = 0; i < ports_.size(); ++i) {
      PortSample s = snapshot(ports_[i]);
      if (window_open_) {
        const auto& b = window_ports_[i];
        s.dropped_bits -= b.dropped_bits;
        s.delivered_bits -= b.delivered_bits;
        s.injected_bits -= b.injected_bits;
      }
      w.ports.push_back(s);
    }
    w.rtt_samples_us = rtt_samples_;
    return w;
  }

 private:
  struct Port {
    PortQueue q;
    double aggregate_rate = 0.0;
    double drop_index = 0.0;  // running sum of dropped/aggregate_rate
    int flow_count = 0;
    EcnMarker marker;
  };

  EcnMarker make_marker(int port) const {
    return EcnMarker(ecn_k_min_, std::min(ecn_k_max_, cfg_.buffer_bits), ecn_p_max_,
                     derive_seed(cfg_.seed, 1000 + static_cast<std::uint64_t>(port)));
  }

  void push(Event ev) {
    ev.seq = next_seq_++;
    events_.push(ev);
  }

  void ensure_started() {
    if (started_) return;
    started_ = true;
    if (cfg_.sample_interval_us > 0.0) push(Event{0.0, EventKind::MetricsSample, -1});
  }

  static PortSample snapshot(const Port& p) {
    return PortSample{p.q.occupancy_bits, p.q.dropped_bits, p.q.delivered_bits, p.q.injected_bits, p.aggregate_rate};
  }

  void advance_port(Port& p) {
    const double dt = now_ - p.q.last_update_us;
    if (dt <= 0.0) return;
    const double dropped_before = p.q.dropped_bits;
    p.q = advance_queue(p.q, p.aggregate_rate, dt);
    p.q.last_update_us = now_;
    const double dropped = p.q.dropped_bits - dropped_before;
    if (dropped > 0.0 && p.aggregate_rate > 0.0) p.drop_index += dropped / p.aggregate_rate;
  }

  // Port of `f` must already be advanced to now_.
  void settle(FlowState& f) {
    Port& p = ports_[static_cast<std::size_t>(f.port)];
    if (f.active) {
      const double dt = now_ - f.last_settle_us;
      const double sent = bits_for(f.rate_gbps, dt);
      f.sent_bits += sent;
      f.dropped_bits += f.rate_gbps * (p.drop_index - f.drop_index_at_settle);
      if (f.bits_remaining) *f.bits_remaining = std::max(0.0, *f.bits_remaining - sent);
    }
    f.last_settle_us = now_;
    f.drop_index_at_settle = p.drop_index;
  }

  void sync_all() {
    for (auto& p : ports_) advance_port(p);
    for (auto& f : flows_) settle(f);
  }

  void set_rate(FlowState& f, double rate) {
    Port& p = ports_[static_cast<std::size_t>(f.port)];
    p.aggregate_rate += rate - f.rate_gbps;
    if (p.aggregate_rate < 0.0) p.aggregate_rate = 0.0;
    f.rate_gbps = rate;
  }

  void recompute_port_rate(Port& p, int port_index) {
    double sum = 0.0;
    for (const auto& f : flows_)
      if (f.active && f.port == port_index) sum += f.rate_gbps;
    p.aggregate_rate = sum;
  }

  void schedule_end(FlowState& f) {
    if (!f.bits_remaining) return;
    ++f.end_version;
    const double t_end = now_ + *f.bits_remaining / (f.rate_gbps * kBitsPerGbpsUs);
    Event ev{t_end, EventKind::FlowEnd, f.flow_id};
    ev.version = f.end_version;
    push(ev);
  }

  void send_probe(FlowState& f) {
    const Port& p = ports_[static_cast<std::size_t>(f.port)];
    ++f.probe_seq;
    push(Event{now_ + rtt_of(p.q, cfg_.base_rtt_us), EventKind::ProbeArrival, f.flow_id});
  }

  void on_flow_start(FlowState& f) {
    Port& p = ports_[static_cast<std::size_t>(f.port)];
    advance_port(p);
    if (!factory_) throw ConfigError("no controller factory installed");
    f.controller = factory_(FlowInfo{f.flow_id, f.src_host, f.port, p.flow_count});
    double rate = f.initial_rate_gbps;
    if (auto r = f.controller->initial_rate()) rate = *r;
    rate = std::clamp(rate, cfg_.min_rate_gbps, cfg_.line_rate_gbps);
    settle(f);
    f.active = true;
    f.last_decision_us = now_;
    f.sent_at_last_decision = f.sent_bits;
    set_rate(f, rate);
    schedule_end(f);
    send_probe(f);
  }

  bool on_flow_end(FlowState& f, std::uint64_t version) {
    if (!f.active || version != f.end_version) return false;
    Port& p = ports_[static_cast<std::size_t>(f.port)];
    advance_port(p);
    settle(f);
    f.bits_remaining = 0.0;
    f.completion_time_us = now_ + rtt_of(p.q, cfg_.base_rtt_us);
    set_rate(f, 0.0);
    f.active = false;
    if (active_count_on(f.port) == 0) recompute_port_rate(p, f.port);
    return true;
  }

  int active_count_on(int port) const {
    int n = 0;
    for (const auto& f : flows_)
      if (f.active && f.port == port) ++n;
    return n;
  }

  bool on_probe_arrival(FlowState& f) {
    if (!f.active) return false;
    Port& p = ports_[static_cast<std::size_t>(f.port)];
    advance_port(p);
    const double rtt = rtt_of(p.q, cfg_.base_rtt_us);
    const bool marked = p.marker.mark(p.q.occupancy_bits);
    f.last_rtt_us = rtt;
    if (window_open_) rtt_samples_.push_back(rtt);
    Event ev{now_ + cfg_.decision_latency_us, EventKind::DecisionReady, f.flow_id};
    ev.rtt_us = rtt;
    ev.measured_at_us = now_;
    ev.marked = marked;
    push(ev);
    return true;
  }

  bool on_decision(FlowState& f, const Event& ev) {
    if (!f.active) return false;
    Port& p = ports_[static_cast<std::size_t>(f.port)];
    advance_port(p);
    settle(f);
    ProbeFeedback fb;
    fb.now_us = now_;
    fb.measured_at_us = ev.measured_at_us;
    fb.rtt_us = ev.rtt_us;
    fb.base_rtt_us = cfg_.base_rtt_us;
    fb.ecn_marked = ev.marked;
    fb.elapsed_us = now_ - f.last_decision_us;
    fb.bits_sent = f.sent_bits - f.sent_at_last_decision;
    fb.rate_gbps = f.rate_gbps;
    fb.line_rate_gbps = cfg_.line_rate_gbps;
    const double requested = f.controller->decide(fb);
    if (!std::isfinite(requested))
      throw NumericError("controller for flow " + std::to_string(f.flow_id) + " returned a non-finite rate");
    f.last_decision_us = now_;
    f.sent_at_last_decision = f.sent_bits;
    set_rate(f, std::clamp(requested, cfg_.min_rate_gbps, cfg_.line_rate_gbps));
    schedule_end(f);
    send_probe(f);
    return true;
  }

  void take_sample() {
    sync_all();
    TraceSample s;
    s.time_us = now_;
    for (const auto& p : ports_) s.ports.push_back(snapshot(p));
    for (const auto& f : flows_) {
      if (!f.active) continue;
      (f.is_long ? s.long_rate_gbps : s.short_rate_gbps) += f.rate_gbps;
      if (cfg_.record_flows) s.flows.push_back(FlowSample{f.flow_id, f.port, f.rate_gbps, f.last_rtt_us});
    }
    trace_.samples.push_back(std::move(s));
  }

  SimConfig cfg_;
  ControllerFactory factory_;
  std::vector<Port> ports_;
  std::vector<FlowState> flows_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0.0;
  bool started_ = false;
  std::size_t processed_ = 0;
  MetricsTrace trace_;

  double ecn_k_min_ = 100e3;
  double ecn_k_max_ = 400e3;
  double ecn_p_max_ = 0.01;

  bool window_open_ = false;
  double window_start_ = 0.0;
  std::vector<double> window_flow_sent_;
  std::vector<double> window_flow_dropped_;
  std::vector<PortSample> window_ports_;
  std::vector<double> rtt_samples_;
};

}  // namespace rlcc
