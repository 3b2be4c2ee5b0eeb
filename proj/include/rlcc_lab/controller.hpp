#pragma once

#include <functional>
#include <memory>
#include <optional>

namespace rlcc {

// What a flow's controller learns from one returned probe.
struct ProbeFeedback {
  double now_us = 0.0;       // decision time
  double measured_at_us = 0.0;
  double rtt_us = 0.0;
  double base_rtt_us = 0.0;
  bool ecn_marked = false;
  double elapsed_us = 0.0;   // since this flow's previous decision
  double bits_sent = 0.0;    // since this flow's previous decision
  double rate_gbps = 0.0;    // rate in force while the probe was out
  double line_rate_gbps = 0.0;
};

struct FlowInfo {
  int flow_id = 0;
  int src_host = 0;
  int port = 0;
  int flows_on_port = 1;
};

class Controller {
 public:
  virtual ~Controller() = default;
  // Returns the requested new rate; the engine clamps it.
  virtual double decide(const ProbeFeedback& fb) = 0;
  // Overrides the engine's default start rate when set.
  virtual std::optional<double> initial_rate() const { return std::nullopt; }
};

using ControllerFactory = std::function<std::unique_ptr<Controller>(const FlowInfo&)>;

// Pins a constant rate.
class FixedRateController final : public Controller {
 public:
  explicit FixedRateController(double rate_gbps) : rate_(rate_gbps) {}
  double decide(const ProbeFeedback&) override { return rate_; }
  std::optional<double> initial_rate() const override { return rate_; }

 private:
  double rate_;
};

// Always asks for line rate.
class GreedyController final : public Controller {
 public:
  double decide(const ProbeFeedback& fb) override { return fb.line_rate_gbps; }
};

inline ControllerFactory fixed_rate_factory(double rate_gbps) {
  return [rate_gbps](const FlowInfo&) { return std::make_unique<FixedRateController>(rate_gbps); };
}

// Every flow pinned to line_rate / (flows on its port).
inline ControllerFactory fair_share_factory(double line_rate_gbps) {
  return [line_rate_gbps](const FlowInfo& info) {
    return std::make_unique<FixedRateController>(line_rate_gbps / std::max(1, info.flows_on_port));
  };
}

inline ControllerFactory greedy_factory() {
  return [](const FlowInfo&) { return std::make_unique<GreedyController>(); };
}

}  // namespace rlcc
