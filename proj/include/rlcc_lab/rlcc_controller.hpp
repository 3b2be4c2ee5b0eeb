#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "rlcc_lab/controller.hpp"
#include "rlcc_lab/gbt.hpp"
#include "rlcc_lab/policy.hpp"

namespace rlcc {

// Any deterministic map from flattened window to raw output y.
using PolicyFn = std::function<double(std::span<const double>)>;

inline PolicyFn as_policy_fn(std::shared_ptr<const MlpPolicy> p) {
  return [p = std::move(p)](std::span<const double> x) { return p->forward(x); };
}

inline PolicyFn as_policy_fn(std::shared_ptr<const TreeEnsemble> e) {
  return [e = std::move(e)](std::span<const double> x) { return e->predict(x); };
}

struct DecisionRecord {
  int flow_id = 0;
  double now_us = 0.0;
  std::span<const double> features;  // window the output was computed from
  double raw_output = 0.0;
  double delta = 0.0;  // measured on the probe that triggered this decision
  double inflation = 1.0;
};

class DecisionSink {
 public:
  virtual ~DecisionSink() = default;
  virtual void on_decision(const DecisionRecord& r) = 0;
};

// MIMD controller: rate *= exp(clamp(policy(window))).
class RlccController final : public Controller {
 public:
  RlccController(PolicyFn model, RewardParams reward, ActionMapper mapper, int history, int flow_id,
                 DecisionSink* sink = nullptr)
      : model_(std::move(model)),
        reward_(reward),
        mapper_(mapper),
        window_(history, reward.target, 0.0),
        features_(static_cast<std::size_t>(2 * history)),
        flow_id_(flow_id),
        sink_(sink) {}

  double decide(const ProbeFeedback& fb) override {
    const double inflation = fb.rtt_us / fb.base_rtt_us;
    const double delta = compute_delta(reward_, inflation, fb.rate_gbps, fb.line_rate_gbps);
    window_.push(delta, last_action_);
    window_.flatten_into(features_);
    const double y = model_(features_);
    if (!std::isfinite(y)) throw NumericError("policy produced a non-finite output");
    last_action_ = mapper_.clamp(y);
    if (sink_) sink_->on_decision(DecisionRecord{flow_id_, fb.now_us, features_, y, delta, inflation});
    return fb.rate_gbps * std::exp(last_action_);
  }

  const ObservationWindow& window() const { return window_; }

 private:
  PolicyFn model_;
  RewardParams reward_;
  ActionMapper mapper_;
  ObservationWindow window_;
  std::vector<double> features_;
  double last_action_ = 0.0;
  int flow_id_;
  DecisionSink* sink_;
};

inline ControllerFactory rlcc_factory(PolicyFn model, RewardParams reward, ActionMapper mapper, int history,
                                      DecisionSink* sink = nullptr) {
  return [=](const FlowInfo& info) {
    return std::make_unique<RlccController>(model, reward, mapper, history, info.flow_id, sink);
  };
}

}  // namespace rlcc
