#pragma once

#include <algorithm>
#include <memory>

#include "rlcc_lab/common.hpp"
#include "rlcc_lab/controller.hpp"

namespace rlcc {

// ---------------------------------------------------------------------------
// DCQCN (simplified reaction point)
// ---------------------------------------------------------------------------

enum class IncreaseStage { FastRecovery, Additive, Hyper };

struct DcqcnParams {
  double g = 1.0 / 16.0;
  double rate_ai_gbps = 5.0;
  double rate_hai_gbps = 50.0;
  double timer_us = 55.0;
  double byte_counter_bits = 10e6 * 8.0;
  int fast_recovery_steps = 5;
  double min_rate_gbps = 0.1;
  double line_rate_gbps = 100.0;
};

struct DcqcnState {
  double current_rate = 100.0;  // RC
  double target_rate = 100.0;   // RT
  double alpha = 1.0;
  double timer_accum_us = 0.0;
  double byte_accum_bits = 0.0;
  double alpha_timer_us = 0.0;
  int timer_events = 0;  // increase events from the timer since the last cut
  int byte_events = 0;   // increase events from the byte counter since the last cut
  IncreaseStage stage = IncreaseStage::FastRecovery;
};

namespace detail {

inline void dcqcn_increase(DcqcnState& s, const DcqcnParams& p, bool from_timer) {
  (from_timer ? s.timer_events : s.byte_events) += 1;
  const int hi = std::max(s.timer_events, s.byte_events);
  const int lo = std::min(s.timer_events, s.byte_events);
  if (hi <= p.fast_recovery_steps) {
    s.stage = IncreaseStage::FastRecovery;
  } else if (lo > p.fast_recovery_steps) {
    s.stage = IncreaseStage::Hyper;
    s.target_rate += p.rate_hai_gbps;
  } else {
    s.stage = IncreaseStage::Additive;
    s.target_rate += p.rate_ai_gbps;
  }
  s.target_rate = std::min(s.target_rate, p.line_rate_gbps);
  s.current_rate = 0.5 * (s.current_rate + s.target_rate);
}

}  // namespace detail

// One reaction-point update. `marked` is the ECN echo of the latest probe,
// `elapsed_us` and `bits_sent` cover the time since the previous update.
inline double dcqcn_decide(DcqcnState& s, const DcqcnParams& p, bool marked, double elapsed_us, double bits_sent) {
  if (marked) {
    s.target_rate = s.current_rate;
    s.current_rate *= 1.0 - s.alpha / 2.0;
    s.alpha = (1.0 - p.g) * s.alpha + p.g;
    s.timer_accum_us = 0.0;
    s.byte_accum_bits = 0.0;
    s.alpha_timer_us = 0.0;
    s.timer_events = 0;
    s.byte_events = 0;
    s.stage = IncreaseStage::FastRecovery;
  } else {
    s.alpha_timer_us += elapsed_us;
    while (s.alpha_timer_us >= p.timer_us) {
      s.alpha_timer_us -= p.timer_us;
      s.alpha *= 1.0 - p.g;
    }
    s.timer_accum_us += elapsed_us;
    s.byte_accum_bits += bits_sent;
    while (s.timer_accum_us >= p.timer_us) {
      s.timer_accum_us -= p.timer_us;
      detail::dcqcn_increase(s, p, true);
    }
    while (s.byte_accum_bits >= p.byte_counter_bits) {
      s.byte_accum_bits -= p.byte_counter_bits;
      detail::dcqcn_increase(s, p, false);
    }
  }
  s.alpha = std::clamp(s.alpha, 0.0, 1.0);
  s.current_rate = std::clamp(s.current_rate, p.min_rate_gbps, p.line_rate_gbps);
  s.target_rate = std::clamp(s.target_rate, s.current_rate, p.line_rate_gbps);
  return s.current_rate;
}

class DcqcnController final : public Controller {
 public:
  DcqcnController(DcqcnParams p, double initial_rate) : p_(p) {
    s_.current_rate = initial_rate;
    s_.target_rate = initial_rate;
  }

  double decide(const ProbeFeedback& fb) override {
    s_.current_rate = fb.rate_gbps;  // engine may have clamped the last request
    return dcqcn_decide(s_, p_, fb.ecn_marked, fb.elapsed_us, fb.bits_sent);
  }

  const DcqcnState& state() const { return s_; }

 private:
  DcqcnParams p_;
  DcqcnState s_;
};

// ---------------------------------------------------------------------------
// Swift (rate-based simplification)
// ---------------------------------------------------------------------------

struct SwiftParams {
  double target_delay_us = 5.0;
  double ai_gbps = 1.0;
  double md_beta = 0.8;
  double max_md = 0.5;
  double min_rate_gbps = 0.1;
  double line_rate_gbps = 100.0;
};

struct SwiftState {
  double rate = 100.0;
  double last_decrease_time_us = -1e300;
};

// Additive increase below the delay target, delay-proportional multiplicative
// decrease above it, at most one decrease per measured RTT.
inline double swift_decide(SwiftState& s, const SwiftParams& p, double measured_rtt_us, double base_rtt_us,
                           double now_us) {
  if (measured_rtt_us < base_rtt_us) throw ContractViolation("swift_decide: rtt below base rtt");
  const double delay = measured_rtt_us - base_rtt_us;
  if (delay < p.target_delay_us) {
    s.rate += p.ai_gbps;
  } else if (now_us - s.last_decrease_time_us >= measured_rtt_us) {
    const double factor = std::max(1.0 - p.md_beta * (delay - p.target_delay_us) / delay, 1.0 - p.max_md);
    s.rate *= factor;
    s.last_decrease_time_us = now_us;
  }
  s.rate = std::clamp(s.rate, p.min_rate_gbps, p.line_rate_gbps);
  return s.rate;
}

class SwiftController final : public Controller {
 public:
  explicit SwiftController(SwiftParams p) : p_(p) {}

  double decide(const ProbeFeedback& fb) override {
    s_.rate = fb.rate_gbps;
    return swift_decide(s_, p_, fb.rtt_us, fb.base_rtt_us, fb.now_us);
  }

 private:
  SwiftParams p_;
  SwiftState s_;
};

inline ControllerFactory dcqcn_factory(DcqcnParams p) {
  return [p](const FlowInfo&) { return std::make_unique<DcqcnController>(p, p.line_rate_gbps); };
}

inline ControllerFactory swift_factory(SwiftParams p) {
  return [p](const FlowInfo&) { return std::make_unique<SwiftController>(p); };
}

}  // namespace rlcc
