#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rlcc_lab/policy.hpp"
#include "rlcc_lab/runner.hpp"

namespace rlcc {

struct Transition {
  std::vector<double> features;
  double delta = 0.0;       // outcome measured on the next probe after acting
  double raw_output = 0.0;  // y before clamping
  int flow_id = 0;
};

class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("rollout buffer capacity must be > 0");
    items_.reserve(capacity);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool full() const { return items_.size() >= capacity_; }
  void push(Transition t) {
    if (full()) throw ContractViolation("push into a full rollout buffer");
    require_finite(t.delta, "transition delta");
    items_.push_back(std::move(t));
  }
  void clear() { items_.clear(); }
  const std::vector<Transition>& transitions() const { return items_; }

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
};

enum class DeltaWeighting {
  PerStep,         // each transition weighted by its own delta
  TrajectoryMean,  // each transition weighted by its flow's mean delta in the buffer
};

// g = sum_t w_t * dy/dtheta(o_t). Transitions whose recorded output sits
// outside the action clamp contribute nothing (the action is flat there).
inline std::vector<double> accumulate_gradient(const MlpPolicy& policy, const RolloutBuffer& buffer,
                                               const ActionMapper& mapper = {},
                                               DeltaWeighting weighting = DeltaWeighting::PerStep) {
  if (!buffer.full()) throw ContractViolation("accumulate_gradient: buffer not full");
  std::vector<double> g(policy.param_count(), 0.0);
  std::map<int, std::pair<double, int>> flow_mean;
  if (weighting == DeltaWeighting::TrajectoryMean) {
    for (const auto& t : buffer.transitions()) {
      auto& [s, n] = flow_mean[t.flow_id];
      s += t.delta;
      n += 1;
    }
  }
  for (const auto& t : buffer.transitions()) {
    if (!mapper.in_range(t.raw_output)) continue;
    double w = t.delta;
    if (weighting == DeltaWeighting::TrajectoryMean) {
      const auto& [s, n] = flow_mean[t.flow_id];
      w = s / n;
    }
    if (w == 0.0) continue;
    policy.backward(t.features, w, g);
  }
  for (double v : g)
    if (!std::isfinite(v)) throw NumericError("accumulate_gradient: non-finite gradient");
  return g;
}

// Gradient ascent: theta += lr * g.
inline void apply_update(MlpPolicy& policy, std::span<const double> g, double learning_rate) {
  auto p = policy.params();
  if (g.size() != p.size()) throw ContractViolation("apply_update: gradient size mismatch");
  for (double v : g) require_finite(v, "policy update");
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += learning_rate * g[i];
}

// Running delta/reward statistics over decisions at or after `from_us`.
class DeltaStats : public DecisionSink {
 public:
  explicit DeltaStats(double from_us = 0.0) : from_us_(from_us) {}

  void on_decision(const DecisionRecord& r) override {
    if (r.now_us < from_us_) return;
    ++n_;
    sum_ += r.delta;
    sum_abs_ += std::abs(r.delta);
    sum_sq_ += r.delta * r.delta;
  }

  std::size_t count() const { return n_; }
  double mean_delta() const { return n_ ? sum_ / static_cast<double>(n_) : 0.0; }
  double mean_abs_delta() const { return n_ ? sum_abs_ / static_cast<double>(n_) : 0.0; }
  double mean_reward() const { return n_ ? -sum_sq_ / static_cast<double>(n_) : 0.0; }

 private:
  double from_us_;
  std::size_t n_ = 0;
  double sum_ = 0.0, sum_abs_ = 0.0, sum_sq_ = 0.0;
};

struct EvalReport {
  double mean_reward = 0.0;
  double mean_abs_delta = 0.0;
  double mean_delta = 0.0;
  double normalized_goodput = 0.0;
  double mean_inflation = 1.0;
  double drops_per_flow = 0.0;
  double jain_fairness = 1.0;
  std::size_t decisions = 0;
};

// Frozen-policy run; delta statistics come from post-warmup decisions.
inline EvalReport evaluate_policy(const ControllerSpec& controller, const ScenarioSpec& spec, const SimConfig& cfg) {
  DeltaStats stats(spec.warmup_us);
  const auto run = run_scenario(spec, controller, cfg, &stats);
  EvalReport e;
  e.mean_reward = stats.mean_reward();
  e.mean_abs_delta = stats.mean_abs_delta();
  e.mean_delta = stats.mean_delta();
  e.normalized_goodput = run.report.normalized_goodput;
  e.mean_inflation = run.report.steady_state_inflation;
  e.drops_per_flow = run.report.drops_per_flow;
  e.jain_fairness = run.report.jain_fairness;
  e.decisions = stats.count();
  return e;
}

inline EvalReport evaluate_policy(const MlpPolicy& policy, const ScenarioSpec& spec, const SimConfig& cfg,
                                  RewardParams reward = {}) {
  return evaluate_policy(ControllerSpec::mlp_policy(std::make_shared<const MlpPolicy>(policy), reward), spec, cfg);
}

// Delta measured with every flow of `spec` pinned at its fair share; with the
// queue preloaded to the implied equilibrium this is exactly zero.
inline EvalReport evaluate_fair_share_oracle(const ScenarioSpec& spec, const SimConfig& cfg, RewardParams reward = {}) {
  ScenarioSpec s = spec;
  s.start_jitter = false;
  const int per_port = s.kind == ScenarioKind::AllToAll ? (s.hosts - 1) * s.flows_per_host : s.flow_count();
  if (per_port > 0)
    s.initial_occupancy_bits = (theory_curve(reward, per_port) - 1.0) * bits_for(cfg.line_rate_gbps, cfg.base_rtt_us);
  auto run = run_scenario(s, ControllerSpec::of(ControllerKind::FairShare), cfg);
  EvalReport e;
  e.normalized_goodput = run.report.normalized_goodput;
  e.mean_inflation = run.report.steady_state_inflation;
  e.drops_per_flow = run.report.drops_per_flow;
  e.jain_fairness = run.report.jain_fairness;
  if (per_port > 0) {
    e.mean_delta = compute_delta(reward, e.mean_inflation, cfg.line_rate_gbps / per_port, cfg.line_rate_gbps);
    e.mean_abs_delta = std::abs(e.mean_delta);
    e.mean_reward = -e.mean_delta * e.mean_delta;
  }
  return e;
}

inline std::vector<ScenarioSpec> default_curriculum(double episode_us = 20'000.0) {
  std::vector<ScenarioSpec> c;
  for (int n : {2, 4, 8, 16, 32, 64}) c.push_back(ScenarioSpec::incast(n));
  c.push_back(ScenarioSpec::all_to_all(4, 1));
  for (auto& s : c) {
    s.duration_us = episode_us;
    s.warmup_us = 0.25 * episode_us;
  }
  return c;
}

struct TrainConfig {
  double learning_rate = 2e-5;  // applied to the summed buffer gradient
  std::size_t buffer_size = 2048;
  int epochs = 300;
  std::vector<ScenarioSpec> curriculum = default_curriculum();
  std::vector<ScenarioSpec> eval_scenarios;  // empty: use the curriculum
  int eval_every = 5;
  double convergence_threshold = 2e-4;  // stop once eval mean |delta| drops below; 0 disables
  double divergence_factor = 10.0;
  std::uint64_t seed = 1;
  int history = 5;
  int hidden = 16;
  double init_scale = 0.1;
  RewardParams reward;
  ActionMapper mapper;
  DeltaWeighting weighting = DeltaWeighting::PerStep;
  bool shuffle = true;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (buffer_size == 0) throw ConfigError("train: buffer_size must be > 0");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
    if (history < 1 || hidden < 1) throw ConfigError("train: bad network shape");
    for (const auto& s : curriculum) s.validate();
    reward.validate();
  }
};

struct EpochLog {
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_abs_delta = 0.0;
  double goodput = 0.0;
  double inflation = 0.0;
  double drops = 0.0;
  double eval_mean_abs_delta = std::numeric_limits<double>::quiet_NaN();
  double eval_mean_reward = std::numeric_limits<double>::quiet_NaN();
  int updates = 0;
};

struct TrainResult {
  MlpPolicy policy;
  std::vector<EpochLog> log;
  std::string stop_reason;
  int best_epoch = -1;
};

inline void write_training_log(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,mean_reward,mean_abs_delta,goodput,inflation,drops\n";
  os.precision(10);
  for (const auto& e : log)
    os << e.epoch << ',' << e.mean_reward << ',' << e.mean_abs_delta << ',' << e.goodput << ',' << e.inflation << ','
       << e.drops << '\n';
}

namespace detail {

// Pairs each decision with the delta observed at the same flow's next
// decision. A rollout ends whenever the buffer fills: the engine is suspended
// inside the callback while the update is applied, so the policy has a single
// writer and no reader sees a half-written parameter vector.
class TrainingSink final : public DecisionSink {
 public:
  TrainingSink(MlpPolicy& policy, RolloutBuffer& buffer, const TrainConfig& cfg, double stats_from_us)
      : policy_(policy), buffer_(buffer), cfg_(cfg), stats_(stats_from_us) {}

  void on_decision(const DecisionRecord& r) override {
    stats_.on_decision(r);
    auto it = pending_.find(r.flow_id);
    if (it != pending_.end()) {
      Transition t{std::move(it->second.features), r.delta, it->second.raw_output, r.flow_id};
      buffer_.push(std::move(t));
      if (buffer_.full()) {
        const auto g = accumulate_gradient(policy_, buffer_, cfg_.mapper, cfg_.weighting);
        apply_update(policy_, g, cfg_.learning_rate);
        buffer_.clear();
        ++updates_;
      }
    }
    pending_[r.flow_id] = Pending{std::vector<double>(r.features.begin(), r.features.end()), r.raw_output};
  }

  const DeltaStats& stats() const { return stats_; }
  int updates() const { return updates_; }

 private:
  struct Pending {
    std::vector<double> features;
    double raw_output;
  };
  MlpPolicy& policy_;
  RolloutBuffer& buffer_;
  const TrainConfig& cfg_;
  DeltaStats stats_;
  std::map<int, Pending> pending_;
  int updates_ = 0;
};

}  // namespace detail

struct EvalSummary {
  double mean_abs_delta = 0.0;
  double mean_reward = 0.0;
};

inline EvalSummary evaluate_suite(const MlpPolicy& policy, const std::vector<ScenarioSpec>& specs, const SimConfig& cfg,
                                  const RewardParams& reward) {
  EvalSummary s;
  for (const auto& spec : specs) {
    const auto e = evaluate_policy(policy, spec, cfg, reward);
    s.mean_abs_delta += e.mean_abs_delta;
    s.mean_reward += e.mean_reward;
  }
  if (!specs.empty()) {
    s.mean_abs_delta /= static_cast<double>(specs.size());
    s.mean_reward /= static_cast<double>(specs.size());
  }
  return s;
}

// On-policy training: every flow runs a copy of the live policy with its own
// window; the policy is updated each time the rollout buffer fills.
inline TrainResult train(const TrainConfig& cfg, const SimConfig& sim, const MlpPolicy* initial = nullptr) {
  cfg.validate();
  sim.validate();
  auto live = std::make_shared<MlpPolicy>(
      initial ? *initial
              : MlpPolicy::random(2 * cfg.history, cfg.hidden, derive_seed(cfg.seed, 5), cfg.init_scale));
  if (live->inputs() != 2 * cfg.history) throw ConfigError("train: initial policy width does not match history");
  TrainResult result{*live, {}, "epoch limit", 0};
  if (cfg.epochs == 0) {
    result.stop_reason = "zero epochs";
    return result;
  }
  const auto& eval_specs = cfg.eval_scenarios.empty() ? cfg.curriculum : cfg.eval_scenarios;
  RolloutBuffer buffer(cfg.buffer_size);
  std::mt19937_64 rng(derive_seed(cfg.seed, 9));
  const EvalSummary initial_eval = evaluate_suite(*live, eval_specs, sim, cfg.reward);
  double best_reward = initial_eval.mean_reward;
  double best_abs = initial_eval.mean_abs_delta;

  std::vector<std::size_t> order(cfg.curriculum.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    double reward_sum = 0.0, abs_sum = 0.0;
    std::size_t decisions = 0;
    for (std::size_t idx : order) {
      const auto& spec = cfg.curriculum[idx];
      SimConfig episode = sim;
      episode.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) * 1000 + idx);
      episode.sample_interval_us = 0.0;
      detail::TrainingSink sink(*live, buffer, cfg, spec.warmup_us);
      ControllerSpec ctl = ControllerSpec::mlp_policy(live, cfg.reward);
      ctl.mapper = cfg.mapper;
      const auto run = run_scenario(spec, ctl, episode, &sink);
      const auto n = sink.stats().count();
      reward_sum += sink.stats().mean_reward() * static_cast<double>(n);
      abs_sum += sink.stats().mean_abs_delta() * static_cast<double>(n);
      decisions += n;
      log.goodput += run.report.normalized_goodput / static_cast<double>(order.size());
      log.inflation += run.report.steady_state_inflation / static_cast<double>(order.size());
      log.drops += run.report.drops_per_flow / static_cast<double>(order.size());
      log.updates += sink.updates();
    }
    if (decisions > 0) {
      log.mean_reward = reward_sum / static_cast<double>(decisions);
      log.mean_abs_delta = abs_sum / static_cast<double>(decisions);
    }
    live->check_finite();

    bool stop = false;
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const EvalSummary ev = evaluate_suite(*live, eval_specs, sim, cfg.reward);
      log.eval_mean_abs_delta = ev.mean_abs_delta;
      log.eval_mean_reward = ev.mean_reward;
      if (ev.mean_reward > best_reward) {
        best_reward = ev.mean_reward;
        result.policy = *live;
        result.best_epoch = epoch;
      }
      best_abs = std::min(best_abs, ev.mean_abs_delta);
      if (cfg.convergence_threshold > 0.0 && ev.mean_abs_delta < cfg.convergence_threshold) {
        result.stop_reason = "converged";
        stop = true;
      } else if (ev.mean_abs_delta > cfg.divergence_factor * best_abs && ev.mean_abs_delta > cfg.reward.target) {
        result.stop_reason = "diverged: eval mean |delta| " + std::to_string(ev.mean_abs_delta) + " vs best " +
                             std::to_string(best_abs);
        stop = true;
      }
    }
    result.log.push_back(log);
    if (stop) break;
  }
  return result;
}

}  // namespace rlcc
