#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rlcc_lab/common.hpp"

namespace rlcc {

// ---------------------------------------------------------------------------
// Reward
// ---------------------------------------------------------------------------

struct RewardParams {
  double target = 0.064;  // inflation control parameter
  double beta = 1.5;      // congestion tolerance, in RTT-inflation units

  void validate() const {
    if (!(target > 0.0)) throw ConfigError("reward: target must be > 0");
    if (!(beta >= 1.0)) throw ConfigError("reward: beta must be >= 1");
  }
};

// delta = target - max(inflation - beta, 0) * sqrt(rate / line_rate).
// Zero at the fair-share equilibrium, bounded above by target.
inline double compute_delta(const RewardParams& p, double rtt_inflation, double rate_gbps, double line_rate_gbps) {
  const double excess = std::max(rtt_inflation - p.beta, 0.0);
  return p.target - excess * std::sqrt(rate_gbps / line_rate_gbps);
}

inline double compute_reward(const RewardParams& p, double rtt_inflation, double rate_gbps, double line_rate_gbps) {
  const double d = compute_delta(p, rtt_inflation, rate_gbps, line_rate_gbps);
  return -d * d;
}

// Steady-state RTT inflation implied by the reward for N flows at fair share.
inline double theory_curve(const RewardParams& p, double n_flows) {
  if (n_flows < 1.0) throw ContractViolation("theory_curve: N must be >= 1");
  return p.target * std::sqrt(n_flows) + p.beta;
}

// ---------------------------------------------------------------------------
// Action mapping
// ---------------------------------------------------------------------------

// Raw output y is a log-multiplier; clamping happens in log space.
struct ActionMapper {
  double y_min = std::log(0.8);
  double y_max = std::log(1.25);

  double clamp(double y) const { return std::clamp(y, y_min, y_max); }
  bool in_range(double y) const { return y >= y_min && y <= y_max; }
  double multiplier(double y) const { return std::exp(clamp(y)); }
};

inline double action_from_output(const ActionMapper& m, double y) { return m.multiplier(y); }

// ---------------------------------------------------------------------------
// Observation window
// ---------------------------------------------------------------------------

// The H most recent (delta, previous action) pairs, oldest first.
class ObservationWindow {
 public:
  explicit ObservationWindow(int history = 5, double init_delta = 0.064, double init_action = 0.0)
      : history_(history) {
    if (history < 1) throw ConfigError("observation window length must be >= 1");
    for (int i = 0; i < history; ++i) pairs_.push_back({init_delta, init_action});
  }

  int history() const { return history_; }
  int width() const { return 2 * history_; }

  void push(double delta, double action) {
    pairs_.pop_front();
    pairs_.push_back({delta, action});
  }

  // (delta_0, action_0, delta_1, action_1, ...) oldest to newest.
  void flatten_into(std::span<double> out) const {
    if (static_cast<int>(out.size()) != width()) throw ContractViolation("flatten_into: wrong buffer width");
    std::size_t i = 0;
    for (const auto& [d, a] : pairs_) {
      out[i++] = d;
      out[i++] = a;
    }
  }

  std::vector<double> flatten() const {
    std::vector<double> v(static_cast<std::size_t>(width()));
    flatten_into(v);
    return v;
  }

  std::pair<double, double> at(int i) const { return pairs_.at(static_cast<std::size_t>(i)); }

 private:
  int history_;
  std::deque<std::pair<double, double>> pairs_;
};

inline ObservationWindow& push_observation(ObservationWindow& w, double delta, double action) {
  w.push(delta, action);
  return w;
}

// ---------------------------------------------------------------------------
// Sliding-window MLP
// ---------------------------------------------------------------------------

// y = w2 . tanh(W1 x + b1) + b2, W1 stored row-major as [hidden][input].
// Flat parameter order: W1, b1, w2, b2.
class MlpPolicy {
 public:
  MlpPolicy() : MlpPolicy(10, 16) {}

  MlpPolicy(int inputs, int hidden) : inputs_(inputs), hidden_(hidden) {
    if (inputs < 1 || hidden < 1) throw ConfigError("mlp: inputs and hidden width must be >= 1");
    params_.assign(param_count(), 0.0);
  }

  static MlpPolicy random(int inputs, int hidden, std::uint64_t seed, double scale = 0.1) {
    MlpPolicy p(inputs, hidden);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : p.params_) v = u(rng);
    return p;
  }

  int inputs() const { return inputs_; }
  int hidden() const { return hidden_; }
  std::size_t param_count() const {
    return static_cast<std::size_t>(hidden_) * static_cast<std::size_t>(inputs_) + 2u * static_cast<std::size_t>(hidden_) + 1u;
  }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double& w1(int h, int i) { return params_[static_cast<std::size_t>(h * inputs_ + i)]; }
  double w1(int h, int i) const { return params_[static_cast<std::size_t>(h * inputs_ + i)]; }
  double& b1(int h) { return params_[b1_offset() + static_cast<std::size_t>(h)]; }
  double b1(int h) const { return params_[b1_offset() + static_cast<std::size_t>(h)]; }
  double& w2(int h) { return params_[w2_offset() + static_cast<std::size_t>(h)]; }
  double w2(int h) const { return params_[w2_offset() + static_cast<std::size_t>(h)]; }
  double& b2() { return params_.back(); }
  double b2() const { return params_.back(); }

  void check_finite() const {
    for (double v : params_) require_finite(v, "mlp parameters");
  }

  double forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != inputs_) throw ContractViolation("mlp forward: input width mismatch");
    double y = b2();
    for (int h = 0; h < hidden_; ++h) {
      double z = b1(h);
      const double* row = &params_[static_cast<std::size_t>(h * inputs_)];
      for (int i = 0; i < inputs_; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
      y += w2(h) * std::tanh(z);
    }
    return y;
  }

  double predict(std::span<const double> x) const { return forward(x); }

  // grad += scale * dy/dtheta at x; returns y.
  double backward(std::span<const double> x, double scale, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw ContractViolation("mlp backward: gradient size mismatch");
    double y = b2();
    grad[params_.size() - 1] += scale;
    for (int h = 0; h < hidden_; ++h) {
      double z = b1(h);
      const double* row = &params_[static_cast<std::size_t>(h * inputs_)];
      for (int i = 0; i < inputs_; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
      const double a = std::tanh(z);
      y += w2(h) * a;
      grad[w2_offset() + static_cast<std::size_t>(h)] += scale * a;
      const double dz = scale * w2(h) * (1.0 - a * a);
      grad[b1_offset() + static_cast<std::size_t>(h)] += dz;
      double* grow = &grad[static_cast<std::size_t>(h * inputs_)];
      for (int i = 0; i < inputs_; ++i) grow[i] += dz * x[static_cast<std::size_t>(i)];
    }
    return y;
  }

 private:
  std::size_t b1_offset() const { return static_cast<std::size_t>(hidden_) * static_cast<std::size_t>(inputs_); }
  std::size_t w2_offset() const { return b1_offset() + static_cast<std::size_t>(hidden_); }

  int inputs_;
  int hidden_;
  std::vector<double> params_;
};

inline double mlp_forward(const MlpPolicy& p, const ObservationWindow& w) {
  p.check_finite();
  const auto x = w.flatten();
  return p.forward(x);
}

// ---------------------------------------------------------------------------
// Checkpoint format
//
//   rlcc-mlp 1
//   history <H>
//   hidden <n>
//   clamp <y_min> <y_max>
//   reward <target> <beta>
//   W1 <hidden> <inputs>
//   <row> ...
//   b1 <hidden>
//   ...
//   w2 <hidden>
//   ...
//   b2
//   <value>
// ---------------------------------------------------------------------------

struct PolicyCheckpoint {
  MlpPolicy policy;
  int history = 5;
  ActionMapper mapper;
  RewardParams reward;
};

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void save_checkpoint(std::ostream& os, const PolicyCheckpoint& c) {
  const auto& p = c.policy;
  os << "rlcc-mlp 1\n";
  os << "history " << c.history << "\n";
  os << "hidden " << p.hidden() << "\n";
  os << "clamp " << fmt17(c.mapper.y_min) << ' ' << fmt17(c.mapper.y_max) << "\n";
  os << "reward " << fmt17(c.reward.target) << ' ' << fmt17(c.reward.beta) << "\n";
  os << "W1 " << p.hidden() << ' ' << p.inputs() << "\n";
  for (int h = 0; h < p.hidden(); ++h) {
    for (int i = 0; i < p.inputs(); ++i) os << (i ? " " : "") << fmt17(p.w1(h, i));
    os << "\n";
  }
  os << "b1 " << p.hidden() << "\n";
  for (int h = 0; h < p.hidden(); ++h) os << (h ? " " : "") << fmt17(p.b1(h));
  os << "\nw2 " << p.hidden() << "\n";
  for (int h = 0; h < p.hidden(); ++h) os << (h ? " " : "") << fmt17(p.w2(h));
  os << "\nb2\n" << fmt17(p.b2()) << "\n";
}

inline PolicyCheckpoint load_checkpoint(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string tok;
    if (!(is >> tok) || tok != word) throw ConfigError("checkpoint: expected '" + word + "', got '" + tok + "'");
  };
  auto read = [&](auto& v, const char* what) {
    if (!(is >> v)) throw ConfigError(std::string("checkpoint: failed to read ") + what);
  };
  expect("rlcc-mlp");
  int version = 0;
  read(version, "version");
  if (version != 1) throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  PolicyCheckpoint c;
  int hidden = 0;
  expect("history");
  read(c.history, "history");
  expect("hidden");
  read(hidden, "hidden");
  expect("clamp");
  read(c.mapper.y_min, "clamp");
  read(c.mapper.y_max, "clamp");
  expect("reward");
  read(c.reward.target, "reward");
  read(c.reward.beta, "reward");
  if (c.history < 1 || hidden < 1) throw ConfigError("checkpoint: bad dimensions");
  c.policy = MlpPolicy(2 * c.history, hidden);
  int rows = 0, cols = 0;
  expect("W1");
  read(rows, "W1 dims");
  read(cols, "W1 dims");
  if (rows != hidden || cols != 2 * c.history) throw ConfigError("checkpoint: W1 shape mismatch");
  for (int h = 0; h < hidden; ++h)
    for (int i = 0; i < cols; ++i) read(c.policy.w1(h, i), "W1");
  expect("b1");
  read(rows, "b1 dims");
  for (int h = 0; h < hidden; ++h) read(c.policy.b1(h), "b1");
  expect("w2");
  read(rows, "w2 dims");
  for (int h = 0; h < hidden; ++h) read(c.policy.w2(h), "w2");
  expect("b2");
  read(c.policy.b2(), "b2");
  c.policy.check_finite();
  return c;
}

}  // namespace rlcc
