#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "rlcc_lab/gbt.hpp"
#include "rlcc_lab/runner.hpp"
#include "rlcc_lab/trainer.hpp"

namespace rlcc {

// Worker count for grid runs: RLCC_LAB_THREADS if set, else the hardware.
inline unsigned bench_threads() {
  if (const char* env = std::getenv("RLCC_LAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// out[i] = fn(i) for i < n, computed on up to bench_threads() workers.
template <class T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(bench_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          out[i] = fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Theory vs practice
// ---------------------------------------------------------------------------

struct TheoryRow {
  int n = 0;
  double measured = 0.0;
  double predicted = 0.0;
  double rel_error = 0.0;
  double swift_measured = std::numeric_limits<double>::quiet_NaN();
};

struct SqrtFit {
  double c = 0.0;
  double b = 0.0;
  double max_rel_error = 0.0;
};

// Least-squares c*sqrt(N) + b.
inline SqrtFit fit_sqrt_curve(std::span<const int> ns, std::span<const double> ys) {
  if (ns.size() != ys.size() || ns.size() < 2) throw ContractViolation("fit_sqrt_curve: need >= 2 matched points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double x = std::sqrt(static_cast<double>(ns[i]));
    sx += x;
    sy += ys[i];
    sxx += x * x;
    sxy += x * ys[i];
  }
  SqrtFit f;
  const double den = m * sxx - sx * sx;
  f.c = den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
  f.b = (sy - f.c * sx) / m;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double pred = f.c * std::sqrt(static_cast<double>(ns[i])) + f.b;
    f.max_rel_error = std::max(f.max_rel_error, std::abs(ys[i] - pred) / std::abs(pred));
  }
  return f;
}

struct TheoryTable {
  std::vector<TheoryRow> rows;
  SqrtFit swift_fit;
  bool has_swift = false;

  double max_rel_error() const {
    double e = 0.0;
    for (const auto& r : rows) e = std::max(e, std::abs(r.rel_error));
    return e;
  }
  bool monotone() const {
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].measured < rows[i - 1].measured) return false;
    return true;
  }
};

inline TheoryTable theory_vs_practice(const ControllerSpec& policy, const std::vector<int>& ns, const SimConfig& cfg,
                                      bool with_swift = true, double duration_us = 50'000.0,
                                      double warmup_us = 10'000.0) {
  auto spec_for = [&](int n) {
    auto s = ScenarioSpec::incast(n);
    s.duration_us = duration_us;
    s.warmup_us = warmup_us;
    return s;
  };
  const std::size_t jobs = ns.size() * (with_swift ? 2 : 1);
  const auto inflation = parallel_map<double>(jobs, [&](std::size_t i) {
    const auto& ctl = i < ns.size() ? policy : ControllerSpec::of(ControllerKind::Swift);
    return run_benchmark(spec_for(ns[i % ns.size()]), ctl, cfg).steady_state_inflation;
  });
  TheoryTable t;
  t.has_swift = with_swift;
  std::vector<double> swift;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    TheoryRow r;
    r.n = ns[i];
    r.measured = inflation[i];
    r.predicted = theory_curve(policy.reward, ns[i]);
    r.rel_error = (r.measured - r.predicted) / r.predicted;
    if (with_swift) {
      r.swift_measured = inflation[ns.size() + i];
      swift.push_back(r.swift_measured);
    }
    t.rows.push_back(r);
  }
  if (with_swift && ns.size() >= 2) t.swift_fit = fit_sqrt_curve(ns, swift);
  return t;
}

inline void write_theory_csv(std::ostream& os, const TheoryTable& t) {
  os << "n,measured_inflation,predicted_inflation,rel_error,swift_inflation,swift_fit\n";
  os.precision(10);
  for (const auto& r : t.rows) {
    os << r.n << ',' << r.measured << ',' << r.predicted << ',' << r.rel_error << ',';
    if (t.has_swift)
      os << r.swift_measured << ',' << t.swift_fit.c * std::sqrt(static_cast<double>(r.n)) + t.swift_fit.b;
    else
      os << ',';
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Parameter sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
  double target = 0.0;
  double beta = 0.0;
  double goodput = 0.0;
  double latency_us = 0.0;
  double inflation = 0.0;
  double drops = 0.0;
  bool failed = false;
};

// Goodput below this marks a grid point as collapsed.
inline constexpr double kSweepFailGoodput = 0.5;

inline std::vector<SweepPoint> parameter_sweep(const std::vector<double>& targets, const std::vector<double>& betas,
                                               const std::vector<ScenarioSpec>& scenarios, const TrainConfig& base,
                                               const SimConfig& cfg) {
  struct Cell {
    double target, beta;
  };
  std::vector<Cell> grid;
  for (double b : betas)
    for (double t : targets) grid.push_back({t, b});
  return parallel_map<SweepPoint>(grid.size(), [&](std::size_t i) {
    TrainConfig tc = base;
    tc.reward.target = grid[i].target;
    tc.reward.beta = grid[i].beta;
    const auto trained = train(tc, cfg);
    const auto ctl = ControllerSpec::mlp_policy(std::make_shared<const MlpPolicy>(trained.policy), tc.reward);
    SweepPoint p{grid[i].target, grid[i].beta};
    for (const auto& s : scenarios) {
      const auto r = run_benchmark(s, ctl, cfg);
      p.goodput += r.normalized_goodput;
      p.latency_us += r.mean_latency_us;
      p.inflation += r.steady_state_inflation;
      p.drops += r.drops_per_flow;
    }
    const double k = scenarios.empty() ? 1.0 : static_cast<double>(scenarios.size());
    p.goodput /= k;
    p.latency_us /= k;
    p.inflation /= k;
    p.drops /= k;
    p.failed = p.goodput < kSweepFailGoodput;
    return p;
  });
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& pts) {
  os << "target,beta,goodput,latency_us,inflation,drops_per_flow,failed\n";
  os.precision(10);
  for (const auto& p : pts)
    os << p.target << ',' << p.beta << ',' << p.goodput << ',' << p.latency_us << ',' << p.inflation << ',' << p.drops
       << ',' << (p.failed ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Decision-latency ablation
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string model;
  double latency_us = 0.0;
  std::string scenario;
  double goodput = 0.0;
  double drops_per_flow = 0.0;
  double inflation = 0.0;
};

inline std::vector<AblationRow> latency_ablation(std::shared_ptr<const TreeEnsemble> student,
                                                 std::shared_ptr<const MlpPolicy> teacher,
                                                 const std::vector<double>& latencies,
                                                 const std::vector<ScenarioSpec>& specs, const SimConfig& cfg,
                                                 RewardParams reward = {}) {
  std::vector<ControllerSpec> models;
  if (student) models.push_back(ControllerSpec::tree_policy(student, reward));
  if (teacher) models.push_back(ControllerSpec::mlp_policy(teacher, reward));
  const std::size_t n = models.size() * latencies.size() * specs.size();
  return parallel_map<AblationRow>(n, [&](std::size_t i) {
    const auto& spec = specs[i % specs.size()];
    const double lat = latencies[(i / specs.size()) % latencies.size()];
    ControllerSpec c = models[i / (specs.size() * latencies.size())];
    c.decision_latency_us = lat;
    const auto r = run_benchmark(spec, c, cfg);
    return AblationRow{to_string(c.kind), lat, spec.key(), r.normalized_goodput, r.drops_per_flow,
                       r.steady_state_inflation};
  });
}

inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "model,latency_us,scenario,goodput,drops_per_flow,inflation\n";
  os.precision(10);
  for (const auto& r : rows)
    os << r.model << ',' << r.latency_us << ',' << r.scenario << ',' << r.goodput << ',' << r.drops_per_flow << ','
       << r.inflation << '\n';
}

// ---------------------------------------------------------------------------
// Explainability probe
// ---------------------------------------------------------------------------

enum class Condition { UnderUtilized = 0, OnTarget = 1, Congested = 2 };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::UnderUtilized: return "under-utilized";
    case Condition::OnTarget: return "on-target";
    case Condition::Congested: return "congested";
  }
  return "?";
}

// m[prev][cur]: multiplier chosen after a history of `prev` ending in `cur`.
struct ProbeTable {
  std::array<std::array<double, 3>, 3> m{};

  double at(Condition prev, Condition cur) const {
    return m[static_cast<std::size_t>(prev)][static_cast<std::size_t>(cur)];
  }
  bool under_column_increases() const {
    for (int p = 0; p < 3; ++p)
      if (!(at(Condition(p), Condition::UnderUtilized) > 1.0)) return false;
    return true;
  }
  bool congested_column_decreases() const {
    for (int p = 0; p < 3; ++p)
      if (!(at(Condition(p), Condition::Congested) < 1.0)) return false;
    return true;
  }
  bool center_holds() const {
    const double c = at(Condition::OnTarget, Condition::OnTarget);
    return c >= 0.97 && c <= 1.03;
  }
  bool second_order_holds() const {
    return at(Condition::Congested, Condition::UnderUtilized) > at(Condition::UnderUtilized, Condition::UnderUtilized);
  }
  bool sign_pattern_ok() const { return under_column_increases() && congested_column_decreases() && center_holds(); }
};

// The older slots hold `prev`, the newest holds `cur`. Action slots carry the
// model's own clamped outputs along that synthetic history.
inline ProbeTable probe_policy(const PolicyFn& model, int history, const RewardParams& reward = {},
                               const ActionMapper& mapper = {}, double congested_delta = -0.3) {
  if (history < 1) throw ConfigError("probe: history must be >= 1");
  if (!(congested_delta < 0.0)) throw ConfigError("probe: congested delta must be < 0");
  const std::array<double, 3> delta{reward.target, 0.0, congested_delta};
  ProbeTable t;
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      ObservationWindow w(history, reward.target, 0.0);
      double a = 0.0;
      for (int i = 0; i < history - 1; ++i) {
        w.push(delta[p], a);
        a = mapper.clamp(model(w.flatten()));
      }
      w.push(delta[c], a);
      t.m[p][c] = mapper.multiplier(model(w.flatten()));
    }
  return t;
}

inline void write_probe_csv(std::ostream& os, const ProbeTable& t) {
  os << "previous,under-utilized,on-target,congested\n";
  os.precision(10);
  for (int p = 0; p < 3; ++p)
    os << to_string(Condition(p)) << ',' << t.m[p][0] << ',' << t.m[p][1] << ',' << t.m[p][2] << '\n';
}

// ---------------------------------------------------------------------------
// Drops table and benchmark grids
// ---------------------------------------------------------------------------

inline std::vector<MetricsReport> run_grid(const std::vector<ControllerSpec>& controllers,
                                           const std::vector<ScenarioSpec>& specs, const SimConfig& cfg) {
  auto rows = parallel_map<MetricsReport>(controllers.size() * specs.size(), [&](std::size_t i) {
    return run_benchmark(specs[i % specs.size()], controllers[i / specs.size()], cfg);
  });
  std::stable_sort(rows.begin(), rows.end(), [](const MetricsReport& a, const MetricsReport& b) {
    return a.scenario < b.scenario;
  });
  return rows;
}

inline std::vector<MetricsReport> drops_table(const std::vector<ControllerSpec>& controllers,
                                              const std::vector<ScenarioSpec>& specs, const SimConfig& cfg) {
  return run_grid(controllers, specs, cfg);
}

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& rows) {
  os << "scenario,controller,flows,normalized_goodput,mean_latency_us,p99_latency_us,drops_per_flow,jain_fairness,"
        "long_bw_normalized,slowdown,slowdown_base_rtt,steady_state_inflation,shorts_completed\n";
  os.precision(10);
  for (const auto& r : rows)
    os << r.scenario << ',' << r.controller << ',' << r.flows << ',' << r.normalized_goodput << ','
       << r.mean_latency_us << ',' << r.p99_latency_us << ',' << r.drops_per_flow << ',' << r.jain_fairness << ','
       << r.long_bw_normalized << ',' << r.slowdown << ',' << r.slowdown_base_rtt << ','
       << r.steady_state_inflation << ',' << r.shorts_completed << '\n';
}

// ---------------------------------------------------------------------------
// Long-short reaction
// ---------------------------------------------------------------------------

struct LongShortReaction {
  double first_arrival_us = 0.0;
  double last_completion_us = std::numeric_limits<double>::quiet_NaN();
  // Time from the first short arrival until the long aggregate falls below
  // half the line rate; NaN if it never does.
  double drop_after_us = std::numeric_limits<double>::quiet_NaN();
  // Time from the last short completion until the long aggregate is back at
  // 90% of the line rate; NaN if it never recovers.
  double recover_after_us = std::numeric_limits<double>::quiet_NaN();
  MetricsReport report;
};

inline LongShortReaction long_short_reaction(const ScenarioSpec& spec, const ControllerSpec& controller, SimConfig cfg,
                                             double sample_interval_us = 5.0) {
  if (spec.kind != ScenarioKind::LongShort || spec.n_short < 1)
    throw ConfigError("long_short_reaction: needs a long_short scenario with short flows");
  cfg.sample_interval_us = sample_interval_us;
  const auto run = run_scenario(spec, controller, cfg);
  LongShortReaction r;
  r.report = run.report;
  r.first_arrival_us = *std::min_element(run.short_start_us.begin(), run.short_start_us.end());
  bool all_done = true;
  double last = 0.0;
  for (double t : run.short_completion_us) {
    if (std::isnan(t)) all_done = false;
    else last = std::max(last, t);
  }
  if (all_done) r.last_completion_us = last;
  const double line = cfg.line_rate_gbps;
  for (const auto& s : run.trace.samples) {
    if (std::isnan(r.drop_after_us) && s.time_us >= r.first_arrival_us && s.long_rate_gbps < 0.5 * line)
      r.drop_after_us = s.time_us - r.first_arrival_us;
    if (all_done && std::isnan(r.recover_after_us) && s.time_us >= r.last_completion_us &&
        s.long_rate_gbps >= 0.9 * line)
      r.recover_after_us = s.time_us - r.last_completion_us;
  }
  return r;
}

}  // namespace rlcc
