#pragma once

#include <cmath>
#include <cstring>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rlcc_lab/gbt.hpp"
#include "rlcc_lab/trainer.hpp"

namespace rlcc {

struct TraceDataset {
  Dataset train;
  Dataset held_out;

  std::size_t size() const { return train.rows() + held_out.rows(); }
};

// Teacher traces: training curriculum plus flow counts it never saw.
inline std::vector<ScenarioSpec> default_trace_scenarios(double episode_us = 20'000.0) {
  auto specs = default_curriculum(episode_us);
  for (int n : {3, 12, 48, 128, 256, 512}) {
    auto s = ScenarioSpec::incast(n);
    s.duration_us = episode_us;
    s.warmup_us = 0.25 * episode_us;
    specs.push_back(s);
  }
  auto ls = ScenarioSpec::long_short(4, 32);
  ls.duration_us = episode_us;
  ls.warmup_us = 0.25 * episode_us;
  specs.push_back(ls);
  return specs;
}

namespace detail {

class TraceRecorder final : public DecisionSink {
 public:
  explicit TraceRecorder(std::vector<std::vector<double>>& rows) : rows_(rows) {}

  void on_decision(const DecisionRecord& r) override {
    std::vector<double> row(r.features.begin(), r.features.end());
    row.push_back(r.raw_output);
    rows_.push_back(std::move(row));
  }

 private:
  std::vector<std::vector<double>>& rows_;
};

struct BitwiseLess {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) < 0;
  }
};

}  // namespace detail

// Closed-loop teacher rollouts; every decision contributes (window, raw y).
// Exact duplicates are dropped, the first n_samples survivors are kept and
// split 80/20 by a hash of their index.
inline TraceDataset collect_traces(const MlpPolicy& teacher, const std::vector<ScenarioSpec>& scenarios,
                                   std::size_t n_samples, const SimConfig& cfg, RewardParams reward = {}) {
  TraceDataset out;
  out.train.n_features = teacher.inputs();
  out.held_out.n_features = teacher.inputs();
  if (n_samples == 0) return out;

  auto shared = std::make_shared<const MlpPolicy>(teacher);
  std::vector<std::vector<double>> rows;
  std::set<std::vector<double>, detail::BitwiseLess> seen;
  std::vector<std::vector<double>> unique;
  for (std::size_t i = 0; i < scenarios.size() && unique.size() < n_samples; ++i) {
    rows.clear();
    detail::TraceRecorder rec(rows);
    SimConfig episode = cfg;
    episode.seed = derive_seed(cfg.seed, 300 + i);
    episode.sample_interval_us = 0.0;
    run_scenario(scenarios[i], ControllerSpec::mlp_policy(shared, reward), episode, &rec);
    for (auto& r : rows) {
      if (unique.size() >= n_samples) break;
      if (seen.insert(r).second) unique.push_back(std::move(r));
    }
  }
  if (unique.size() < n_samples)
    throw ConfigError("collect_traces: only " + std::to_string(unique.size()) + " distinct samples, wanted " +
                      std::to_string(n_samples));

  const std::size_t width = static_cast<std::size_t>(teacher.inputs());
  for (std::size_t i = 0; i < unique.size(); ++i) {
    const auto& r = unique[i];
    const std::span<const double> x(r.data(), width);
    Dataset& dst = (mix64(derive_seed(cfg.seed, 17) ^ i) % 5 == 0) ? out.held_out : out.train;
    dst.add(x, r[width]);
  }
  return out;
}

struct FidelityRow {
  std::string scenario;
  double goodput_teacher = 0.0, goodput_student = 0.0;
  double inflation_teacher = 0.0, inflation_student = 0.0;
  double drops_teacher = 0.0, drops_student = 0.0;

  double goodput_delta() const { return goodput_student - goodput_teacher; }
  double inflation_rel_delta() const { return (inflation_student - inflation_teacher) / inflation_teacher; }
};

struct FidelityReport {
  double rmse_raw = 0.0;
  double rmse_multiplier = 0.0;
  std::size_t held_out_rows = 0;
  std::vector<FidelityRow> rows;
};

inline FidelityReport fidelity_report(const MlpPolicy& teacher, const TreeEnsemble& student, const Dataset& held_out,
                                      const std::vector<ScenarioSpec>& scenarios, const SimConfig& cfg,
                                      RewardParams reward = {}, ActionMapper mapper = {}) {
  FidelityReport rep;
  rep.held_out_rows = held_out.rows();
  double s_raw = 0.0, s_mul = 0.0;
  for (std::size_t i = 0; i < held_out.rows(); ++i) {
    const auto x = held_out.row(i);
    const double yt = teacher.forward(x), ys = student.predict(x);
    s_raw += (yt - ys) * (yt - ys);
    const double mt = mapper.multiplier(yt), ms = mapper.multiplier(ys);
    s_mul += (mt - ms) * (mt - ms);
  }
  if (held_out.rows() > 0) {
    rep.rmse_raw = std::sqrt(s_raw / static_cast<double>(held_out.rows()));
    rep.rmse_multiplier = std::sqrt(s_mul / static_cast<double>(held_out.rows()));
  }
  auto t = ControllerSpec::mlp_policy(std::make_shared<const MlpPolicy>(teacher), reward);
  auto s = ControllerSpec::tree_policy(std::make_shared<const TreeEnsemble>(student), reward);
  t.mapper = s.mapper = mapper;
  for (const auto& spec : scenarios) {
    const auto a = run_benchmark(spec, t, cfg);
    const auto b = run_benchmark(spec, s, cfg);
    rep.rows.push_back(FidelityRow{spec.key(), a.normalized_goodput, b.normalized_goodput, a.steady_state_inflation,
                                   b.steady_state_inflation, a.drops_per_flow, b.drops_per_flow});
  }
  return rep;
}

struct DistillConfig {
  std::size_t n_samples = 100'000;
  std::vector<ScenarioSpec> scenarios = default_trace_scenarios();
  FitConfig fit;
  RewardParams reward;
};

struct DistillResult {
  TraceDataset data;
  TreeEnsemble ensemble;
};

inline DistillResult distill(const MlpPolicy& teacher, const DistillConfig& dc, const SimConfig& cfg) {
  DistillResult r;
  r.data = collect_traces(teacher, dc.scenarios, dc.n_samples, cfg, dc.reward);
  r.ensemble = fit_gbt(r.data.train, dc.fit);
  return r;
}

}  // namespace rlcc
