#pragma once

#include <CLI11.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rlcc_lab/bench.hpp"
#include "rlcc_lab/distill.hpp"

namespace rlcc {

// ---------------------------------------------------------------------------
// INI configuration
// ---------------------------------------------------------------------------

using Ini = boost::property_tree::ptree;

inline Ini load_ini(const std::string& path) {
  Ini pt;
  if (path.empty()) return pt;
  try {
    boost::property_tree::ini_parser::read_ini(path, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  static const std::map<std::string, std::set<std::string>> known{
      {"sim",
       {"line_rate_gbps", "base_rtt_us", "buffer_bits", "min_rate_gbps", "seed", "duration_us", "decision_latency_us",
        "sample_interval_us", "record_flows"}},
      {"scenario",
       {"kind", "hosts", "flows_per_host", "flows", "n_long", "n_short", "short_bytes", "short_start_us",
        "short_spread_us", "duration_us", "warmup_us"}},
      {"controller",
       {"kind", "decision_latency_us", "policy", "model", "target", "beta", "g", "dcqcn_g", "dcqcn_rate_ai_gbps",
        "dcqcn_rate_hai_gbps", "dcqcn_timer_us", "dcqcn_byte_counter_bits", "ecn_k_min_bits", "ecn_k_max_bits",
        "ecn_p_max", "swift_target_delay_us", "swift_ai_gbps", "swift_md_beta", "swift_max_md"}},
      {"train",
       {"learning_rate", "buffer_size", "epochs", "eval_every", "convergence_threshold", "seed", "history", "hidden",
        "init_scale", "weighting", "episode_us", "target", "beta"}},
      {"distill", {"n_samples", "trees", "max_depth", "eta", "min_leaf", "n_thresholds", "episode_us"}},
      {"sweep", {"targets", "betas", "epochs"}},
  };
  for (const auto& [section, body] : pt) {
    const auto it = known.find(section);
    if (it == known.end()) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, _] : body)
      if (!it->second.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
  }
  return pt;
}

namespace detail {

template <class T>
void ini_get(const Ini& pt, const std::string& path, T& out) {
  const auto v = pt.get_optional<std::string>(path);
  if (!v) return;
  std::istringstream is(*v);
  T parsed{};
  if (!(is >> parsed) || !(is >> std::ws).eof()) throw ConfigError("config: bad value for " + path + ": '" + *v + "'");
  out = parsed;
}

inline void ini_get(const Ini& pt, const std::string& path, std::string& out) {
  if (const auto v = pt.get_optional<std::string>(path)) out = *v;
}

inline void ini_get(const Ini& pt, const std::string& path, bool& out) {
  const auto v = pt.get_optional<std::string>(path);
  if (!v) return;
  if (*v == "1" || *v == "true" || *v == "yes") out = true;
  else if (*v == "0" || *v == "false" || *v == "no") out = false;
  else throw ConfigError("config: bad boolean for " + path + ": '" + *v + "'");
}

}  // namespace detail

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) throw ConfigError("bad list element '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

inline void apply_sim(const Ini& pt, SimConfig& c) {
  using detail::ini_get;
  ini_get(pt, "sim.line_rate_gbps", c.line_rate_gbps);
  ini_get(pt, "sim.base_rtt_us", c.base_rtt_us);
  ini_get(pt, "sim.buffer_bits", c.buffer_bits);
  ini_get(pt, "sim.min_rate_gbps", c.min_rate_gbps);
  ini_get(pt, "sim.seed", c.seed);
  ini_get(pt, "sim.duration_us", c.duration_us);
  ini_get(pt, "sim.decision_latency_us", c.decision_latency_us);
  ini_get(pt, "sim.sample_interval_us", c.sample_interval_us);
  ini_get(pt, "sim.record_flows", c.record_flows);
}

// `flows` is a total count: many_to_one spreads it over the senders,
// all_to_all rounds it up to whole flows per (src, dst) pair, long_short
// uses it as the number of short flows.
inline void set_total_flows(ScenarioSpec& s, int flows) {
  if (flows < 1) throw ConfigError("scenario: flows must be >= 1");
  switch (s.kind) {
    case ScenarioKind::ManyToOne: {
      const auto inc = ScenarioSpec::incast(flows);
      s.hosts = inc.hosts;
      s.flows_per_host = inc.flows_per_host;
      break;
    }
    case ScenarioKind::AllToAll: {
      const int pairs = s.hosts * (s.hosts - 1);
      s.flows_per_host = (flows + pairs - 1) / pairs;
      break;
    }
    case ScenarioKind::LongShort: s.n_short = flows; break;
  }
}

inline void apply_scenario(const Ini& pt, ScenarioSpec& s) {
  using detail::ini_get;
  std::string kind;
  ini_get(pt, "scenario.kind", kind);
  if (!kind.empty()) {
    const auto k = parse_scenario_kind(kind);
    if (k != s.kind) {
      ScenarioSpec fresh = k == ScenarioKind::LongShort   ? ScenarioSpec::long_short(4, 100)
                           : k == ScenarioKind::AllToAll ? ScenarioSpec::all_to_all(8, 19)
                                                         : ScenarioSpec::many_to_one(4, 16);
      fresh.duration_us = s.duration_us;
      fresh.warmup_us = s.warmup_us;
      s = fresh;
    }
  }
  ini_get(pt, "scenario.hosts", s.hosts);
  ini_get(pt, "scenario.flows_per_host", s.flows_per_host);
  int flows = 0;
  ini_get(pt, "scenario.flows", flows);
  if (flows > 0) set_total_flows(s, flows);
  ini_get(pt, "scenario.n_long", s.n_long);
  ini_get(pt, "scenario.n_short", s.n_short);
  ini_get(pt, "scenario.short_bytes", s.short_bytes);
  ini_get(pt, "scenario.short_start_us", s.short_start_us);
  ini_get(pt, "scenario.short_spread_us", s.short_spread_us);
  ini_get(pt, "scenario.duration_us", s.duration_us);
  ini_get(pt, "scenario.warmup_us", s.warmup_us);
}

inline std::shared_ptr<const MlpPolicy> load_policy_file(const std::string& path, PolicyCheckpoint* meta = nullptr) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open policy checkpoint '" + path + "'");
  auto c = load_checkpoint(is);
  if (meta) *meta = c;
  return std::make_shared<const MlpPolicy>(c.policy);
}

inline std::shared_ptr<const TreeEnsemble> load_ensemble_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open ensemble file '" + path + "'");
  return std::make_shared<const TreeEnsemble>(load_ensemble(is));
}

struct ControllerPaths {
  std::string policy;
  std::string model;
};

inline void apply_controller(const Ini& pt, ControllerSpec& c, ControllerPaths& paths) {
  using detail::ini_get;
  std::string kind;
  ini_get(pt, "controller.kind", kind);
  if (!kind.empty()) c.kind = parse_controller_kind(kind);
  ini_get(pt, "controller.decision_latency_us", c.decision_latency_us);
  ini_get(pt, "controller.policy", paths.policy);
  ini_get(pt, "controller.model", paths.model);
  ini_get(pt, "controller.target", c.reward.target);
  ini_get(pt, "controller.beta", c.reward.beta);
  ini_get(pt, "controller.g", c.dcqcn.g);
  ini_get(pt, "controller.dcqcn_g", c.dcqcn.g);
  ini_get(pt, "controller.dcqcn_rate_ai_gbps", c.dcqcn.rate_ai_gbps);
  ini_get(pt, "controller.dcqcn_rate_hai_gbps", c.dcqcn.rate_hai_gbps);
  ini_get(pt, "controller.dcqcn_timer_us", c.dcqcn.timer_us);
  ini_get(pt, "controller.dcqcn_byte_counter_bits", c.dcqcn.byte_counter_bits);
  ini_get(pt, "controller.ecn_k_min_bits", c.ecn.k_min_bits);
  ini_get(pt, "controller.ecn_k_max_bits", c.ecn.k_max_bits);
  ini_get(pt, "controller.ecn_p_max", c.ecn.p_max);
  ini_get(pt, "controller.swift_target_delay_us", c.swift.target_delay_us);
  ini_get(pt, "controller.swift_ai_gbps", c.swift.ai_gbps);
  ini_get(pt, "controller.swift_md_beta", c.swift.md_beta);
  ini_get(pt, "controller.swift_max_md", c.swift.max_md);
}

// Loads the model file the controller kind needs.
inline void resolve_models(ControllerSpec& c, const ControllerPaths& paths) {
  if (c.kind == ControllerKind::RlccMlp) {
    if (paths.policy.empty()) throw ConfigError("controller rlcc-mlp needs --policy <checkpoint>");
    PolicyCheckpoint meta;
    c.mlp = load_policy_file(paths.policy, &meta);
    c.history = meta.history;
    c.mapper = meta.mapper;
  } else if (c.kind == ControllerKind::RlccTree) {
    if (paths.model.empty()) throw ConfigError("controller rlcc-tree needs --model <ensemble>");
    c.tree = load_ensemble_file(paths.model);
    c.history = c.tree->n_features / 2;
  }
}

inline void apply_train(const Ini& pt, TrainConfig& t) {
  using detail::ini_get;
  ini_get(pt, "train.learning_rate", t.learning_rate);
  ini_get(pt, "train.buffer_size", t.buffer_size);
  ini_get(pt, "train.epochs", t.epochs);
  ini_get(pt, "train.eval_every", t.eval_every);
  ini_get(pt, "train.convergence_threshold", t.convergence_threshold);
  ini_get(pt, "train.seed", t.seed);
  ini_get(pt, "train.history", t.history);
  ini_get(pt, "train.hidden", t.hidden);
  ini_get(pt, "train.init_scale", t.init_scale);
  ini_get(pt, "train.target", t.reward.target);
  ini_get(pt, "train.beta", t.reward.beta);
  std::string w;
  ini_get(pt, "train.weighting", w);
  if (w == "per_step") t.weighting = DeltaWeighting::PerStep;
  else if (w == "trajectory_mean") t.weighting = DeltaWeighting::TrajectoryMean;
  else if (!w.empty()) throw ConfigError("config: train.weighting must be per_step or trajectory_mean");
  double episode = 0.0;
  ini_get(pt, "train.episode_us", episode);
  if (episode > 0.0) t.curriculum = default_curriculum(episode);
}

inline void apply_distill(const Ini& pt, DistillConfig& d) {
  using detail::ini_get;
  ini_get(pt, "distill.n_samples", d.n_samples);
  ini_get(pt, "distill.trees", d.fit.trees);
  ini_get(pt, "distill.max_depth", d.fit.max_depth);
  ini_get(pt, "distill.eta", d.fit.eta);
  ini_get(pt, "distill.min_leaf", d.fit.min_leaf);
  ini_get(pt, "distill.n_thresholds", d.fit.n_thresholds);
  double episode = 0.0;
  ini_get(pt, "distill.episode_us", episode);
  if (episode > 0.0) d.scenarios = default_trace_scenarios(episode);
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace detail {

struct CliState {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = ".";
  std::string controller;
  double decision_latency_us = -1.0;
  std::string policy;
  std::string model;
  std::string teacher;
  std::string ensemble;
  std::string out;
  std::string n_list = "2,4,8,16,32,64,128";
  std::string scenario;
  int flows = 0;
  std::string latencies;
  std::string controllers;
};

inline std::filesystem::path out_path(const CliState& s, const std::string& name) {
  std::filesystem::create_directories(s.out_dir);
  return std::filesystem::path(s.out_dir) / name;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

struct Loaded {
  Ini ini;
  SimConfig sim;
  ScenarioSpec scenario = ScenarioSpec::many_to_one(4, 16);
  ControllerSpec controller;
  ControllerPaths paths;
};

inline Loaded load_common(const CliState& s) {
  Loaded l;
  l.ini = load_ini(s.config);
  apply_sim(l.ini, l.sim);
  apply_scenario(l.ini, l.scenario);
  apply_controller(l.ini, l.controller, l.paths);
  if (s.seed_set) l.sim.seed = s.seed;
  if (!s.scenario.empty()) {
    Ini tmp;
    tmp.put("scenario.kind", s.scenario);
    apply_scenario(tmp, l.scenario);
  }
  if (s.flows > 0) set_total_flows(l.scenario, s.flows);
  if (!s.controller.empty()) l.controller.kind = parse_controller_kind(s.controller);
  if (s.decision_latency_us >= 0.0) l.controller.decision_latency_us = s.decision_latency_us;
  if (!s.policy.empty()) l.paths.policy = s.policy;
  if (!s.model.empty()) l.paths.model = s.model;
  l.sim.validate();
  l.scenario.validate();
  return l;
}

inline void print_report(std::ostream& out, const MetricsReport& r) {
  out << r.controller << " on " << r.scenario << " (" << r.flows << " flows): goodput " << r.normalized_goodput
      << ", mean latency " << r.mean_latency_us << " us, p99 " << r.p99_latency_us << " us, drops/flow "
      << r.drops_per_flow << ", jain " << r.jain_fairness << "\n";
}

inline int cmd_simulate(const CliState& s, std::ostream& out, bool with_trace) {
  auto l = load_common(s);
  resolve_models(l.controller, l.paths);
  if (!s.latencies.empty()) {
    std::shared_ptr<const TreeEnsemble> tree;
    std::shared_ptr<const MlpPolicy> mlp;
    if (!l.paths.model.empty()) tree = load_ensemble_file(l.paths.model);
    if (!l.paths.policy.empty()) mlp = load_policy_file(l.paths.policy);
    if (!tree && !mlp) throw ConfigError("latency ablation needs --model and/or --policy");
    const auto rows = latency_ablation(tree, mlp, parse_list<double>(s.latencies), {l.scenario}, l.sim,
                                       l.controller.reward);
    auto os = open_out(out_path(s, "ablation.csv"));
    write_ablation_csv(os, rows);
    for (const auto& r : rows)
      out << r.model << " @ " << r.latency_us << " us: goodput " << r.goodput << ", drops/flow " << r.drops_per_flow
          << "\n";
    return 0;
  }
  std::vector<ControllerSpec> ctls{l.controller};
  if (!s.controllers.empty()) {
    ctls.clear();
    std::stringstream ss(s.controllers);
    std::string name;
    while (std::getline(ss, name, ',')) {
      ControllerSpec c = l.controller;
      c.kind = parse_controller_kind(name);
      resolve_models(c, l.paths);
      ctls.push_back(c);
    }
  }
  if (with_trace) {
    const auto run = run_scenario(l.scenario, ctls.front(), l.sim);
    auto ts = open_out(out_path(s, "trace.csv"));
    run.trace.write_csv(ts);
    auto ms = open_out(out_path(s, "metrics.csv"));
    write_metrics_csv(ms, {run.report});
    print_report(out, run.report);
    return 0;
  }
  const auto rows = run_grid(ctls, {l.scenario}, l.sim);
  auto ms = open_out(out_path(s, "metrics.csv"));
  write_metrics_csv(ms, rows);
  for (const auto& r : rows) print_report(out, r);
  return 0;
}

inline int cmd_train(const CliState& s, std::ostream& out) {
  auto l = load_common(s);
  TrainConfig tc;
  apply_train(l.ini, tc);
  if (s.seed_set) tc.seed = s.seed;
  if (s.out.empty()) throw ConfigError("train needs --out <checkpoint>");
  const auto r = train(tc, l.sim);
  auto ls = open_out(out_path(s, "train_log.csv"));
  write_training_log(ls, r.log);
  auto cs = open_out(s.out);
  save_checkpoint(cs, PolicyCheckpoint{r.policy, tc.history, tc.mapper, tc.reward});
  out << "trained " << r.log.size() << " epochs (" << r.stop_reason << "), kept epoch " << r.best_epoch << "\n";
  if (!r.log.empty())
    out << "final epoch: mean reward " << r.log.back().mean_reward << ", mean |delta| " << r.log.back().mean_abs_delta
        << ", goodput " << r.log.back().goodput << "\n";
  return 0;
}

inline int cmd_distill(const CliState& s, std::ostream& out) {
  auto l = load_common(s);
  DistillConfig dc;
  apply_distill(l.ini, dc);
  const std::string teacher_path = !s.teacher.empty() ? s.teacher : l.paths.policy;
  if (teacher_path.empty()) throw ConfigError("distill needs --teacher <checkpoint>");
  if (s.out.empty()) throw ConfigError("distill needs --out <ensemble>");
  PolicyCheckpoint meta;
  const auto teacher = load_policy_file(teacher_path, &meta);
  dc.reward = meta.reward;
  const auto r = distill(*teacher, dc, l.sim);
  auto es = open_out(s.out);
  save_ensemble(es, r.ensemble);
  const auto rep = fidelity_report(*teacher, r.ensemble, r.data.held_out,
                                   {ScenarioSpec::incast(64), ScenarioSpec::incast(512)}, l.sim, meta.reward,
                                   meta.mapper);
  auto fs = open_out(out_path(s, "fidelity.csv"));
  fs << "scenario,goodput_teacher,goodput_student,inflation_teacher,inflation_student,drops_teacher,drops_student\n";
  fs.precision(10);
  for (const auto& w : rep.rows)
    fs << w.scenario << ',' << w.goodput_teacher << ',' << w.goodput_student << ',' << w.inflation_teacher << ','
       << w.inflation_student << ',' << w.drops_teacher << ',' << w.drops_student << '\n';
  out << "samples: " << r.data.train.rows() << " train, " << r.data.held_out.rows() << " held out\n";
  out << "ops: " << count_ops(r.ensemble) << " (budget " << kOpBudget << ")\n";
  out << "held-out rmse: " << rep.rmse_raw << " raw, " << rep.rmse_multiplier << " multiplier\n";
  for (const auto& w : rep.rows)
    out << w.scenario << ": goodput " << w.goodput_teacher << " -> " << w.goodput_student << ", inflation "
        << w.inflation_teacher << " -> " << w.inflation_student << "\n";
  return 0;
}

inline int cmd_export(const CliState& s, std::ostream& out) {
  if (s.ensemble.empty()) throw ConfigError("export needs --ensemble <file>");
  const auto e = load_ensemble_file(s.ensemble);
  const auto src = export_tree_source(*e);
  if (s.out.empty()) {
    out << src;
  } else {
    auto os = open_out(s.out);
    os << src;
    out << "wrote " << s.out << " (" << count_ops(*e) << " ops)\n";
  }
  return 0;
}

inline int cmd_sweep(const CliState& s, std::ostream& out) {
  auto l = load_common(s);
  TrainConfig tc;
  apply_train(l.ini, tc);
  if (s.seed_set) tc.seed = s.seed;
  std::vector<double> targets{0.032, 0.064, 0.128}, betas{1.1, 1.5, 2.0};
  if (const auto v = l.ini.get_optional<std::string>("sweep.targets")) targets = parse_list<double>(*v);
  if (const auto v = l.ini.get_optional<std::string>("sweep.betas")) betas = parse_list<double>(*v);
  detail::ini_get(l.ini, "sweep.epochs", tc.epochs);
  const auto pts = parameter_sweep(targets, betas, {l.scenario}, tc, l.sim);
  auto os = open_out(out_path(s, "sweep.csv"));
  write_sweep_csv(os, pts);
  for (const auto& p : pts)
    out << "target " << p.target << " beta " << p.beta << ": goodput " << p.goodput << ", latency " << p.latency_us
        << " us" << (p.failed ? " (failed)" : "") << "\n";
  return 0;
}

inline int cmd_probe(const CliState& s, std::ostream& out) {
  PolicyFn fn;
  int history = 5;
  RewardParams reward;
  ActionMapper mapper;
  if (!s.model.empty()) {
    const auto e = load_ensemble_file(s.model);
    fn = as_policy_fn(e);
    history = e->n_features / 2;
  } else if (!s.policy.empty()) {
    PolicyCheckpoint meta;
    fn = as_policy_fn(load_policy_file(s.policy, &meta));
    history = meta.history;
    reward = meta.reward;
    mapper = meta.mapper;
  } else {
    throw ConfigError("probe needs --model <ensemble> or --policy <checkpoint>");
  }
  if (history < 1) throw ConfigError("probe: model has no features");
  const auto t = probe_policy(fn, history, reward, mapper);
  auto os = open_out(out_path(s, "probe.csv"));
  write_probe_csv(os, t);
  write_probe_csv(out, t);
  const bool ok = t.sign_pattern_ok();
  out << (ok ? "PASS" : "FAIL") << " sign pattern\n";
  out << (t.second_order_holds() ? "PASS" : "FAIL") << " second-order ordering\n";
  return 0;
}

inline int cmd_theory(const CliState& s, std::ostream& out) {
  auto l = load_common(s);
  ControllerSpec c = l.controller;
  if (!s.policy.empty()) c.kind = ControllerKind::RlccMlp;
  else if (!s.model.empty()) c.kind = ControllerKind::RlccTree;
  resolve_models(c, l.paths);
  const auto t = theory_vs_practice(c, parse_list<int>(s.n_list), l.sim);
  auto os = open_out(out_path(s, "theory.csv"));
  write_theory_csv(os, t);
  write_theory_csv(out, t);
  out << "max relative error " << t.max_rel_error() << ", monotone " << (t.monotone() ? "yes" : "no") << "\n";
  if (t.has_swift) out << "swift fit: " << t.swift_fit.c << " * sqrt(N) + " << t.swift_fit.b << "\n";
  return 0;
}

}  // namespace detail

// Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"rlcc_lab: congestion-control lab (simulate, train, distill, benchmark)", "rlcc_lab"};
  app.require_subcommand(1);
  detail::CliState s;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", s.config, "INI configuration file");
    sub->add_option("--seed", s.seed, "PRNG seed")->each([&](const std::string&) { s.seed_set = true; });
    sub->add_option("--out-dir", s.out_dir, "Directory for CSV outputs");
  };
  auto scenario_flags = [&](CLI::App* sub) {
    sub->add_option("--scenario", s.scenario, "many_to_one | all_to_all | long_short");
    sub->add_option("--flows", s.flows, "Total flow count");
    sub->add_option("--controller", s.controller, "dcqcn | swift | rlcc-mlp | rlcc-tree");
    sub->add_option("--decision-latency-us", s.decision_latency_us, "Decision latency override");
    sub->add_option("--policy", s.policy, "MLP checkpoint");
    sub->add_option("--model", s.model, "Tree ensemble file");
  };

  auto* simulate = app.add_subcommand("simulate", "Run one scenario and write its trace");
  common(simulate);
  scenario_flags(simulate);
  auto* bench = app.add_subcommand("bench", "Benchmark controllers on a scenario");
  common(bench);
  scenario_flags(bench);
  bench->add_option("--controllers", s.controllers, "Comma-separated controller list");
  bench->add_option("--latencies", s.latencies, "Comma-separated decision latencies (ablation)");
  auto* trainc = app.add_subcommand("train", "Train the MLP policy");
  common(trainc);
  trainc->add_option("--out", s.out, "Checkpoint to write");
  auto* distillc = app.add_subcommand("distill", "Distill a checkpoint into a tree ensemble");
  common(distillc);
  distillc->add_option("--teacher", s.teacher, "Teacher checkpoint");
  distillc->add_option("--out", s.out, "Ensemble file to write");
  auto* exportc = app.add_subcommand("export", "Emit if-else pseudocode for an ensemble");
  exportc->add_option("--ensemble", s.ensemble, "Ensemble file")->required();
  exportc->add_option("--out", s.out, "Output file (stdout if omitted)");
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate over a (target, beta) grid");
  common(sweep);
  scenario_flags(sweep);
  auto* probe = app.add_subcommand("probe", "Probe a model with synthetic conditions");
  common(probe);
  probe->add_option("--model", s.model, "Tree ensemble file");
  probe->add_option("--policy", s.policy, "MLP checkpoint");
  auto* theory = app.add_subcommand("theory", "Compare steady-state inflation with the fixed-point curve");
  common(theory);
  scenario_flags(theory);
  theory->add_option("--n", s.n_list, "Comma-separated flow counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (simulate->parsed()) return detail::cmd_simulate(s, out, true);
    if (bench->parsed()) return detail::cmd_simulate(s, out, false);
    if (trainc->parsed()) return detail::cmd_train(s, out);
    if (distillc->parsed()) return detail::cmd_distill(s, out);
    if (exportc->parsed()) return detail::cmd_export(s, out);
    if (sweep->parsed()) return detail::cmd_sweep(s, out);
    if (probe->parsed()) return detail::cmd_probe(s, out);
    if (theory->parsed()) return detail::cmd_theory(s, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace rlcc
