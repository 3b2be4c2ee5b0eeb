#include <gtest/gtest.h>

#include <sstream>

#include "rlcc_lab/engine.hpp"
#include "rlcc_lab/scenario.hpp"

using namespace rlcc;

namespace {

SimConfig quiet() {
  SimConfig c;
  c.sample_interval_us = 0.0;
  return c;
}

// Records every feedback it sees and keeps a fixed rate.
class Recorder final : public Controller {
 public:
  Recorder(std::vector<ProbeFeedback>* log, double rate) : log_(log), rate_(rate) {}
  double decide(const ProbeFeedback& fb) override {
    log_->push_back(fb);
    return rate_;
  }
  std::optional<double> initial_rate() const override { return rate_; }

 private:
  std::vector<ProbeFeedback>* log_;
  double rate_;
};

}  // namespace

TEST(Engine, FirstProbeReturnsAfterBaseRtt) {
  Engine eng(quiet());
  eng.set_controller_factory(greedy_factory());
  eng.add_port();
  eng.add_flow(FlowSpec{});
  auto o = eng.step();
  EXPECT_EQ(o.kind, EventKind::FlowStart);
  o = eng.step();
  EXPECT_EQ(o.kind, EventKind::ProbeArrival);
  EXPECT_DOUBLE_EQ(o.time_us, 10.0);
  o = eng.step();
  EXPECT_EQ(o.kind, EventKind::DecisionReady);
  EXPECT_DOUBLE_EQ(o.time_us, 12.0);
  o = eng.step();
  EXPECT_EQ(o.kind, EventKind::ProbeArrival);
  EXPECT_DOUBLE_EQ(o.time_us, 22.0);
}

TEST(Engine, StepOnEmptyQueueThrows) {
  Engine eng(quiet());
  EXPECT_THROW(eng.step(), ContractViolation);
}

TEST(Engine, UnknownPortRejected) {
  Engine eng(quiet());
  eng.add_port();
  FlowSpec f;
  f.port = 3;
  EXPECT_THROW(eng.add_flow(f), ConfigError);
}

TEST(Engine, DecisionLatencySeparatesMeasurementAndAction) {
  SimConfig c = quiet();
  c.decision_latency_us = 450.0;
  std::vector<ProbeFeedback> log;
  Engine eng(c);
  eng.set_controller_factory([&](const FlowInfo&) { return std::make_unique<Recorder>(&log, 50.0); });
  eng.add_port();
  eng.add_flow(FlowSpec{});
  eng.run_until(5'000.0);
  ASSERT_GE(log.size(), 5u);
  for (const auto& fb : log) {
    EXPECT_GE(fb.now_us - fb.measured_at_us, 450.0 - 1e-9);
    EXPECT_GE(fb.rtt_us, c.base_rtt_us);
    // 45+ base RTTs pass between measuring and acting on the measurement
    EXPECT_GE((fb.now_us - fb.measured_at_us) / c.base_rtt_us, 45.0);
  }
}

TEST(Engine, ProbeCausalityAndOrdering) {
  SimConfig c = quiet();
  c.decision_latency_us = 3.0;
  Engine eng = build_scenario(ScenarioSpec::many_to_one(4, 4), c, greedy_factory());
  double last = 0.0;
  std::map<int, double> arrival;
  for (int i = 0; i < 20'000; ++i) {
    const auto o = eng.step();
    ASSERT_GE(o.time_us, last);
    last = o.time_us;
    if (o.kind == EventKind::ProbeArrival) arrival[o.flow_id] = o.time_us;
    if (o.kind == EventKind::DecisionReady) ASSERT_GE(o.time_us, arrival.at(o.flow_id) + 3.0 - 1e-9);
  }
}

TEST(Engine, FlowEndRemovesRate) {
  Engine eng(quiet());
  eng.set_controller_factory(fixed_rate_factory(40.0));
  eng.add_port();
  eng.add_flow(FlowSpec{});
  FlowSpec s;
  s.size_bits = 40.0 * 100.0 * kBitsPerGbpsUs;  // 100 us at 40 Gbps
  eng.add_flow(s);
  eng.run_until(50.0);
  EXPECT_DOUBLE_EQ(eng.port_rate(0), 80.0);
  bool ended = false;
  while (!ended) {
    const auto o = eng.step();
    if (o.kind == EventKind::FlowEnd && !o.stale) {
      ended = true;
      EXPECT_NEAR(o.time_us, 100.0, 1e-9);
    }
  }
  EXPECT_DOUBLE_EQ(eng.port_rate(0), 40.0);
  ASSERT_TRUE(eng.flows()[1].completion_time_us.has_value());
  EXPECT_NEAR(*eng.flows()[1].completion_time_us, 110.0, 1e-9);
}

TEST(Engine, ZeroFlowsGiveEmptyTrace) {
  Engine eng(SimConfig{});
  eng.set_controller_factory(greedy_factory());
  eng.add_port();
  const auto& tr = eng.run(1'000.0);
  ASSERT_FALSE(tr.samples.empty());
  for (const auto& s : tr.samples) {
    EXPECT_EQ(s.ports[0].occupancy_bits, 0.0);
    EXPECT_EQ(s.ports[0].dropped_bits, 0.0);
  }
}

TEST(Engine, SingleGreedyFlowDeliversLineRate) {
  Engine eng(quiet());
  eng.set_controller_factory(greedy_factory());
  eng.add_port();
  eng.add_flow(FlowSpec{});
  eng.run(10'000.0);
  EXPECT_NEAR(eng.port(0).delivered_bits, bits_for(100.0, 10'000.0), 1e-6 * bits_for(100.0, 10'000.0));
  EXPECT_EQ(eng.port(0).dropped_bits, 0.0);
}

TEST(Engine, FairShareFlowsKeepQueueEmpty) {
  Engine eng(quiet());
  eng.set_controller_factory(fair_share_factory(100.0));
  eng.add_port();
  for (int i = 0; i < 4; ++i) eng.add_flow(FlowSpec{});
  eng.run(5'000.0);
  EXPECT_EQ(eng.port(0).occupancy_bits, 0.0);
  EXPECT_NEAR(eng.port(0).delivered_bits / bits_for(100.0, 5'000.0), 1.0, 1e-12);
}

TEST(Engine, PerFlowDropsSumToPortDrops) {
  Engine eng = build_scenario(ScenarioSpec::many_to_one(2, 3), quiet(), greedy_factory());
  eng.run(3'000.0);
  const auto w = eng.window_stats();
  double flow_drops = 0.0, flow_sent = 0.0;
  for (std::size_t i = 0; i < w.flow_dropped_bits.size(); ++i) {
    flow_drops += w.flow_dropped_bits[i];
    flow_sent += w.flow_sent_bits[i];
  }
  EXPECT_GT(eng.port(0).dropped_bits, 0.0);
  EXPECT_NEAR(flow_drops, eng.port(0).dropped_bits, 1e-6 * eng.port(0).dropped_bits);
  EXPECT_NEAR(flow_sent, eng.port(0).injected_bits, 1e-6 * flow_sent);
}

TEST(Engine, ConservationAtEverySample) {
  SimConfig c;
  c.sample_interval_us = 10.0;
  Engine eng = build_scenario(ScenarioSpec::all_to_all(4, 3), c, greedy_factory());
  const auto& tr = eng.run(2'000.0);
  for (const auto& s : tr.samples)
    for (const auto& p : s.ports) {
      const double rhs = p.delivered_bits + p.dropped_bits + p.occupancy_bits;
      ASSERT_LE(std::abs(p.injected_bits - rhs), 1e-6 * std::max(1.0, p.injected_bits));
    }
}

TEST(Engine, IdenticalSeedsGiveIdenticalTraces) {
  SimConfig c;
  c.sample_interval_us = 20.0;
  c.record_flows = true;
  auto run = [&](std::uint64_t seed) {
    c.seed = seed;
    Engine eng = build_scenario(ScenarioSpec::long_short(2, 10), c, greedy_factory());
    eng.set_ecn(1e5, 4e5, 0.5);
    std::ostringstream os;
    eng.run(4'000.0).write_csv(os);
    return os.str();
  };
  EXPECT_EQ(run(3), run(3));
  EXPECT_NE(run(3), run(4));
}

TEST(Trace, CsvHeader) {
  MetricsTrace t;
  std::ostringstream os;
  t.write_csv(os);
  EXPECT_EQ(os.str(), "time_us,flow_id,rate_gbps,rtt_us,port_occupancy_bits,dropped_bits,delivered_bits\n");
}
