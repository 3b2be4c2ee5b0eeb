#include <gtest/gtest.h>

#include <set>

#include "rlcc_lab/scenario.hpp"

using namespace rlcc;

TEST(Scenario, ManyToOneSharesOnePort) {
  Engine eng = build_scenario(ScenarioSpec::many_to_one(4, 1), SimConfig{}, greedy_factory());
  EXPECT_EQ(eng.flows().size(), 4u);
  EXPECT_EQ(eng.port_count(), 1u);
  EXPECT_EQ(eng.flows_on_port(0), 4);
}

TEST(Scenario, AllToAllSpreadsOverDestinations) {
  Engine eng = build_scenario(ScenarioSpec::all_to_all(8, 1), SimConfig{}, greedy_factory());
  EXPECT_EQ(eng.flows().size(), 56u);
  EXPECT_EQ(eng.port_count(), 8u);
  for (int p = 0; p < 8; ++p) EXPECT_EQ(eng.flows_on_port(p), 7);
  for (const auto& f : eng.flows()) EXPECT_NE(f.src_host, f.port);
}

TEST(Scenario, LongShortCarriesFiniteFlows) {
  const auto spec = ScenarioSpec::long_short(4, 100);
  Engine eng = build_scenario(spec, SimConfig{}, greedy_factory());
  ASSERT_EQ(eng.flows().size(), 104u);
  EXPECT_EQ(eng.port_count(), 1u);
  int shorts = 0;
  for (const auto& f : eng.flows()) {
    if (f.is_long) continue;
    ++shorts;
    ASSERT_TRUE(f.bits_remaining.has_value());
    EXPECT_DOUBLE_EQ(*f.bits_remaining, spec.short_bytes * 8.0);
    EXPECT_GE(f.start_time_us, spec.warmup_us);
  }
  EXPECT_EQ(shorts, 100);
}

TEST(Scenario, ShortArrivalIsSeeded) {
  const auto spec = ScenarioSpec::long_short(4, 10);
  EXPECT_EQ(short_arrival_us(spec, 5), short_arrival_us(spec, 5));
  EXPECT_NE(short_arrival_us(spec, 5), short_arrival_us(spec, 6));
  auto fixed = spec;
  fixed.short_start_us = 123.0;
  EXPECT_EQ(short_arrival_us(fixed, 5), 123.0);
}

TEST(Scenario, InitialRatesSplitSenderLineRate) {
  Engine eng = build_scenario(ScenarioSpec::many_to_one(4, 8), SimConfig{}, greedy_factory());
  for (const auto& f : eng.flows()) EXPECT_DOUBLE_EQ(f.initial_rate_gbps, 100.0 / 8);
  Engine a2a = build_scenario(ScenarioSpec::all_to_all(4, 2), SimConfig{}, greedy_factory());
  for (const auto& f : a2a.flows()) EXPECT_DOUBLE_EQ(f.initial_rate_gbps, 100.0 / 6);
}

TEST(Scenario, InvalidSpecsRejected) {
  auto s = ScenarioSpec::many_to_one(4, 1);
  s.warmup_us = s.duration_us;
  EXPECT_THROW(s.validate(), ConfigError);
  auto a = ScenarioSpec::all_to_all(1, 1);
  EXPECT_THROW(a.validate(), ConfigError);
  auto l = ScenarioSpec::long_short(1, 2);
  l.short_bytes = 0.0;
  EXPECT_THROW(l.validate(), ConfigError);
  EXPECT_THROW(parse_scenario_kind("ring"), ConfigError);
}

TEST(Scenario, IncastHostSplit) {
  EXPECT_EQ(ScenarioSpec::incast(64).flow_count(), 64);
  EXPECT_EQ(ScenarioSpec::incast(64).hosts, 4);
  EXPECT_EQ(ScenarioSpec::incast(2).flow_count(), 2);
  EXPECT_EQ(ScenarioSpec::incast(3).flow_count(), 3);
  EXPECT_EQ(ScenarioSpec::incast(3).hosts, 1);
}
