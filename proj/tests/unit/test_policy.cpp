#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "rlcc_lab/policy.hpp"
#include "rlcc_lab/rlcc_controller.hpp"

using namespace rlcc;

TEST(Reward, DeltaExamples) {
  const RewardParams p;
  EXPECT_DOUBLE_EQ(compute_delta(p, 1.0, 100.0, 100.0), 0.064);
  EXPECT_DOUBLE_EQ(compute_reward(p, 1.0, 100.0, 100.0), -0.004096);
  EXPECT_NEAR(compute_delta(p, 2.5, 100.0, 100.0), -0.936, 1e-15);
  EXPECT_NEAR(compute_reward(p, 2.5, 100.0, 100.0), -0.876096, 1e-15);
  EXPECT_NEAR(compute_delta(p, 2.5, 25.0, 100.0), 0.064 - 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(compute_delta(p, p.beta, 100.0, 100.0), p.target);
}

TEST(Reward, DeltaBoundedByTarget) {
  const RewardParams p;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> infl(1.0, 50.0), rate(0.1, 100.0);
  for (int i = 0; i < 10'000; ++i) ASSERT_LE(compute_delta(p, infl(rng), rate(rng), 100.0), p.target);
}

TEST(Reward, TheoryCurveIsTheFixedPoint) {
  const RewardParams p;
  for (int n = 1; n <= 4096; ++n) {
    const double infl = theory_curve(p, n);
    ASSERT_NEAR(compute_delta(p, infl, 100.0 / n, 100.0), 0.0, 1e-12) << n;
  }
  EXPECT_THROW(theory_curve(p, 0.5), ContractViolation);
}

TEST(Reward, InvalidParams) {
  RewardParams p;
  p.beta = 0.9;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.target = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Action, ClampInLogSpace) {
  const ActionMapper m;
  EXPECT_DOUBLE_EQ(m.multiplier(0.0), 1.0);
  EXPECT_DOUBLE_EQ(m.multiplier(10.0), 1.25);
  EXPECT_NEAR(m.multiplier(-10.0), 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(m.multiplier(0.1), std::exp(0.1));
  EXPECT_TRUE(m.in_range(0.0));
  EXPECT_FALSE(m.in_range(0.3));
}

TEST(Window, KeepsNewestPairsOldestFirst) {
  ObservationWindow w(3, 0.064, 0.0);
  EXPECT_EQ(w.flatten(), (std::vector<double>{0.064, 0.0, 0.064, 0.0, 0.064, 0.0}));
  for (int i = 1; i <= 5; ++i) push_observation(w, i * 0.1, -i * 0.01);
  const auto v = w.flatten();
  ASSERT_EQ(v.size(), 6u);
  EXPECT_DOUBLE_EQ(v[0], 0.3);
  EXPECT_DOUBLE_EQ(v[1], -0.03);
  EXPECT_DOUBLE_EQ(v[4], 0.5);
  EXPECT_DOUBLE_EQ(v[5], -0.05);
  std::vector<double> small(4);
  EXPECT_THROW(w.flatten_into(small), ContractViolation);
  EXPECT_THROW(ObservationWindow(0), ConfigError);
}

TEST(Mlp, ForwardMatchesNaiveOracle) {
  const auto p = MlpPolicy::random(10, 16, 42, 0.5);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(10);
  for (int k = 0; k < 100; ++k) {
    for (auto& v : x) v = u(rng);
    const auto theta = p.params();
    double y = theta[theta.size() - 1];
    for (int h = 0; h < 16; ++h) {
      double z = theta[160 + static_cast<std::size_t>(h)];
      for (int i = 0; i < 10; ++i) z += theta[static_cast<std::size_t>(h * 10 + i)] * x[static_cast<std::size_t>(i)];
      y += theta[176 + static_cast<std::size_t>(h)] * std::tanh(z);
    }
    ASSERT_NEAR(p.forward(x), y, 1e-12);
  }
  EXPECT_EQ(p.param_count(), 193u);
}

TEST(Mlp, ForwardOnWindowAndNonFiniteGuard) {
  auto p = MlpPolicy::random(10, 16, 3);
  ObservationWindow w(5);
  EXPECT_DOUBLE_EQ(mlp_forward(p, w), p.forward(w.flatten()));
  p.b2() = std::numeric_limits<double>::infinity();
  EXPECT_THROW(mlp_forward(p, w), NumericError);
  std::vector<double> wrong(3);
  EXPECT_THROW(p.forward(wrong), ContractViolation);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  PolicyCheckpoint c;
  c.policy = MlpPolicy::random(10, 16, 9, 0.7);
  c.reward.target = 0.05;
  std::stringstream ss;
  save_checkpoint(ss, c);
  const auto back = load_checkpoint(ss);
  ASSERT_EQ(back.policy.param_count(), c.policy.param_count());
  for (std::size_t i = 0; i < c.policy.param_count(); ++i) EXPECT_EQ(back.policy.params()[i], c.policy.params()[i]);
  EXPECT_EQ(back.history, 5);
  EXPECT_EQ(back.reward.target, 0.05);
  EXPECT_EQ(back.mapper.y_max, c.mapper.y_max);
}

TEST(Checkpoint, RejectsGarbage) {
  std::istringstream a("rlcc-mlp 2\n");
  EXPECT_THROW(load_checkpoint(a), ConfigError);
  std::istringstream b("hello");
  EXPECT_THROW(load_checkpoint(b), ConfigError);
  std::istringstream c("rlcc-mlp 1\nhistory 5\nhidden 2\nclamp -0.2 0.2\nreward 0.064 1.5\nW1 2 9\n");
  EXPECT_THROW(load_checkpoint(c), ConfigError);
}

TEST(Controller, AppliesClampedMultiplier) {
  const ActionMapper m;
  RlccController ctl([](std::span<const double>) { return 5.0; }, RewardParams{}, m, 5, 0);
  ProbeFeedback fb;
  fb.rtt_us = 10.0;
  fb.base_rtt_us = 10.0;
  fb.rate_gbps = 40.0;
  fb.line_rate_gbps = 100.0;
  EXPECT_DOUBLE_EQ(ctl.decide(fb), 50.0);
  const auto [d, a] = ctl.window().at(4);
  EXPECT_DOUBLE_EQ(d, 0.064);
  EXPECT_DOUBLE_EQ(a, 0.0);
  ctl.decide(fb);
  EXPECT_DOUBLE_EQ(ctl.window().at(4).second, m.y_max);
}

TEST(Controller, NonFiniteModelOutputThrows) {
  RlccController ctl([](std::span<const double>) { return std::nan(""); }, RewardParams{}, ActionMapper{}, 5, 0);
  ProbeFeedback fb;
  fb.rtt_us = fb.base_rtt_us = 10.0;
  fb.rate_gbps = fb.line_rate_gbps = 100.0;
  EXPECT_THROW(ctl.decide(fb), NumericError);
}
