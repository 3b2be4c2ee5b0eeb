#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "rlcc_lab/trainer.hpp"

using namespace rlcc;

namespace {

std::vector<double> random_features(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (auto& v : x) v = u(rng);
  return x;
}

RolloutBuffer random_buffer(const MlpPolicy& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-0.3, 0.1);
  RolloutBuffer b(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = random_features(rng, p.inputs());
    const double y = p.forward(x);
    b.push(Transition{std::move(x), d(rng), y, static_cast<int>(i % 3)});
  }
  return b;
}

// sum_t delta_t * y(o_t; theta), whose gradient is the accumulated g.
double surrogate(const MlpPolicy& p, const RolloutBuffer& b, const ActionMapper& m) {
  double s = 0.0;
  for (const auto& t : b.transitions())
    if (m.in_range(t.raw_output)) s += t.delta * p.forward(t.features);
  return s;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 6;
  c.eval_every = 3;
  c.buffer_size = 256;
  c.curriculum.clear();
  for (int n : {2, 8}) {
    auto s = ScenarioSpec::incast(n);
    s.duration_us = 4'000.0;
    s.warmup_us = 1'000.0;
    c.curriculum.push_back(s);
  }
  return c;
}

}  // namespace

TEST(Gradient, MatchesCentralDifferences) {
  const ActionMapper m;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    auto p = MlpPolicy::random(10, 16, 100 + inst, 0.3);
    const auto b = random_buffer(p, 32, 200 + inst);
    const auto g = accumulate_gradient(p, b, m);
    const double h = 1e-6;
    for (std::size_t k = 0; k < p.param_count(); ++k) {
      const double orig = p.params()[k];
      p.params()[k] = orig + h;
      const double up = surrogate(p, b, m);
      p.params()[k] = orig - h;
      const double down = surrogate(p, b, m);
      p.params()[k] = orig;
      const double fd = (up - down) / (2 * h);
      ASSERT_NEAR(g[k], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "instance " << inst << " param " << k;
    }
  }
}

TEST(Gradient, ZeroDeltaGivesZeroGradient) {
  const auto p = MlpPolicy::random(10, 16, 1);
  std::mt19937_64 rng(1);
  RolloutBuffer b(16);
  for (int i = 0; i < 16; ++i) {
    auto x = random_features(rng, 10);
    const double y = p.forward(x);
    b.push(Transition{std::move(x), 0.0, y, 0});
  }
  for (double v : accumulate_gradient(p, b)) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, SingleTransitionIsScaledOutputGradient) {
  const auto p = MlpPolicy::random(10, 16, 2);
  std::mt19937_64 rng(2);
  auto x = random_features(rng, 10);
  RolloutBuffer b(1);
  b.push(Transition{x, -0.2, p.forward(x), 0});
  const auto g = accumulate_gradient(p, b);
  std::vector<double> plain(p.param_count(), 0.0);
  p.backward(x, 1.0, plain);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], -0.2 * plain[k], 1e-15);
}

TEST(Gradient, StepMovesOutputWithDeltaSign) {
  for (double delta : {0.05, -0.05}) {
    auto p = MlpPolicy::random(10, 16, 3);
    std::mt19937_64 rng(3);
    auto x = random_features(rng, 10);
    const double y0 = p.forward(x);
    RolloutBuffer b(1);
    b.push(Transition{x, delta, y0, 0});
    apply_update(p, accumulate_gradient(p, b), 1e-2);
    EXPECT_GT((p.forward(x) - y0) * delta, 0.0);
  }
}

TEST(Gradient, ClampedTransitionsAreSkipped) {
  const auto p = MlpPolicy::random(10, 16, 4);
  std::mt19937_64 rng(4);
  RolloutBuffer b(2);
  b.push(Transition{random_features(rng, 10), 0.1, 0.5, 0});
  b.push(Transition{random_features(rng, 10), -0.1, -0.5, 0});
  for (double v : accumulate_gradient(p, b)) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, TrajectoryMeanWeighting) {
  const auto p = MlpPolicy::random(10, 16, 5);
  std::mt19937_64 rng(5);
  auto x1 = random_features(rng, 10), x2 = random_features(rng, 10);
  RolloutBuffer b(2);
  b.push(Transition{x1, 0.1, p.forward(x1), 7});
  b.push(Transition{x2, -0.3, p.forward(x2), 7});
  const auto g = accumulate_gradient(p, b, ActionMapper{}, DeltaWeighting::TrajectoryMean);
  std::vector<double> oracle(p.param_count(), 0.0);
  p.backward(x1, -0.1, oracle);
  p.backward(x2, -0.1, oracle);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_NEAR(g[k], oracle[k], 1e-15);
}

TEST(Buffer, FillAndClear) {
  RolloutBuffer b(2);
  EXPECT_THROW(accumulate_gradient(MlpPolicy{}, b), ContractViolation);
  b.push(Transition{std::vector<double>(10), 0.0, 0.0, 0});
  EXPECT_FALSE(b.full());
  b.push(Transition{std::vector<double>(10), 0.0, 0.0, 0});
  EXPECT_TRUE(b.full());
  EXPECT_THROW(b.push(Transition{std::vector<double>(10), 0.0, 0.0, 0}), ContractViolation);
  b.clear();
  EXPECT_EQ(b.size(), 0u);
  EXPECT_THROW(b.push(Transition{{}, std::nan(""), 0.0, 0}), NumericError);
  EXPECT_THROW(RolloutBuffer(0), ConfigError);
}

TEST(Update, RejectsNonFiniteGradient) {
  MlpPolicy p;
  std::vector<double> g(p.param_count(), 0.0);
  g[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(apply_update(p, g, 1e-3), NumericError);
}

TEST(Train, ZeroEpochsReturnsInitialPolicy) {
  auto c = quick_config();
  c.epochs = 0;
  const auto init = MlpPolicy::random(10, 16, 77);
  const auto r = train(c, SimConfig{}, &init);
  EXPECT_TRUE(r.log.empty());
  for (std::size_t k = 0; k < init.param_count(); ++k) EXPECT_EQ(r.policy.params()[k], init.params()[k]);
}

TEST(Train, FairShareOracleHasZeroDelta) {
  for (int n : {2, 16, 64}) {
    auto s = ScenarioSpec::incast(n);
    s.duration_us = 5'000.0;
    s.warmup_us = 1'000.0;
    const auto e = evaluate_fair_share_oracle(s, SimConfig{});
    EXPECT_NEAR(e.mean_delta, 0.0, 1e-9) << n;
    EXPECT_NEAR(e.mean_inflation, theory_curve(RewardParams{}, n), 1e-9) << n;
  }
}

TEST(Train, ShortRunImprovesReward) {
  const auto c = quick_config();
  SimConfig sim;
  const auto init = MlpPolicy::random(10, 16, derive_seed(c.seed, 5), c.init_scale);
  const auto before = evaluate_suite(init, c.curriculum, sim, c.reward);
  const auto r = train(c, sim);
  ASSERT_FALSE(r.log.empty());
  for (const auto& l : r.log) EXPECT_GT(l.updates, 0);
  const auto after = evaluate_suite(r.policy, c.curriculum, sim, c.reward);
  EXPECT_GT(after.mean_reward, before.mean_reward);
  std::ostringstream os;
  write_training_log(os, r.log);
  const std::string csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(r.log.size()) + 1);
}

TEST(Train, DeterministicForFixedSeed) {
  auto c = quick_config();
  c.epochs = 2;
  const auto a = train(c, SimConfig{});
  const auto b = train(c, SimConfig{});
  for (std::size_t k = 0; k < a.policy.param_count(); ++k) ASSERT_EQ(a.policy.params()[k], b.policy.params()[k]);
}
