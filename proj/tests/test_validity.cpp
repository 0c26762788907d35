#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rsprice/validity.hpp"
#include "support.hpp"

using namespace rsprice;
using namespace rsprice::testing;

namespace {
const PriceRange kSpot{100.0, 100.0, 1};
}

TEST(Validity, CalibratedTargetsPassEverything) {
  const RegimeSet m = table1();
  const SharpeTarget L{{0.4, 0.2}};
  EXPECT_EQ(check_arbitrage(m, L, kSpot).verdict, Verdict::pass);
  EXPECT_EQ(check_monotonicity(m, L, kSpot).verdict, Verdict::pass);
  EXPECT_EQ(check_simple_sufficient(m, L, kSpot).verdict, Verdict::pass);
}

TEST(Validity, HighTargetsBreakArbitrageButNotMonotonicity) {
  const RegimeSet m = table1();
  const SharpeTarget L{{1.3, 1.3}};
  const auto arb = check_arbitrage(m, L, kSpot);
  EXPECT_EQ(arb.verdict, Verdict::fail);
  EXPECT_EQ(arb.state, 0u);
  // state 1: kappa + |gamma| sqrt(lambda) theta / delta against sqrt(2)
  const double theta = 0.04 / std::sqrt(0.03);
  const double lhs = std::sqrt(1.69 - theta * theta) + 0.1 * std::sqrt(2.0) * theta / std::sqrt(0.03);
  EXPECT_NEAR(arb.worst_slack, std::sqrt(2.0) - lhs, 1e-12);
  EXPECT_EQ(check_monotonicity(m, L, kSpot).verdict, Verdict::pass);
  EXPECT_EQ(check_simple_sufficient(m, L, kSpot).verdict, Verdict::fail);
}

TEST(Validity, HighestReportedTargetsStillPass) {
  const RegimeSet m = table1();
  EXPECT_EQ(check_arbitrage(m, SharpeTarget{{1.2, 1.2}}, kSpot).verdict, Verdict::pass);
  EXPECT_EQ(check_monotonicity(m, SharpeTarget{{1.2, 1.2}}, kSpot).verdict, Verdict::pass);
}

TEST(Validity, ZeroJumpChannelUsesLinearBound) {
  MarketConfig cfg = table1_config();
  cfg.transitions[0].gamma = 0.0;
  const RegimeSet m = build_market(cfg);
  const SharpeTarget L{{0.9, 0.2}};
  const auto rep = check_monotonicity(m, L, kSpot);
  const double theta = 0.04 / 0.1;
  // sigma^2 / delta^2 (L^2 - theta^2) < lambda
  double slack = 0.0;
  for (const auto& ch : rep.channels)
    if (ch.source == 0) slack = ch.slack;
  EXPECT_NEAR(slack, 2.0 - (0.81 - theta * theta), 1e-12);
}

TEST(Validity, SimpleConditionBounds) {
  const RegimeSet m = table1();
  const double theta1 = sharpe_theta(m, 0, 100.0);
  EXPECT_EQ(check_simple_sufficient(m, SharpeTarget{{theta1, 0.2}}, kSpot).verdict, Verdict::fail);
  // lambda_1 / 2 = 1 < L^2
  EXPECT_EQ(check_simple_sufficient(m, SharpeTarget{{1.01, 0.2}}, kSpot).verdict, Verdict::fail);
}

TEST(Validity, SimpleConditionImpliesBoth) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::size_t simple_passes = 0;
  for (int n = 0; n < 500; ++n) {
    const RegimeSet m = build_market(random_market_config(rng, 2 + n % 2));
    SharpeTarget L;
    for (std::size_t i = 0; i < m.n_states(); ++i)
      L.L.push_back(sharpe_theta(m, i, 100.0) + 1.5 * U(rng));
    if (check_simple_sufficient(m, L, kSpot).verdict != Verdict::pass) continue;
    ++simple_passes;
    // models without any active channel make both checks vacuous
    EXPECT_NE(check_arbitrage(m, L, kSpot).verdict, Verdict::fail);
    EXPECT_NE(check_monotonicity(m, L, kSpot).verdict, Verdict::fail);
  }
  EXPECT_GT(simple_passes, 50u);
}

TEST(Validity, ReportsAreDeterministicJson) {
  const RegimeSet m = table1();
  const auto a = to_json(check_arbitrage(m, SharpeTarget{{0.4, 0.2}}, kSpot));
  const auto b = to_json(check_arbitrage(m, SharpeTarget{{0.4, 0.2}}, kSpot));
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a.at("verdict"), "pass");
}
