#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsprice/market.hpp"
#include "support.hpp"

using namespace rsprice;
using rsprice::testing::table1;

namespace {

MarketConfig zero_drift_config() {
  MarketConfig cfg = table1_config();
  for (auto& s : cfg.states) s.mu = s.r = 0.0;
  return cfg;
}

}  // namespace

TEST(Market, BuildsTwoStateModel) {
  const RegimeSet m = table1();
  ASSERT_EQ(m.n_states(), 2u);
  EXPECT_DOUBLE_EQ(m.gamma(1, 0), -0.1);
  EXPECT_DOUBLE_EQ(m.gamma(0, 1), 0.05);
  EXPECT_DOUBLE_EQ(m.lambda(1, 0, 100.0), 2.0);
  EXPECT_DOUBLE_EQ(m.lambda(0, 1, 100.0), 5.0);
  EXPECT_DOUBLE_EQ(m.lambda(0, 0, 100.0), 0.0);
  EXPECT_EQ(m.j0(), 0u);
  EXPECT_DOUBLE_EQ(m.s0(), 100.0);
}

TEST(Market, InstantaneousVarianceAndSharpe) {
  const RegimeSet m = table1();
  EXPECT_NEAR(instantaneous_variance(m, 0, 100.0), 0.01 + 0.01 * 2.0, 1e-15);
  EXPECT_NEAR(instantaneous_variance(m, 1, 100.0), 0.0625 + 0.0025 * 5.0, 1e-15);
  EXPECT_NEAR(sharpe_theta(m, 0, 100.0), 0.04 / std::sqrt(0.03), 1e-14);
  EXPECT_NEAR(sharpe_theta(m, 1, 100.0), 0.01 / std::sqrt(0.075), 1e-14);
}

TEST(Market, RejectsMuBelowR) {
  MarketConfig cfg = table1_config();
  cfg.states[1].mu = 0.0;
  try {
    build_market(cfg);
    FAIL() << "expected MarketError";
  } catch (const MarketError& e) {
    EXPECT_NE(std::string(e.what()).find("mu < r at state 2"), std::string::npos);
  }
}

TEST(Market, RejectsGammaAtOrBelowMinusOne) {
  MarketConfig cfg = table1_config();
  cfg.transitions[0].gamma = -1.0;
  EXPECT_THROW(build_market(cfg), MarketError);
}

TEST(Market, RejectsDegenerateVariance) {
  MarketConfig cfg = table1_config();
  cfg.states[0].sigma = 0.0;
  cfg.transitions[0].gamma = 0.0;
  EXPECT_THROW(build_market(cfg), MarketError);
}

TEST(Market, RejectsNegativeIntensityAndBadStates) {
  MarketConfig cfg = table1_config();
  cfg.transitions[0].lambda = Intensity::constant(-1.0);
  EXPECT_THROW(build_market(cfg), MarketError);
  cfg = table1_config();
  cfg.transitions[0].to = 3;
  EXPECT_THROW(build_market(cfg), MarketError);
  cfg = table1_config();
  cfg.j0 = 3;
  EXPECT_THROW(build_market(cfg), MarketError);
  cfg = table1_config();
  cfg.states.clear();
  cfg.transitions.clear();
  EXPECT_THROW(build_market(cfg), MarketError);
}

TEST(Market, ZeroIntensityMeansNoTransitions) {
  MarketConfig cfg = table1_config();
  for (auto& t : cfg.transitions) t.lambda = Intensity::constant(0.0);
  const RegimeSet m = build_market(cfg);
  const PathSet p = simulate_paths(m, 100.0, 0, 1.0, {20, 500, 3, 1, false});
  for (std::size_t k = 0; k <= 20; ++k)
    for (std::size_t q = 0; q < 500; ++q) ASSERT_EQ(p.regime(k, q), 0u);
}

TEST(Market, JsonRoundTrip) {
  const MarketConfig cfg = table1_config();
  const MarketConfig back = market_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  const auto shipped = std::filesystem::path(RSPRICE_SOURCE_DIR) / "data" / "table1.json";
  EXPECT_EQ(to_json(load_market_config(shipped.string())), to_json(cfg));
}

TEST(Market, MissingFileIsMarketError) {
  EXPECT_THROW(load_market_config("/nonexistent/model.json"), MarketError);
}

TEST(Market, AffineIntensityParsesAndRespectsCap) {
  const auto doc = nlohmann::json::parse(R"({
    "states": [{"r": 0.0, "mu": 0.05, "sigma": 0.2}, {"r": 0.0, "mu": 0.01, "sigma": 0.3}],
    "transitions": [
      {"from": 1, "to": 2, "gamma": -0.1, "lambda_affine": {"a": 0.5, "b": 0.01, "cap": 10.0}},
      {"from": 2, "to": 1, "gamma": 0.1, "lambda": 3.0}]})");
  const RegimeSet m = build_market(market_config_from_json(doc));
  EXPECT_TRUE(m.has_feedback());
  EXPECT_DOUBLE_EQ(m.lambda(1, 0, 100.0), 1.5);
  const PathSet p = simulate_paths(m, 100.0, 0, 1.0, {10, 200, 5, 1, false});
  EXPECT_EQ(p.n_paths(), 200u);
}

TEST(Simulation, ZeroDriftStockIsMartingale) {
  const RegimeSet m = build_market(zero_drift_config());
  const std::size_t n = 40000;
  const PathSet p = simulate_paths(m, 100.0, 0, 1.0, {10, n, 11, 1, false});
  double mean = 0.0, sq = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    mean += p.s(10, q);
    sq += p.s(10, q) * p.s(10, q);
  }
  mean /= n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - 100.0), 4.0 * se);
}

TEST(Simulation, FirstHoldingTimeIsExponential) {
  const RegimeSet m = table1();
  const std::size_t n = 4000;
  const PathSet p = simulate_paths(m, 100.0, 0, 6.0, {60, n, 17, 1, true});
  std::vector<double> tau;
  for (std::size_t q = 0; q < n; ++q) {
    const auto& ev = p.events(q);
    ASSERT_FALSE(ev.empty());
    EXPECT_EQ(ev.front().from, 0u);
    tau.push_back(ev.front().t);
  }
  std::sort(tau.begin(), tau.end());
  double ks = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    const double F = 1.0 - std::exp(-2.0 * tau[q]);
    ks = std::max({ks, std::abs(F - static_cast<double>(q) / n),
                   std::abs(F - static_cast<double>(q + 1) / n)});
  }
  EXPECT_LT(ks * std::sqrt(static_cast<double>(n)), 1.63);  // 1% critical value
}

TEST(Simulation, JumpSizesMatchTransitions) {
  const RegimeSet m = table1();
  const PathSet p = simulate_paths(m, 100.0, 0, 1.0, {50, 300, 19, 1, true});
  std::size_t seen = 0;
  for (std::size_t q = 0; q < 300; ++q)
    for (const auto& e : p.events(q)) {
      EXPECT_NEAR(e.s_after / e.s_before - 1.0, m.gamma(e.to, e.from), 1e-12);
      ++seen;
    }
  EXPECT_GT(seen, 0u);
}

TEST(Simulation, IndependentOfThreadCount) {
  const RegimeSet m = table1();
  const PathSet a = simulate_paths(m, 100.0, 0, 1.0, {25, 999, 42, 1, false});
  const PathSet b = simulate_paths(m, 100.0, 0, 1.0, {25, 999, 42, 4, false});
  for (std::size_t k = 0; k <= 25; ++k)
    for (std::size_t q = 0; q < 999; ++q) {
      ASSERT_EQ(a.s(k, q), b.s(k, q));
      ASSERT_EQ(a.regime(k, q), b.regime(k, q));
    }
}

TEST(Simulation, CompensatedIncrementsHaveZeroMean) {
  const RegimeSet m = table1();
  const std::size_t n = 20000, K = 10;
  const PathSet p = simulate_paths(m, 100.0, 0, 1.0, {K, n, 23, 1, false});
  for (std::size_t j = 0; j < 2; ++j) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t q = 0; q < n; ++q) {
        sum += p.dNtilde(k, j, q);
        sq += p.dNtilde(k, j, q) * p.dNtilde(k, j, q);
      }
    const double N = static_cast<double>(n * K);
    const double mean = sum / N;
    EXPECT_LT(std::abs(mean), 4.0 * std::sqrt((sq / N - mean * mean) / N));
  }
}

TEST(Simulation, CsvHasOneRowPerNode) {
  const RegimeSet m = table1();
  const PathSet p = simulate_paths(m, 100.0, 0, 1.0, {4, 3, 1, 1, false});
  std::ostringstream os;
  p.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "path_id,t,S,J");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3u * 5u);
}
