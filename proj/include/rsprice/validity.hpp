#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsprice/generator.hpp"
#include "rsprice/market.hpp"

namespace rsprice {

enum class Verdict { pass, fail, not_applicable };
std::string to_string(Verdict v);

/// Price interval over which intensity-dependent conditions are evaluated.
struct PriceRange {
  double lo = 100.0;
  double hi = 100.0;
  std::size_t points = 101;
};

/// Worst case of one inequality for one (source, target) channel.
struct ChannelCheck {
  std::size_t source = 0;
  std::size_t target = 0;
  std::string inequality;
  Verdict verdict = Verdict::not_applicable;
  double slack = 0.0;  ///< right side minus left side at the worst price
  double s = 0.0;
};

struct ConditionReport {
  std::string condition;
  Verdict verdict = Verdict::not_applicable;
  double worst_slack = 0.0;
  std::size_t state = 0;   ///< source regime of the worst case
  std::size_t target = 0;  ///< target regime of the worst case
  double s = 0.0;
  std::vector<ChannelCheck> channels;
};

/// sqrt(L^2 - theta^2) + |gamma_j| sqrt(lambda_j) theta / delta < sqrt(lambda_j)
/// on every channel with lambda_j > 0.
ConditionReport check_arbitrage(const RegimeSet& m, const SharpeTarget& L, const PriceRange& range);

/// With v_j = (sigma^2 + sum_{k != j} gamma_k^2 lambda_k) / delta^2:
///   v_j (L^2 - theta^2) < lambda_j                                  if gamma_j == 0,
///   v_j (L^2 - theta^2) + gamma_j^2 lambda_j theta^2 / delta^2 < lambda_j / 2  otherwise,
/// on every channel with lambda_j > 0.
ConditionReport check_monotonicity(const RegimeSet& m, const SharpeTarget& L,
                                   const PriceRange& range);

/// theta^2 < L^2 < lambda_j / 2 on every channel with lambda_j > 0 (only the
/// lower bound for regimes without active channels). Implies both checks above.
ConditionReport check_simple_sufficient(const RegimeSet& m, const SharpeTarget& L,
                                        const PriceRange& range);

nlohmann::json to_json(const ConditionReport& report);

}  // namespace rsprice
