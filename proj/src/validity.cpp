#include "rsprice/validity.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace rsprice {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::not_applicable: return "not-applicable";
  }
  return "?";
}

namespace {

std::vector<double> price_grid(const RegimeSet& m, const PriceRange& range) {
  if (!m.has_feedback() || range.points < 2 || !(range.hi > range.lo)) return {range.lo};
  std::vector<double> out(range.points);
  for (std::size_t q = 0; q < range.points; ++q)
    out[q] = range.lo * std::pow(range.hi / range.lo,
                                 static_cast<double>(q) / static_cast<double>(range.points - 1));
  return out;
}

// slack(ctx, target, L, inequality name out); NaN means "not applicable here"
using ChannelSlack = std::function<double(const LocalContext&, std::size_t, double, std::string&)>;

ConditionReport evaluate(const std::string& name, const RegimeSet& m, const SharpeTarget& L,
                         const PriceRange& range, const ChannelSlack& slack_of,
                         bool include_idle_regimes = false) {
  if (L.size() != m.n_states()) throw std::invalid_argument("L has the wrong number of states");
  ConditionReport rep;
  rep.condition = name;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  const auto grid = price_grid(m, range);
  const std::size_t I = m.n_states();
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t j = 0; j < I; ++j) {
      if (j == i && !include_idle_regimes) continue;
      ChannelCheck ch;
      ch.source = i;
      ch.target = j;
      ch.slack = std::numeric_limits<double>::infinity();
      bool seen = false;
      for (double s : grid) {
        const LocalContext ctx = local_context(m, i, s);
        std::string inequality;
        const double slack = slack_of(ctx, j, L.at(i), inequality);
        if (std::isnan(slack)) continue;
        seen = true;
        if (slack < ch.slack) {
          ch.slack = slack;
          ch.s = s;
          ch.inequality = inequality;
        }
      }
      if (!seen) continue;
      ch.verdict = ch.slack > 0.0 ? Verdict::pass : Verdict::fail;
      if (ch.slack < rep.worst_slack) {
        rep.worst_slack = ch.slack;
        rep.state = i;
        rep.target = j;
        rep.s = ch.s;
      }
      rep.channels.push_back(ch);
    }
  }
  if (rep.channels.empty()) {
    rep.verdict = Verdict::not_applicable;
    rep.worst_slack = 0.0;
  } else {
    rep.verdict = rep.worst_slack > 0.0 ? Verdict::pass : Verdict::fail;
  }
  return rep;
}

double kappa2(double L, double theta) { return L * L - theta * theta; }

}  // namespace

ConditionReport check_arbitrage(const RegimeSet& m, const SharpeTarget& L, const PriceRange& range) {
  return evaluate("arbitrage", m, L, range,
                  [](const LocalContext& ctx, std::size_t j, double l, std::string& name) {
                    const double lam = ctx.lambda[j];
                    if (!(lam > 0.0)) return std::numeric_limits<double>::quiet_NaN();
                    name = "kappa + |gamma| sqrt(lambda) theta / delta < sqrt(lambda)";
                    const double k2 = kappa2(l, ctx.theta);
                    const double kappa = std::sqrt(std::max(k2, 0.0));
                    const double root = std::sqrt(lam);
                    return root - (kappa + std::abs(ctx.gamma[j]) * root * ctx.theta / ctx.delta());
                  });
}

ConditionReport check_monotonicity(const RegimeSet& m, const SharpeTarget& L,
                                   const PriceRange& range) {
  return evaluate("monotonicity", m, L, range,
                  [](const LocalContext& ctx, std::size_t j, double l, std::string& name) {
                    const double lam = ctx.lambda[j];
                    if (!(lam > 0.0)) return std::numeric_limits<double>::quiet_NaN();
                    const double g = ctx.gamma[j];
                    const double others = ctx.delta2 - g * g * lam;
                    const double lhs = others / ctx.delta2 * kappa2(l, ctx.theta);
                    if (g == 0.0) {
                      name = "v (L^2 - theta^2) < lambda";
                      return lam - lhs;
                    }
                    name = "v (L^2 - theta^2) + gamma^2 lambda theta^2 / delta^2 < lambda / 2";
                    return 0.5 * lam - (lhs + g * g * lam * ctx.theta * ctx.theta / ctx.delta2);
                  });
}

ConditionReport check_simple_sufficient(const RegimeSet& m, const SharpeTarget& L,
                                        const PriceRange& range) {
  return evaluate(
      "simple-sufficient", m, L, range,
      [](const LocalContext& ctx, std::size_t j, double l, std::string& name) {
        const double lower = l * l - ctx.theta * ctx.theta;
        if (j == ctx.state) {
          if (ctx.any_jump_risk()) return std::numeric_limits<double>::quiet_NaN();
          name = "theta^2 < L^2";
          return lower;
        }
        const double lam = ctx.lambda[j];
        if (!(lam > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        name = "theta^2 < L^2 < lambda / 2";
        return std::min(lower, 0.5 * lam - l * l);
      },
      true);
}

nlohmann::json to_json(const ConditionReport& report) {
  nlohmann::json doc;
  doc["condition"] = report.condition;
  doc["verdict"] = to_string(report.verdict);
  if (report.verdict != Verdict::not_applicable) {
    doc["worst_slack"] = report.worst_slack;
    doc["worst_state"] = report.state + 1;
    doc["worst_target"] = report.target + 1;
    doc["worst_s"] = report.s;
  }
  doc["channels"] = nlohmann::json::array();
  for (const auto& ch : report.channels)
    doc["channels"].push_back({{"source", ch.source + 1},
                               {"target", ch.target + 1},
                               {"inequality", ch.inequality},
                               {"verdict", to_string(ch.verdict)},
                               {"slack", ch.slack},
                               {"s", ch.s}});
  return doc;
}

}  // namespace rsprice
