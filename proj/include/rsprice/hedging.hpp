#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rsprice/claim.hpp"
#include "rsprice/generator.hpp"
#include "rsprice/lsmc.hpp"
#include "rsprice/market.hpp"
#include "rsprice/pide.hpp"

namespace rsprice {

/// Solved price representation queried along backtest paths.
class PriceSurface {
 public:
  virtual ~PriceSurface() = default;
  /// Refreshes ctx and c (with c.y = Y) at node k of the backtest grid.
  /// Returns false when (i, s) lies outside the solved domain (value extrapolated).
  virtual bool evaluate(std::size_t k, double t, std::size_t i, double s, LocalContext& ctx,
                        ControlVector& c) const = 0;
  virtual const RegimeSet& market() const = 0;
  virtual const Claim& claim() const = 0;
  virtual double mortality_rate(std::size_t) const { return 0.0; }
};

/// Uses the regression functions; the backtest grid must match the solution grid.
class LsmcSurface : public PriceSurface {
 public:
  explicit LsmcSurface(const BsdeSolution& solution) : sol_(solution) {}
  bool evaluate(std::size_t k, double t, std::size_t i, double s, LocalContext& ctx,
                ControlVector& c) const override;
  const RegimeSet& market() const override { return sol_.market(); }
  const Claim& claim() const override { return sol_.claim(); }
  double mortality_rate(std::size_t k) const override { return sol_.mortality_rate(k); }

 private:
  const BsdeSolution& sol_;
};

/// Uses the nearest PIDE time layer, Z = V_s s sigma and U_j = V(s (1 + gamma_j), j) - V.
class PideSurface : public PriceSurface {
 public:
  PideSurface(const PideResult& grid, const RegimeSet& m, const Claim& claim)
      : grid_(grid), m_(m), claim_(claim) {}
  bool evaluate(std::size_t k, double t, std::size_t i, double s, LocalContext& ctx,
                ControlVector& c) const override;
  const RegimeSet& market() const override { return m_; }
  const Claim& claim() const override { return claim_; }

 private:
  const PideResult& grid_;
  const RegimeSet& m_;
  Claim claim_;
};

enum class StrategyKind { optimal, variance_minimal, custom };
StrategyKind parse_strategy(const std::string& name);
std::string to_string(StrategyKind kind);

/// Amount held in the stock at node (k, t, i, s) given the price y there.
using CustomStrategy =
    std::function<double(std::size_t k, double t, std::size_t i, double s, double y)>;

struct RegimeStatistics {
  std::size_t samples = 0;
  double drift_rate = 0.0;   ///< mean excess surplus increment / h
  double drift_se = 0.0;
  double qv_rate = 0.0;      ///< mean squared increment / h
  double qv_se = 0.0;
  double sharpe = 0.0;       ///< drift_rate / sqrt(qv_rate)
  /// sum of increments / sum of sqrt(model QV) h: the realised Sharpe ratio
  /// with each step weighted by its own local risk, free of the Jensen gap in `sharpe`
  double normalized_sharpe = 0.0;
  double normalized_sharpe_se = 0.0;
  double target = 0.0;       ///< L(i)
};

struct BacktestReport {
  std::string strategy;
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  std::vector<RegimeStatistics> regimes;
  double terminal_mean = 0.0;
  double terminal_variance = 0.0;
  double terminal_mean_se = 0.0;
  std::vector<double> terminal_surplus;
  std::size_t extrapolated_nodes = 0;

  void write_csv(std::ostream& out) const;
};

/// Runs the self-financing hedge along `paths` starting from wealth Y(0):
/// X_{k+1} = (X_k - pi_k) B_{k+1}/B_k + pi_k S_{k+1}/S_k, surplus X - Y, and
/// terminal surplus X_K - claim. Steps are bucketed by J(t_k).
BacktestReport backtest(const PathSet& paths, const PriceSurface& surface, const SharpeTarget& L,
                        StrategyKind strategy, const CustomStrategy& custom = {},
                        unsigned threads = 1);

}  // namespace rsprice
