#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsprice/claim.hpp"
#include "rsprice/generator.hpp"
#include "rsprice/market.hpp"
#include "rsprice/regression.hpp"

namespace rsprice {

/// Raised when a backward step cannot be completed; carries the step index.
class SolverError : public std::runtime_error {
 public:
  SolverError(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// How the conditional moments E[Y dW]/h and E[Y dN_j]/(lambda_j h) are estimated.
enum class ResponseMode {
  /// Regress Y_{k+1} dW / h and Y_{k+1} dN_j / (lambda_j h) directly.
  raw,
  /// Same, with Y_{k+1} replaced by Y_{k+1} - E_hat[Y_{k+1} | S_k, J_k].
  centered,
  /// One regression of Y_{k+1} on phi(S_k) x (1, dW, dN_1, ..., dN_I): the
  /// increment loadings are the conditional moments divided by the increment
  /// variances, estimated with the smooth part of Y_{k+1} as control variate.
  joint,
};

ResponseMode parse_response_mode(const std::string& name);
std::string to_string(ResponseMode mode);

struct LsmcConfig {
  std::size_t n_paths = 200000;
  std::size_t n_steps = 50;
  std::size_t degree = 3;
  /// ridge penalty relative to each normal-equation diagonal entry
  double ridge_scale = 1e-10;
  /// tail fraction for winsorising the Z/U responses (raw and centered modes)
  double winsor = 0.001;
  ResponseMode responses = ResponseMode::joint;
  /// required L(i) - theta(i, s) margin
  double sharpe_margin = 1e-6;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Regression functions of one (step, regime).
struct RegimeFit {
  bool present = false;
  std::size_t samples = 0;
  double s_lo = 0.0;  ///< price range of the regression sample
  double s_hi = 0.0;
  Polynomial expectation;          ///< E[Y_{k+1} | S_k = s]
  Polynomial z;                    ///< Z_k(s)
  std::vector<Polynomial> u;       ///< U_j(s) by target, empty polynomial when inactive
  Polynomial u_mortality;          ///< only with a death layer
};

struct StepDiagnostics {
  std::size_t step = 0;
  std::size_t nodes = 0;
  double mean_residual_risk = 0.0;
  double attainable_fraction = 0.0;
  /// share of (node, target) pairs with lambda > 0 but |U| below tolerance
  double small_jump_control_fraction = 0.0;
  std::size_t winsorized = 0;
};

/// Per-path death information aligned with a PathSet.
struct DeathLayer {
  /// step in which the policyholder dies; n_steps when alive at T
  std::vector<std::size_t> death_step;
  /// compensated death increment of step k for path p at k * n_paths + p (zero once dead)
  std::vector<double> dM;
  /// average mortality intensity over each step
  std::vector<double> rate;
  /// value of the position of path p at node k once dead
  std::function<double(std::size_t k, std::size_t p)> dead_value;

  bool alive(std::size_t k, std::size_t p) const { return death_step[p] >= k; }
};

/// Regression representation of (Y, Z, U) on the time grid plus the time-0 estimates.
class BsdeSolution {
 public:
  double y0 = 0.0;
  /// standard error of the pathwise price estimator
  double se = 0.0;
  /// mean of the pathwise discounted values (Y recursion applied along each path)
  double pathwise_y0 = 0.0;
  ControlVector controls0;
  std::vector<StepDiagnostics> diagnostics;

  const RegimeSet& market() const { return market_; }
  const SharpeTarget& sharpe() const { return L_; }
  const Claim& claim() const { return claim_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t n_steps() const { return times_.size() - 1; }
  double step(std::size_t k) const { return times_[k + 1] - times_[k]; }
  bool has_mortality() const { return !mortality_rate_.empty(); }
  double mortality_rate(std::size_t k) const { return has_mortality() ? mortality_rate_[k] : 0.0; }
  const RegimeFit& fit(std::size_t k, std::size_t i) const;

  /// Y_k(s) in regime i (alive branch for insurance); the claim at k = n_steps.
  double value(std::size_t k, std::size_t i, double s) const;
  /// (Y, Z, U) at node (k, i, s); zero controls at maturity.
  ControlVector controls(std::size_t k, std::size_t i, double s) const;
  /// Allocation-free variant of controls(): refreshes `ctx` and `c`, returns Y.
  double evaluate(std::size_t k, std::size_t i, double s, LocalContext& ctx,
                  ControlVector& c) const;

  /// Per-step, per-regime coefficient table.
  void write_csv(std::ostream& out) const;

 private:
  friend class BsdeEngine;
  RegimeSet market_;
  SharpeTarget L_;
  Claim claim_;
  std::vector<double> times_;
  std::vector<RegimeFit> fits_;  // k * I + i
  std::vector<double> mortality_rate_;
};

/// Full backward sweep on freshly simulated paths from (s0, j0, horizon) of `m`.
BsdeSolution price_lsmc(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                        const LsmcConfig& config);

/// Backward sweep on given paths (common random numbers across claims / targets).
BsdeSolution price_lsmc(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                        const LsmcConfig& config, const PathSet& paths);

/// Backward sweep with arbitrary terminal values and an optional death layer.
BsdeSolution solve_bsde(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                        const LsmcConfig& config, const PathSet& paths,
                        const std::vector<double>& terminal, const DeathLayer* death);

struct ReweightResult {
  double price = 0.0;
  double se = 0.0;
  std::size_t negative_factors = 0;
  std::size_t paths_with_negative = 0;
  std::size_t n_paths = 0;
};

/// Discounted claim averaged under the worst-case measure: the density is
/// accumulated as prod_k (1 - psi* dW - sum_j phi_j* dN_j) with the kernel of
/// the solved controls. Throws SolverError when more than 0.1% of paths hit a
/// negative factor.
ReweightResult reweight_check(const BsdeSolution& solution, const PathSet& paths,
                              unsigned threads = 1);

}  // namespace rsprice
