#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rsprice/market.hpp"

namespace rsprice {

/// Raised when L(i)^2 - theta(i)^2 does not leave room for a risk loading.
class SharpeMarginError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Market coefficients frozen at one node (regime i, price s).
/// gamma/lambda are indexed by target state; the self entry is zero.
struct LocalContext {
  std::size_t state = 0;
  double s = 0.0;
  double r = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  std::vector<double> gamma;
  std::vector<double> lambda;
  double delta2 = 0.0;
  double theta = 0.0;

  double delta() const;
  bool any_jump_risk() const;
};

LocalContext local_context(const RegimeSet& m, std::size_t i, double s);
/// Refreshes `ctx` in place, reusing its buffers.
void fill_local_context(const RegimeSet& m, std::size_t i, double s, LocalContext& ctx);

/// Controls (Y, Z, U_1..U_I) of the pricing BSDE at one node. `u` is indexed
/// by target state; `u_mortality` is only used by the insurance extension.
struct ControlVector {
  double y = 0.0;
  double z = 0.0;
  std::vector<double> u;
  double u_mortality = 0.0;

  double u_at(std::size_t j) const { return j < u.size() ? u[j] : 0.0; }
};

/// Hedger's target Sharpe ratio per regime.
struct SharpeTarget {
  std::vector<double> L;

  double at(std::size_t i) const { return L.at(i); }
  std::size_t size() const { return L.size(); }
};

/// Enforces L(i) >= theta(i, s) + margin on `n_points` log-spaced prices of
/// [s_min, s_max] for every regime. Throws SharpeMarginError otherwise.
void check_sharpe_margin(const RegimeSet& m, const SharpeTarget& L, double margin,
                         double s_min, double s_max, std::size_t n_points = 101);

/// sqrt(L^2 - theta^2). Tolerates L == theta; throws when L < theta.
double loading_coefficient(double L, double theta);

/// z sigma + sum_j u_j gamma_j lambda_j: the part of the claim's risk that
/// trades along the stock.
double hedgeable_exposure(const ControlVector& c, const LocalContext& ctx);

/// Unhedgeable local risk after projecting the controls on the stock:
/// sqrt(z^2 + sum u_j^2 lambda_j + extra - exposure^2 / delta^2).
/// `orthogonal_variance` adds risk the stock cannot touch (e.g. mortality).
double residual_risk(const ControlVector& c, const LocalContext& ctx,
                     double orthogonal_variance = 0.0);

/// Minimiser of the local quadratic variation: exposure / delta^2.
double variance_optimal_strategy(const ControlVector& c, const LocalContext& ctx);

/// Minimiser of L sqrt(QV(pi)) - pi (mu - r): the variance-optimal position
/// shifted towards the stock by theta R / (delta sqrt(L^2 - theta^2)).
double optimal_strategy(const ControlVector& c, const LocalContext& ctx, double L,
                        double orthogonal_variance = 0.0);

/// Price charge f in the surplus drift pi (mu - r) - f that makes the
/// instantaneous Sharpe ratio of the surplus equal to L:
/// f = exposure theta / delta - sqrt(L^2 - theta^2) R.
double charge_rate(const ControlVector& c, const LocalContext& ctx, double L,
                   double orthogonal_variance = 0.0);

/// Full BSDE integrand: -y r - f.
double driver(const ControlVector& c, const LocalContext& ctx, double L);

struct SurplusMoments {
  double excess_drift = 0.0;        ///< pi (mu - r) - f
  double quadratic_variation = 0.0; ///< |pi sigma - z|^2 + sum |pi gamma_j - u_j|^2 lambda_j (+ extra)
};

SurplusMoments instantaneous_moments(double pi, double f, const ControlVector& c,
                                     const LocalContext& ctx,
                                     double orthogonal_variance = 0.0);

/// Mean-variance risk L sqrt(QV) - excess drift of the surplus under `pi`.
double surplus_risk(double pi, double f, const ControlVector& c, const LocalContext& ctx,
                    double L);

/// Worst-case (no-good-deal) Girsanov kernel.
struct GirsanovKernel {
  double psi = 0.0;
  std::vector<double> phi;  ///< per target state, zero where lambda_j == 0
  double k1 = 0.0;
  double k2 = 0.0;
  /// True when the residual risk vanished and the minimal-martingale kernel
  /// (mu - r)/delta^2 * (sigma, gamma) was returned instead.
  bool attainable = false;

  /// z psi + sum_j u_j phi_j lambda_j
  double objective(const ControlVector& c, const LocalContext& ctx) const;
  /// psi sigma + sum_j phi_j gamma_j lambda_j - (mu - r)
  double martingale_defect(const LocalContext& ctx) const;
  /// psi^2 + sum_j phi_j^2 lambda_j
  double norm2(const LocalContext& ctx) const;
};

GirsanovKernel girsanov_kernel(const ControlVector& c, const LocalContext& ctx, double L);

}  // namespace rsprice
