#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include <math.h>  // boost 1.74 pchip calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>

#include "rsprice/claim.hpp"
#include "rsprice/generator.hpp"
#include "rsprice/market.hpp"

namespace rsprice {

/// Raised when the explicit part of the time stepping blows up.
class PideDivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PideConfig {
  std::size_t n_space = 400;
  std::size_t n_time = 400;
  /// log-grid bounds; zero means claim scale / 5 and 5 * claim scale
  double s_min = 0.0;
  double s_max = 0.0;
  double sharpe_margin = 1e-6;
};

/// Value surfaces V(t_k, s_n, i) on a log-spaced price grid.
class PideResult {
 public:
  double price = 0.0;
  /// largest |dV/ds| seen on interior nodes over all layers
  double max_abs_vs = 0.0;

  const std::vector<double>& s() const { return s_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t n_states() const { return n_states_; }
  double node(std::size_t k, std::size_t i, std::size_t n) const {
    return values_[(k * n_states_ + i) * s_.size() + n];
  }
  /// Layer index nearest to time t.
  std::size_t layer(double t) const;

  /// Monotone cubic interpolation in log s, linear in s outside the grid.
  double value(std::size_t k, std::size_t i, double s) const;
  /// dV/ds at (k, i, s).
  double slope(std::size_t k, std::size_t i, double s) const;

  /// One row per node: t,s,i,V (i is 1-based).
  void write_csv(std::ostream& out) const;

 private:
  friend PideResult price_pide(const RegimeSet&, const Claim&, const SharpeTarget&,
                               const PideConfig&);
  void build_interpolators();

  std::vector<double> s_;
  std::vector<double> x_;
  std::vector<double> times_;
  std::size_t n_states_ = 0;
  std::vector<double> values_;
  std::vector<boost::math::interpolators::pchip<std::vector<double>>> interp_;
};

/// Backward IMEX time stepping of the regime-coupled nonlinear pricing PIDE.
///
/// Written under the minimal-martingale measure (intensities lambda_j (1 -
/// gamma_j theta / delta)), the diffusion, drift, discount and jump-out terms
/// are implicit; the jump-in terms V(t, s (1 + gamma_j), j) and the loading
/// sqrt(L^2 - theta^2) sqrt(g) are explicit. Linear (V_ss = 0) boundaries.
/// Constant intensities only.
PideResult price_pide(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                      const PideConfig& config);

/// Hedging inputs on the grid nodes of one layer.
struct PideControls {
  /// z[i][n] = V_s s sigma(i)
  std::vector<std::vector<double>> z;
  /// u[i][j][n] = V(s (1 + gamma_j(i)), j) - V(s, i), zero for j == i
  std::vector<std::vector<std::vector<double>>> u;
};

PideControls extract_controls(const PideResult& grid, const RegimeSet& m, std::size_t layer = 0);

}  // namespace rsprice
