#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rsprice/claim.hpp"
#include "rsprice/generator.hpp"
#include "rsprice/lsmc.hpp"
#include "rsprice/market.hpp"

namespace rsprice {

/// Piecewise-constant force of mortality by age band [age_from, age_to).
class MortalityModel {
 public:
  struct Band {
    double age_from = 0.0;
    double age_to = 0.0;
    double intensity = 0.0;
  };

  MortalityModel() = default;
  MortalityModel(std::vector<Band> bands, double entry_age);
  /// Same intensity at every age.
  static MortalityModel constant(double intensity);
  /// CSV with header age_from,age_to,intensity.
  static MortalityModel load_csv(const std::string& path, double entry_age);

  /// m(t) at contract time t (age entry_age + t).
  double rate(double t) const;
  /// int_{t0}^{t1} m(u) du
  double integral(double t0, double t1) const;
  /// Contract time at which the cumulative hazard reaches `hazard`; +inf if never.
  double inverse_hazard(double hazard) const;
  double entry_age() const { return entry_age_; }

 private:
  std::vector<Band> bands_;
  double entry_age_ = 0.0;
};

/// Survival pay-off F_surv(S(T), J(T)); death benefit F_death(S(tau)) paid at T.
struct InsuranceClaim {
  Claim survival = Claim::constant(1.0);
  Claim death = Claim::constant(0.0);
};

/// Driver with mortality risk: the residual-risk radicand gains u_m^2 m.
double insurance_driver(const ControlVector& c, const LocalContext& ctx, double L,
                        double mortality_rate);

/// Optimal stock position with mortality risk in the residual.
double insurance_strategy(const ControlVector& c, const LocalContext& ctx, double L,
                          double mortality_rate);

/// Death times on the grid of `paths`, drawn from an independent random source.
DeathLayer simulate_deaths(const MortalityModel& mortality, const PathSet& paths,
                           std::uint64_t seed);

/// LSMC price of an equity-linked claim with mortality, on given market paths.
/// After death the position is worth F_death(S(tau)) times the price of a unit
/// paid at T, obtained from a companion sweep on the same paths.
BsdeSolution price_insurance_lsmc(const RegimeSet& m, const MortalityModel& mortality,
                                  const InsuranceClaim& claim, const SharpeTarget& L,
                                  const LsmcConfig& config, const PathSet& paths,
                                  std::uint64_t mortality_seed);

/// Same, simulating the market paths from `config`.
BsdeSolution price_insurance_lsmc(const RegimeSet& m, const MortalityModel& mortality,
                                  const InsuranceClaim& claim, const SharpeTarget& L,
                                  const LsmcConfig& config, std::uint64_t mortality_seed);

}  // namespace rsprice
