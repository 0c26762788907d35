#include "rsprice/insurance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rsprice {

MortalityModel::MortalityModel(std::vector<Band> bands, double entry_age)
    : bands_(std::move(bands)), entry_age_(entry_age) {
  if (bands_.empty()) throw std::invalid_argument("mortality table is empty");
  std::sort(bands_.begin(), bands_.end(),
            [](const Band& a, const Band& b) { return a.age_from < b.age_from; });
  for (std::size_t n = 0; n < bands_.size(); ++n) {
    const Band& b = bands_[n];
    if (!(b.age_to > b.age_from)) throw std::invalid_argument("mortality band with age_to <= age_from");
    if (!(b.intensity >= 0.0) || !std::isfinite(b.intensity))
      throw std::invalid_argument("mortality intensity must be finite and >= 0");
    if (n > 0 && b.age_from != bands_[n - 1].age_to)
      throw std::invalid_argument("mortality bands must be contiguous");
  }
  if (entry_age < bands_.front().age_from || entry_age >= bands_.back().age_to)
    throw std::invalid_argument("entry age outside the mortality table");
}

MortalityModel MortalityModel::constant(double intensity) {
  return MortalityModel({{0.0, std::numeric_limits<double>::infinity(), intensity}}, 0.0);
}

MortalityModel MortalityModel::load_csv(const std::string& path, double entry_age) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open mortality table '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("age_from,age_to,intensity", 0) != 0)
    throw std::invalid_argument("mortality table needs the header age_from,age_to,intensity");
  std::vector<Band> bands;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string a, b, c;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',') || !std::getline(ls, c))
      throw std::invalid_argument("mortality table row " + std::to_string(row) + " is malformed");
    try {
      bands.push_back({std::stod(a), std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw std::invalid_argument("mortality table row " + std::to_string(row) + " is not numeric");
    }
  }
  return MortalityModel(std::move(bands), entry_age);
}

double MortalityModel::rate(double t) const {
  const double age = entry_age_ + t;
  for (const Band& b : bands_)
    if (age >= b.age_from && age < b.age_to) return b.intensity;
  throw std::out_of_range("age " + std::to_string(age) + " outside the mortality table");
}

double MortalityModel::integral(double t0, double t1) const {
  const double a0 = entry_age_ + t0, a1 = entry_age_ + t1;
  if (a1 > bands_.back().age_to)
    throw std::out_of_range("age " + std::to_string(a1) + " outside the mortality table");
  double total = 0.0;
  for (const Band& b : bands_) {
    const double lo = std::max(a0, b.age_from), hi = std::min(a1, b.age_to);
    if (hi > lo) total += b.intensity * (hi - lo);
  }
  return total;
}

double MortalityModel::inverse_hazard(double hazard) const {
  double acc = 0.0;
  for (const Band& b : bands_) {
    if (b.age_to <= entry_age_) continue;
    const double lo = std::max(entry_age_, b.age_from);
    const double width = b.age_to - lo;
    const double piece = b.intensity * width;
    if (b.intensity > 0.0 && acc + piece >= hazard) return lo + (hazard - acc) / b.intensity - entry_age_;
    acc += piece;
  }
  return std::numeric_limits<double>::infinity();
}

double insurance_driver(const ControlVector& c, const LocalContext& ctx, double L,
                        double mortality_rate) {
  return -c.y * ctx.r - charge_rate(c, ctx, L, c.u_mortality * c.u_mortality * mortality_rate);
}

double insurance_strategy(const ControlVector& c, const LocalContext& ctx, double L,
                          double mortality_rate) {
  return optimal_strategy(c, ctx, L, c.u_mortality * c.u_mortality * mortality_rate);
}

DeathLayer simulate_deaths(const MortalityModel& mortality, const PathSet& paths,
                           std::uint64_t seed) {
  const std::size_t K = paths.n_steps();
  const std::size_t P = paths.n_paths();
  const auto& t = paths.times();
  DeathLayer out;
  out.death_step.assign(P, K);
  out.dM.assign(K * P, 0.0);
  out.rate.resize(K);
  for (std::size_t k = 0; k < K; ++k) out.rate[k] = mortality.integral(t[k], t[k + 1]) / paths.step(k);

  for (std::size_t p = 0; p < P; ++p) {
    std::mt19937_64 rng(substream_seed(seed, p));
    std::exponential_distribution<double> exp1(1.0);
    const double tau = mortality.inverse_hazard(exp1(rng));
    for (std::size_t k = 0; k < K; ++k) {
      if (tau <= t[k + 1]) {
        out.death_step[p] = k;
        out.dM[k * P + p] = 1.0 - mortality.integral(t[k], tau);
        break;
      }
      out.dM[k * P + p] = -mortality.integral(t[k], t[k + 1]);
    }
  }
  return out;
}

BsdeSolution price_insurance_lsmc(const RegimeSet& m, const MortalityModel& mortality,
                                  const InsuranceClaim& claim, const SharpeTarget& L,
                                  const LsmcConfig& config, const PathSet& paths,
                                  std::uint64_t mortality_seed) {
  const std::size_t K = paths.n_steps();
  const std::size_t P = paths.n_paths();
  DeathLayer death = simulate_deaths(mortality, paths, mortality_seed);

  // death benefit fixed at the end of the step of death
  std::vector<double> benefit(P, 0.0);
  bool need_long = false, need_short = false;
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t kd = death.death_step[p];
    if (kd >= K) continue;
    benefit[p] = claim.death.payoff(paths.s(kd + 1, p), paths.regime(kd + 1, p));
    need_long = need_long || benefit[p] > 0.0;
    need_short = need_short || benefit[p] < 0.0;
  }
  // the driver is positively homogeneous: a fixed amount D at T is worth D times the
  // price of +1 (D > 0) or |D| times the price of -1 (D < 0)
  std::shared_ptr<BsdeSolution> unit_long, unit_short;
  if (need_long)
    unit_long = std::make_shared<BsdeSolution>(price_lsmc(m, Claim::constant(1.0), L, config, paths));
  if (need_short)
    unit_short = std::make_shared<BsdeSolution>(price_lsmc(m, Claim::constant(-1.0), L, config, paths));
  death.dead_value = [&paths, benefit, unit_long, unit_short](std::size_t k, std::size_t p) {
    const double d = benefit[p];
    if (d == 0.0) return 0.0;
    const auto& unit = d > 0.0 ? *unit_long : *unit_short;
    return std::abs(d) * unit.value(k, paths.regime(k, p), paths.s(k, p));
  };

  std::vector<double> terminal(P);
  for (std::size_t p = 0; p < P; ++p)
    terminal[p] = death.alive(K, p) ? claim.survival.payoff(paths.s(K, p), paths.regime(K, p))
                                    : benefit[p];
  return solve_bsde(m, claim.survival, L, config, paths, terminal, &death);
}

BsdeSolution price_insurance_lsmc(const RegimeSet& m, const MortalityModel& mortality,
                                  const InsuranceClaim& claim, const SharpeTarget& L,
                                  const LsmcConfig& config, std::uint64_t mortality_seed) {
  SimulationOptions sim;
  sim.n_steps = config.n_steps;
  sim.n_paths = config.n_paths;
  sim.seed = config.seed;
  sim.threads = config.threads;
  const PathSet paths = simulate_paths(m, m.s0(), m.j0(), m.horizon(), sim);
  return price_insurance_lsmc(m, mortality, claim, L, config, paths, mortality_seed);
}

}  // namespace rsprice
