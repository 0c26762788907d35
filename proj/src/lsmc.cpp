#include "rsprice/lsmc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "rsprice/parallel.hpp"

namespace rsprice {

ResponseMode parse_response_mode(const std::string& name) {
  if (name == "raw") return ResponseMode::raw;
  if (name == "centered") return ResponseMode::centered;
  if (name == "joint") return ResponseMode::joint;
  throw std::invalid_argument("unknown response mode '" + name + "'");
}

std::string to_string(ResponseMode mode) {
  switch (mode) {
    case ResponseMode::raw: return "raw";
    case ResponseMode::centered: return "centered";
    case ResponseMode::joint: return "joint";
  }
  return "?";
}

namespace {

struct Standardizer {
  double center = 0.0;
  double scale = 1.0;
};

Polynomial zero_polynomial(const Standardizer& st) { return {st.center, st.scale, {0.0}}; }

Polynomial block(const Eigen::MatrixXd& coef, Eigen::Index col, Eigen::Index first,
                 std::size_t degree, const Standardizer& st) {
  Polynomial p;
  p.center = st.center;
  p.scale = st.scale;
  p.coef.resize(degree + 1);
  for (std::size_t n = 0; n <= degree; ++n)
    p.coef[n] = coef(first + static_cast<Eigen::Index>(n), col);
  return p;
}

std::size_t capped_degree(std::size_t wanted, std::size_t samples, std::size_t blocks) {
  const std::size_t per_block = samples / (10 * std::max<std::size_t>(blocks, 1));
  if (per_block < 2) return 0;
  return std::min(wanted, per_block - 1);
}

}  // namespace

const RegimeFit& BsdeSolution::fit(std::size_t k, std::size_t i) const {
  const std::size_t I = market_.n_states();
  const std::size_t K = n_steps();
  if (k >= K || i >= I) throw std::out_of_range("no regression at this node");
  if (fits_[k * I + i].present) return fits_[k * I + i];
  // nearest step at which the regime was visited
  for (std::size_t d = 1; d < K; ++d) {
    if (k + d < K && fits_[(k + d) * I + i].present) return fits_[(k + d) * I + i];
    if (d <= k && fits_[(k - d) * I + i].present) return fits_[(k - d) * I + i];
  }
  throw SolverError(k, "regime " + std::to_string(i + 1) + " never visited");
}

double BsdeSolution::evaluate(std::size_t k, std::size_t i, double s, LocalContext& ctx,
                              ControlVector& c) const {
  const std::size_t I = market_.n_states();
  c.u.assign(I, 0.0);
  c.u_mortality = 0.0;
  c.z = 0.0;
  fill_local_context(market_, i, s, ctx);
  if (k >= n_steps()) {
    c.y = claim_.payoff(s, i);
    return c.y;
  }
  const RegimeFit& f = fit(k, i);
  c.z = f.z(s);
  for (std::size_t j = 0; j < I; ++j)
    if (j != i && !f.u[j].coef.empty()) c.u[j] = f.u[j](s);
  const double m = mortality_rate(k);
  if (m > 0.0) c.u_mortality = f.u_mortality(s);
  const double h = step(k);
  const double charge = charge_rate(c, ctx, L_.at(i), c.u_mortality * c.u_mortality * m);
  c.y = (f.expectation(s) - h * charge) / (1.0 + ctx.r * h);
  return c.y;
}

double BsdeSolution::value(std::size_t k, std::size_t i, double s) const {
  LocalContext ctx;
  ControlVector c;
  return evaluate(k, i, s, ctx, c);
}

ControlVector BsdeSolution::controls(std::size_t k, std::size_t i, double s) const {
  LocalContext ctx;
  ControlVector c;
  evaluate(k, i, s, ctx, c);
  return c;
}

void BsdeSolution::write_csv(std::ostream& out) const {
  const std::size_t I = market_.n_states();
  std::size_t width = 1;
  for (const RegimeFit& f : fits_) {
    width = std::max({width, f.expectation.coef.size(), f.z.coef.size()});
    for (const Polynomial& u : f.u) width = std::max(width, u.coef.size());
  }
  out << "step,t,regime,samples,function,center,scale";
  for (std::size_t n = 0; n < width; ++n) out << ",c" << n;
  out << '\n' << std::setprecision(17);
  auto row = [&](std::size_t k, std::size_t i, const RegimeFit& f, const std::string& name,
                 const Polynomial& p) {
    out << k << ',' << times_[k] << ',' << i + 1 << ',' << f.samples << ',' << name << ','
        << p.center << ',' << p.scale;
    for (std::size_t n = 0; n < width; ++n) out << ',' << (n < p.coef.size() ? p.coef[n] : 0.0);
    out << '\n';
  };
  for (std::size_t k = 0; k < n_steps(); ++k) {
    for (std::size_t i = 0; i < I; ++i) {
      const RegimeFit& f = fits_[k * I + i];
      if (!f.present) continue;
      row(k, i, f, "expectation", f.expectation);
      row(k, i, f, "Z", f.z);
      for (std::size_t j = 0; j < I; ++j)
        if (j != i && !f.u[j].coef.empty()) row(k, i, f, "U" + std::to_string(j + 1), f.u[j]);
      if (has_mortality()) row(k, i, f, "U_mortality", f.u_mortality);
    }
  }
}

class BsdeEngine {
 public:
  BsdeEngine(const RegimeSet& m, const SharpeTarget& L, const LsmcConfig& cfg,
             const PathSet& paths, const DeathLayer* death)
      : m_(m), L_(L), cfg_(cfg), paths_(paths), death_(death) {}

  BsdeSolution run(const Claim& claim, const std::vector<double>& terminal);

 private:
  RegimeFit fit_regime(std::size_t k, std::size_t i, const std::vector<std::size_t>& idx,
                       const std::vector<double>& y_next, std::size_t& winsorized) const;
  bool alive(std::size_t k, std::size_t p) const { return !death_ || death_->alive(k, p); }
  double death_increment(std::size_t k, std::size_t p) const {
    return death_->dM[k * paths_.n_paths() + p];
  }

  const RegimeSet& m_;
  const SharpeTarget& L_;
  const LsmcConfig& cfg_;
  const PathSet& paths_;
  const DeathLayer* death_;
};

RegimeFit BsdeEngine::fit_regime(std::size_t k, std::size_t i,
                                 const std::vector<std::size_t>& idx,
                                 const std::vector<double>& y_next,
                                 std::size_t& winsorized) const {
  const std::size_t I = m_.n_states();
  const std::size_t n = idx.size();
  const double h = paths_.step(k);
  const double rate = death_ ? death_->rate[k] : 0.0;
  RegimeFit fit;
  fit.samples = n;
  fit.u.assign(I, Polynomial{});
  Standardizer feature{0.0, paths_.s(0, 0)};
  fit.expectation = zero_polynomial(feature);
  fit.z = zero_polynomial(feature);
  fit.u_mortality = zero_polynomial(feature);
  if (n == 0) return fit;
  fit.present = true;

  double s_lo = paths_.s(k, idx[0]), s_hi = s_lo, s_sum = 0.0;
  for (std::size_t p : idx) {
    s_lo = std::min(s_lo, paths_.s(k, p));
    s_hi = std::max(s_hi, paths_.s(k, p));
    s_sum += paths_.s(k, p);
  }
  const bool constant_feature = s_hi - s_lo <= 1e-12 * s_hi;
  if (!constant_feature) {
    // standardised feature keeps the normal equations well conditioned even
    // when the sample spans a narrow price band (first steps)
    const double mean = s_sum / static_cast<double>(n);
    double var = 0.0;
    for (std::size_t p : idx) var += (paths_.s(k, p) - mean) * (paths_.s(k, p) - mean);
    feature = {mean, std::sqrt(var / static_cast<double>(n))};
  }
  fit.s_lo = s_lo;
  fit.s_hi = s_hi;

  // active channels and how many events the sample actually contains
  std::vector<std::size_t> active;
  std::vector<std::size_t> events(I, 0);
  for (std::size_t j = 0; j < I; ++j) {
    if (j == i || m_.intensity(j, i).identically_zero()) continue;
    for (std::size_t p : idx) events[j] += paths_.jumps(k, j, p) > 0 ? 1 : 0;
    if (events[j] > 0) active.push_back(j);
    fit.u[j] = zero_polynomial(feature);
  }
  std::size_t deaths = 0;
  const bool mortality = death_ && rate > 0.0;
  if (mortality)
    for (std::size_t p : idx) deaths += death_->death_step[p] == k ? 1 : 0;
  const bool mortality_block = mortality && deaths > 0;

  const std::size_t blocks = cfg_.responses == ResponseMode::joint
                                 ? 2 + active.size() + (mortality_block ? 1 : 0)
                                 : 1;
  const std::size_t d = constant_feature ? 0 : capped_degree(cfg_.degree, n, blocks);
  auto event_degree = [&](std::size_t count) {
    return std::min(d, constant_feature ? 0 : capped_degree(cfg_.degree, count, 1));
  };

  const double ridge = cfg_.ridge_scale;
  const std::string where =
      "step " + std::to_string(k) + ", regime " + std::to_string(i + 1);
  std::vector<double> phi(d + 1);
  const auto N = static_cast<Eigen::Index>(n);

  if (cfg_.responses == ResponseMode::joint) {
    std::vector<std::size_t> deg_u(I, 0);
    Eigen::Index cols = 2 * static_cast<Eigen::Index>(d + 1);
    std::vector<Eigen::Index> first_u(I, 0);
    for (std::size_t j : active) {
      deg_u[j] = event_degree(events[j]);
      first_u[j] = cols;
      cols += static_cast<Eigen::Index>(deg_u[j] + 1);
    }
    const std::size_t deg_m = mortality_block ? event_degree(deaths) : 0;
    const Eigen::Index first_m = cols;
    if (mortality_block) cols += static_cast<Eigen::Index>(deg_m + 1);

    Eigen::MatrixXd x(N, cols);
    Eigen::VectorXd y(N);
    for (Eigen::Index r = 0; r < N; ++r) {
      const std::size_t p = idx[static_cast<std::size_t>(r)];
      power_basis((paths_.s(k, p) - feature.center) / feature.scale, d, phi.data());
      const double dw = paths_.dW(k, p);
      for (std::size_t c = 0; c <= d; ++c) {
        x(r, static_cast<Eigen::Index>(c)) = phi[c];
        x(r, static_cast<Eigen::Index>(d + 1 + c)) = phi[c] * dw;
      }
      for (std::size_t j : active) {
        const double dn = paths_.dNtilde(k, j, p);
        for (std::size_t c = 0; c <= deg_u[j]; ++c)
          x(r, first_u[j] + static_cast<Eigen::Index>(c)) = phi[c] * dn;
      }
      if (mortality_block) {
        const double dm = death_increment(k, p);
        for (std::size_t c = 0; c <= deg_m; ++c)
          x(r, first_m + static_cast<Eigen::Index>(c)) = phi[c] * dm;
      }
      y(r) = y_next[p];
    }
    const Eigen::MatrixXd b = least_squares(x, y, ridge, where);
    fit.expectation = block(b, 0, 0, d, feature);
    fit.z = block(b, 0, static_cast<Eigen::Index>(d + 1), d, feature);
    for (std::size_t j : active) fit.u[j] = block(b, 0, first_u[j], deg_u[j], feature);
    if (mortality_block) fit.u_mortality = block(b, 0, first_m, deg_m, feature);
    return fit;
  }

  Eigen::MatrixXd x(N, static_cast<Eigen::Index>(d + 1));
  Eigen::VectorXd y(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    const std::size_t p = idx[static_cast<std::size_t>(r)];
    power_basis((paths_.s(k, p) - feature.center) / feature.scale, d, phi.data());
    for (std::size_t c = 0; c <= d; ++c) x(r, static_cast<Eigen::Index>(c)) = phi[c];
    y(r) = y_next[p];
  }
  fit.expectation = block(least_squares(x, y, ridge, where), 0, 0, d, feature);

  Eigen::VectorXd c(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    const std::size_t p = idx[static_cast<std::size_t>(r)];
    c(r) = cfg_.responses == ResponseMode::centered ? y(r) - fit.expectation(paths_.s(k, p))
                                                    : y(r);
  }
  auto fit_response = [&](std::size_t degree, auto&& response) {
    Eigen::VectorXd v(N);
    for (Eigen::Index r = 0; r < N; ++r) v(r) = response(idx[static_cast<std::size_t>(r)], c(r));
    winsorized += winsorize(v.data(), n, cfg_.winsor);
    const Eigen::MatrixXd sub = x.leftCols(static_cast<Eigen::Index>(degree + 1));
    return block(least_squares(sub, v, ridge, where), 0, 0, degree, feature);
  };
  fit.z = fit_response(d, [&](std::size_t p, double cy) { return cy * paths_.dW(k, p) / h; });
  for (std::size_t j : active) {
    fit.u[j] = fit_response(event_degree(events[j]), [&](std::size_t p, double cy) {
      return cy * paths_.dNtilde(k, j, p) / (m_.lambda(j, i, paths_.s(k, p)) * h);
    });
  }
  if (mortality_block) {
    fit.u_mortality = fit_response(event_degree(deaths), [&](std::size_t p, double cy) {
      return cy * death_increment(k, p) / (rate * h);
    });
  }
  return fit;
}

BsdeSolution BsdeEngine::run(const Claim& claim, const std::vector<double>& terminal) {
  const std::size_t K = paths_.n_steps();
  const std::size_t P = paths_.n_paths();
  const std::size_t I = m_.n_states();

  BsdeSolution sol;
  sol.market_ = m_;
  sol.L_ = L_;
  sol.claim_ = claim;
  sol.times_ = paths_.times();
  sol.fits_.resize(K * I);
  if (death_) sol.mortality_rate_ = death_->rate;

  std::vector<double> y_next = terminal, v_next = terminal;
  std::vector<double> y_cur(P), v_cur(P);
  std::vector<double> risk(P);
  std::vector<std::uint8_t> attainable(P), small_u(P), pairs(P);
  std::vector<std::vector<std::size_t>> idx(I);

  for (std::size_t kk = K; kk-- > 0;) {
    const std::size_t k = kk;
    const double h = paths_.step(k);
    for (auto& v : idx) v.clear();
    for (std::size_t p = 0; p < P; ++p)
      if (alive(k, p)) idx[paths_.regime(k, p)].push_back(p);

    StepDiagnostics diag;
    diag.step = k;
    try {
      for (std::size_t i = 0; i < I; ++i)
        sol.fits_[k * I + i] = fit_regime(k, i, idx[i], y_next, diag.winsorized);
    } catch (const SolverError&) {
      throw;
    } catch (const std::exception& e) {
      throw SolverError(k, e.what());
    }

    try {
      parallel_for(P, cfg_.threads, [&](std::size_t begin, std::size_t end) {
        LocalContext ctx;
        ControlVector c;
        for (std::size_t p = begin; p < end; ++p) {
          if (!alive(k, p)) {
            y_cur[p] = v_cur[p] = death_->dead_value(k, p);
            risk[p] = 0.0;
            attainable[p] = small_u[p] = pairs[p] = 0;
            continue;
          }
          const std::size_t i = paths_.regime(k, p);
          const double s = paths_.s(k, p);
          const double y = sol.evaluate(k, i, s, ctx, c);
          const double orth = c.u_mortality * c.u_mortality * sol.mortality_rate(k);
          const double charge = charge_rate(c, ctx, L_.at(i), orth);
          y_cur[p] = y;
          v_cur[p] = (v_next[p] - h * charge) / (1.0 + ctx.r * h);
          const double R = residual_risk(c, ctx, orth);
          risk[p] = R;
          double energy = c.z * c.z + orth;
          std::uint8_t n_small = 0, n_pairs = 0;
          for (std::size_t j = 0; j < I; ++j) {
            if (ctx.lambda[j] <= 0.0) continue;
            energy += c.u[j] * c.u[j] * ctx.lambda[j];
            ++n_pairs;
            if (std::abs(c.u[j]) < 1e-8 * (1.0 + std::abs(y))) ++n_small;
          }
          attainable[p] = R <= 1e-10 * std::sqrt(energy + 1.0) ? 1 : 0;
          small_u[p] = n_small;
          pairs[p] = n_pairs;
        }
      });
    } catch (const std::exception& e) {
      throw SolverError(k, e.what());
    }

    double sum_r = 0.0;
    std::size_t nodes = 0, n_att = 0, n_small = 0, n_pairs = 0;
    for (std::size_t p = 0; p < P; ++p) {
      if (!alive(k, p)) continue;
      ++nodes;
      sum_r += risk[p];
      n_att += attainable[p];
      n_small += small_u[p];
      n_pairs += pairs[p];
    }
    diag.nodes = nodes;
    diag.mean_residual_risk = nodes ? sum_r / static_cast<double>(nodes) : 0.0;
    diag.attainable_fraction = nodes ? static_cast<double>(n_att) / static_cast<double>(nodes) : 0.0;
    diag.small_jump_control_fraction =
        n_pairs ? static_cast<double>(n_small) / static_cast<double>(n_pairs) : 0.0;
    sol.diagnostics.push_back(diag);
    std::swap(y_next, y_cur);
    std::swap(v_next, v_cur);
  }
  std::reverse(sol.diagnostics.begin(), sol.diagnostics.end());

  const std::size_t j0 = paths_.regime(0, 0);
  const double s0 = paths_.s(0, 0);
  sol.controls0 = sol.controls(0, j0, s0);
  sol.y0 = sol.controls0.y;
  double mean = 0.0;
  for (double v : v_next) mean += v;
  mean /= static_cast<double>(P);
  double var = 0.0;
  for (double v : v_next) var += (v - mean) * (v - mean);
  var /= static_cast<double>(P > 1 ? P - 1 : 1);
  sol.pathwise_y0 = mean;
  sol.se = std::sqrt(var / static_cast<double>(P));
  return sol;
}

BsdeSolution solve_bsde(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                        const LsmcConfig& config, const PathSet& paths,
                        const std::vector<double>& terminal, const DeathLayer* death) {
  if (paths.n_states() != m.n_states())
    throw std::invalid_argument("paths were simulated for a different number of states");
  if (terminal.size() != paths.n_paths())
    throw std::invalid_argument("terminal values do not match the number of paths");
  if (death && (death->death_step.size() != paths.n_paths() ||
                death->dM.size() != paths.n_steps() * paths.n_paths() ||
                death->rate.size() != paths.n_steps() || !death->dead_value))
    throw std::invalid_argument("death layer does not match the paths");
  const std::size_t P = paths.n_paths();
  for (std::size_t p = 1; p < P; ++p)
    if (paths.s(0, p) != paths.s(0, 0) || paths.regime(0, p) != paths.regime(0, 0))
      throw std::invalid_argument("all paths must start from the same node");

  double s_lo = paths.s(0, 0), s_hi = s_lo;
  if (m.has_feedback()) {
    for (std::size_t k = 0; k <= paths.n_steps(); ++k)
      for (std::size_t p = 0; p < P; ++p) {
        s_lo = std::min(s_lo, paths.s(k, p));
        s_hi = std::max(s_hi, paths.s(k, p));
      }
  }
  check_sharpe_margin(m, L, config.sharpe_margin, s_lo, s_hi);
  return BsdeEngine(m, L, config, paths, death).run(claim, terminal);
}

BsdeSolution price_lsmc(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                        const LsmcConfig& config, const PathSet& paths) {
  const std::size_t K = paths.n_steps();
  std::vector<double> terminal(paths.n_paths());
  for (std::size_t p = 0; p < paths.n_paths(); ++p)
    terminal[p] = claim.payoff(paths.s(K, p), paths.regime(K, p));
  return solve_bsde(m, claim, L, config, paths, terminal, nullptr);
}

BsdeSolution price_lsmc(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                        const LsmcConfig& config) {
  SimulationOptions sim;
  sim.n_steps = config.n_steps;
  sim.n_paths = config.n_paths;
  sim.seed = config.seed;
  sim.threads = config.threads;
  const PathSet paths = simulate_paths(m, m.s0(), m.j0(), m.horizon(), sim);
  return price_lsmc(m, claim, L, config, paths);
}

ReweightResult reweight_check(const BsdeSolution& solution, const PathSet& paths,
                              unsigned threads) {
  if (solution.has_mortality())
    throw std::invalid_argument("reweight_check does not cover the mortality kernel");
  if (paths.n_steps() != solution.n_steps())
    throw std::invalid_argument("paths and solution use different time grids");
  const std::size_t P = paths.n_paths();
  const std::size_t K = paths.n_steps();
  const std::size_t I = solution.market().n_states();
  std::vector<double> weighted(P);
  std::vector<std::size_t> negatives(P);

  parallel_for(P, threads, [&](std::size_t begin, std::size_t end) {
    LocalContext ctx;
    ControlVector c;
    for (std::size_t p = begin; p < end; ++p) {
      double density = 1.0;
      std::size_t neg = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t i = paths.regime(k, p);
        solution.evaluate(k, i, paths.s(k, p), ctx, c);
        const GirsanovKernel kernel = girsanov_kernel(c, ctx, solution.sharpe().at(i));
        double factor = 1.0 - kernel.psi * paths.dW(k, p);
        for (std::size_t j = 0; j < I; ++j)
          if (ctx.lambda[j] > 0.0) factor -= kernel.phi[j] * paths.dNtilde(k, j, p);
        if (factor < 0.0) ++neg;
        density *= factor;
      }
      negatives[p] = neg;
      weighted[p] = density * paths.discount(K, p) *
                    solution.claim().payoff(paths.s(K, p), paths.regime(K, p));
    }
  });

  ReweightResult out;
  out.n_paths = P;
  double mean = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    mean += weighted[p];
    out.negative_factors += negatives[p];
    out.paths_with_negative += negatives[p] > 0 ? 1 : 0;
  }
  mean /= static_cast<double>(P);
  double var = 0.0;
  for (double w : weighted) var += (w - mean) * (w - mean);
  var /= static_cast<double>(P > 1 ? P - 1 : 1);
  out.price = mean;
  out.se = std::sqrt(var / static_cast<double>(P));
  if (static_cast<double>(out.paths_with_negative) > 1e-3 * static_cast<double>(P))
    throw SolverError(K, std::to_string(out.paths_with_negative) +
                             " paths with a negative density factor (more than 0.1%)");
  return out;
}

}  // namespace rsprice
