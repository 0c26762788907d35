#include "rsprice/generator.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace rsprice {

double LocalContext::delta() const { return std::sqrt(delta2); }

bool LocalContext::any_jump_risk() const {
  for (double l : lambda)
    if (l > 0.0) return true;
  return false;
}

void fill_local_context(const RegimeSet& m, std::size_t i, double s, LocalContext& ctx) {
  const std::size_t n = m.n_states();
  ctx.state = i;
  ctx.s = s;
  ctx.r = m.r(i);
  ctx.mu = m.mu(i);
  ctx.sigma = m.sigma(i);
  ctx.gamma.resize(n);
  ctx.lambda.resize(n);
  double v = ctx.sigma * ctx.sigma;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      ctx.gamma[j] = 0.0;
      ctx.lambda[j] = 0.0;
      continue;
    }
    ctx.gamma[j] = m.gamma(j, i);
    ctx.lambda[j] = m.lambda(j, i, s);
    v += ctx.gamma[j] * ctx.gamma[j] * ctx.lambda[j];
  }
  ctx.delta2 = v;
  ctx.theta = (ctx.mu - ctx.r) / std::sqrt(v);
}

LocalContext local_context(const RegimeSet& m, std::size_t i, double s) {
  LocalContext ctx;
  fill_local_context(m, i, s, ctx);
  return ctx;
}

void check_sharpe_margin(const RegimeSet& m, const SharpeTarget& L, double margin, double s_min,
                         double s_max, std::size_t n_points) {
  if (L.size() != m.n_states())
    throw SharpeMarginError("expected " + std::to_string(m.n_states()) + " Sharpe ratios, got " +
                            std::to_string(L.size()));
  const std::size_t n = std::max<std::size_t>(n_points, 2);
  for (std::size_t i = 0; i < m.n_states(); ++i) {
    for (std::size_t q = 0; q < n; ++q) {
      const double s =
          s_min * std::pow(s_max / s_min, static_cast<double>(q) / static_cast<double>(n - 1));
      const double th = sharpe_theta(m, i, s);
      if (L.at(i) < th + margin) {
        std::ostringstream os;
        os << "L(" << i + 1 << ")=" << L.at(i) << " does not exceed theta=" << th
           << " by the required margin " << margin << " at s=" << s;
        throw SharpeMarginError(os.str());
      }
      if (!m.has_feedback()) break;
    }
  }
}

double loading_coefficient(double L, double theta) {
  const double gap = L * L - theta * theta;
  if (gap < 0.0) {
    if (gap > -1e-14 * (1.0 + L * L)) return 0.0;
    std::ostringstream os;
    os << "Sharpe target " << L << " below the stock's Sharpe ratio " << theta;
    throw SharpeMarginError(os.str());
  }
  return std::sqrt(gap);
}

double hedgeable_exposure(const ControlVector& c, const LocalContext& ctx) {
  double a = c.z * ctx.sigma;
  for (std::size_t j = 0; j < ctx.lambda.size(); ++j) {
    if (ctx.lambda[j] == 0.0) continue;
    a += c.u_at(j) * ctx.gamma[j] * ctx.lambda[j];
  }
  return a;
}

namespace {

double jump_energy(const ControlVector& c, const LocalContext& ctx) {
  double e = 0.0;
  for (std::size_t j = 0; j < ctx.lambda.size(); ++j) {
    if (ctx.lambda[j] == 0.0) continue;
    e += c.u_at(j) * c.u_at(j) * ctx.lambda[j];
  }
  return e;
}

}  // namespace

double residual_risk(const ControlVector& c, const LocalContext& ctx,
                     double orthogonal_variance) {
  // |w|^2 - (w.b)^2 / |b|^2 via Lagrange's identity, with w = (z, u_j sqrt(lambda_j))
  // and b = (sigma, gamma_j sqrt(lambda_j)): a sum of squares, so no cancellation
  // leaves a spurious residual when the controls are proportional to b.
  double cross = 0.0;
  const std::size_t n = ctx.lambda.size();
  for (std::size_t a = 0; a < n; ++a) {
    if (ctx.lambda[a] == 0.0) continue;
    const double root_a = std::sqrt(ctx.lambda[a]);
    const double wa = c.u_at(a) * root_a, ba = ctx.gamma[a] * root_a;
    const double d0 = c.z * ba - wa * ctx.sigma;
    cross += d0 * d0;
    for (std::size_t b = a + 1; b < n; ++b) {
      if (ctx.lambda[b] == 0.0) continue;
      const double root_b = std::sqrt(ctx.lambda[b]);
      const double d1 = wa * ctx.gamma[b] * root_b - c.u_at(b) * root_b * ba;
      cross += d1 * d1;
    }
  }
  const double radicand = cross / ctx.delta2 + orthogonal_variance;
  if (radicand >= 0.0) return std::sqrt(radicand);
  std::ostringstream os;
  os << "negative orthogonal variance " << orthogonal_variance;
  throw std::logic_error(os.str());
}

double variance_optimal_strategy(const ControlVector& c, const LocalContext& ctx) {
  return hedgeable_exposure(c, ctx) / ctx.delta2;
}

double optimal_strategy(const ControlVector& c, const LocalContext& ctx, double L,
                        double orthogonal_variance) {
  const double base = variance_optimal_strategy(c, ctx);
  const double R = residual_risk(c, ctx, orthogonal_variance);
  if (R == 0.0 || ctx.theta == 0.0) return base;
  const double kappa = loading_coefficient(L, ctx.theta);
  if (kappa == 0.0)
    throw SharpeMarginError("optimal strategy undefined for L == theta with residual risk");
  return base + ctx.theta / (ctx.delta() * kappa) * R;
}

double charge_rate(const ControlVector& c, const LocalContext& ctx, double L,
                   double orthogonal_variance) {
  const double kappa = loading_coefficient(L, ctx.theta);
  const double a = hedgeable_exposure(c, ctx);
  const double R = residual_risk(c, ctx, orthogonal_variance);
  return a / ctx.delta() * ctx.theta - kappa * R;
}

double driver(const ControlVector& c, const LocalContext& ctx, double L) {
  return -c.y * ctx.r - charge_rate(c, ctx, L, 0.0);
}

SurplusMoments instantaneous_moments(double pi, double f, const ControlVector& c,
                                     const LocalContext& ctx, double orthogonal_variance) {
  SurplusMoments out;
  out.excess_drift = pi * (ctx.mu - ctx.r) - f;
  const double dz = pi * ctx.sigma - c.z;
  double qv = dz * dz + orthogonal_variance;
  for (std::size_t j = 0; j < ctx.lambda.size(); ++j) {
    if (ctx.lambda[j] == 0.0) continue;
    const double du = pi * ctx.gamma[j] - c.u_at(j);
    qv += du * du * ctx.lambda[j];
  }
  out.quadratic_variation = qv;
  return out;
}

double surplus_risk(double pi, double f, const ControlVector& c, const LocalContext& ctx,
                    double L) {
  const auto mom = instantaneous_moments(pi, f, c, ctx);
  return L * std::sqrt(mom.quadratic_variation) - mom.excess_drift;
}

double GirsanovKernel::objective(const ControlVector& c, const LocalContext& ctx) const {
  double v = c.z * psi;
  for (std::size_t j = 0; j < ctx.lambda.size(); ++j)
    if (ctx.lambda[j] > 0.0) v += c.u_at(j) * phi[j] * ctx.lambda[j];
  return v;
}

double GirsanovKernel::martingale_defect(const LocalContext& ctx) const {
  double v = psi * ctx.sigma;
  for (std::size_t j = 0; j < ctx.lambda.size(); ++j)
    if (ctx.lambda[j] > 0.0) v += phi[j] * ctx.gamma[j] * ctx.lambda[j];
  return v - (ctx.mu - ctx.r);
}

double GirsanovKernel::norm2(const LocalContext& ctx) const {
  double v = psi * psi;
  for (std::size_t j = 0; j < ctx.lambda.size(); ++j)
    if (ctx.lambda[j] > 0.0) v += phi[j] * phi[j] * ctx.lambda[j];
  return v;
}

GirsanovKernel girsanov_kernel(const ControlVector& c, const LocalContext& ctx, double L) {
  const std::size_t n = ctx.lambda.size();
  GirsanovKernel k;
  k.phi.assign(n, 0.0);
  const double kappa = loading_coefficient(L, ctx.theta);
  const double base = variance_optimal_strategy(c, ctx);
  const double R = residual_risk(c, ctx);

  if (!ctx.any_jump_risk()) {
    k.psi = ctx.theta;
    k.k2 = kappa > 0.0 ? -0.5 * R / kappa : -std::numeric_limits<double>::infinity();
    k.k1 = base;
    k.attainable = R == 0.0;
    return k;
  }

  const double scale = std::sqrt(c.z * c.z + jump_energy(c, ctx) + 1.0);
  if (R <= 1e-10 * scale || kappa == 0.0) {
    // the regular-point formula degenerates; fall back to the minimal-martingale kernel
    const double w = (ctx.mu - ctx.r) / ctx.delta2;
    k.psi = w * ctx.sigma;
    for (std::size_t j = 0; j < n; ++j)
      if (ctx.lambda[j] > 0.0) k.phi[j] = w * ctx.gamma[j];
    k.k1 = base;
    k.k2 = kappa > 0.0 ? -0.5 * R / kappa : -std::numeric_limits<double>::infinity();
    k.attainable = R <= 1e-10 * scale;
    return k;
  }

  k.k2 = -0.5 * R / kappa;
  k.k1 = -(ctx.theta / ctx.delta()) * 2.0 * k.k2 + base;
  k.psi = (c.z - ctx.sigma * k.k1) / (2.0 * k.k2);
  for (std::size_t j = 0; j < n; ++j)
    if (ctx.lambda[j] > 0.0) k.phi[j] = (c.u_at(j) - ctx.gamma[j] * k.k1) / (2.0 * k.k2);
  return k;
}

}  // namespace rsprice
