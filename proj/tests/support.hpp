#pragma once

// Shared fixtures and independent numerical oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "rsprice/generator.hpp"
#include "rsprice/market.hpp"

namespace rsprice::testing {

inline RegimeSet table1() { return build_market(table1_config()); }

/// Geometric Brownian motion as a one-state market.
inline RegimeSet single_regime(double r, double mu, double sigma, double s0 = 100.0,
                               double horizon = 1.0) {
  MarketConfig cfg;
  cfg.states = {{r, mu, sigma}};
  cfg.s0 = s0;
  cfg.j0 = 1;
  cfg.horizon = horizon;
  return build_market(cfg);
}

/// Minimiser of a unimodal function on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b,
                             double tol = 1e-12, int max_iter = 400) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Random regime-switching market with constant intensities.
inline MarketConfig random_market_config(std::mt19937_64& rng, std::size_t n_states) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  MarketConfig cfg;
  for (std::size_t i = 0; i < n_states; ++i) {
    const double r = 0.05 * U(rng);
    cfg.states.push_back({r, r + 0.12 * U(rng), 0.05 + 0.35 * U(rng)});
  }
  for (std::size_t i = 0; i < n_states; ++i)
    for (std::size_t j = 0; j < n_states; ++j) {
      if (i == j) continue;
      const double lam = U(rng) < 0.15 ? 0.0 : 8.0 * U(rng);
      const double gam = U(rng) < 0.15 ? 0.0 : -0.3 + 0.6 * U(rng);
      cfg.transitions.push_back({static_cast<int>(i + 1), static_cast<int>(j + 1), gam,
                                 Intensity::constant(lam)});
    }
  return cfg;
}

struct LocalInstance {
  RegimeSet market;
  LocalContext ctx;
  ControlVector controls;
  double L = 0.0;
};

/// Random node of a random market with random controls and an admissible L.
inline LocalInstance random_local_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::size_t n = U(rng) < 0.5 ? 2 : 3;
  LocalInstance inst{build_market(random_market_config(rng, n)), {}, {}, 0.0};
  const std::size_t i = static_cast<std::size_t>(U(rng) * n) % n;
  inst.ctx = local_context(inst.market, i, 50.0 + 100.0 * U(rng));
  inst.controls.y = 20.0 * U(rng);
  inst.controls.z = -30.0 + 60.0 * U(rng);
  inst.controls.u.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    if (j != i) inst.controls.u[j] = -20.0 + 40.0 * U(rng);
  inst.L = inst.ctx.theta + 0.01 + U(rng);
  return inst;
}

/// Smallest value of z psi + sum u_j phi_j lambda_j over kernels with
/// psi sigma + sum phi_j gamma_j lambda_j = mu - r and psi^2 + sum phi_j^2 lambda_j <= L^2,
/// found by a direct search over the boundary of the feasible disc (at most
/// two active jump channels).
/// Coordinates are scaled by sqrt(lambda) so the constraint set is Euclidean.
inline double kernel_objective_oracle(const ControlVector& c, const LocalContext& ctx, double L) {
  std::vector<double> b{ctx.sigma}, w{c.z};
  for (std::size_t j = 0; j < ctx.lambda.size(); ++j) {
    if (ctx.lambda[j] <= 0.0) continue;
    const double root = std::sqrt(ctx.lambda[j]);
    b.push_back(ctx.gamma[j] * root);
    w.push_back(c.u_at(j) * root);
  }
  const std::size_t d = b.size();
  auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
    return s;
  };
  const double bb = dot(b, b);
  const double excess = ctx.mu - ctx.r;
  std::vector<double> k0(d);
  for (std::size_t k = 0; k < d; ++k) k0[k] = excess / bb * b[k];
  const double rho2 = L * L - dot(k0, k0);
  if (d == 1 || rho2 <= 0.0) return dot(k0, w);
  const double rho = std::sqrt(rho2);

  // orthonormal basis of the hyperplane b^perp by Gram-Schmidt on unit vectors
  std::vector<std::vector<double>> basis;
  std::vector<std::vector<double>> prev{b};
  for (std::size_t e = 0; e < d && basis.size() + 1 < d; ++e) {
    std::vector<double> v(d, 0.0);
    v[e] = 1.0;
    for (const auto& q : prev) {
      const double proj = dot(v, q) / dot(q, q);
      for (std::size_t k = 0; k < d; ++k) v[k] -= proj * q[k];
    }
    const double nv = std::sqrt(dot(v, v));
    if (nv < 1e-8) continue;
    for (double& x : v) x /= nv;
    basis.push_back(v);
    prev.push_back(v);
  }

  const double base = dot(k0, w);
  std::vector<double> a(basis.size());
  for (std::size_t q = 0; q < basis.size(); ++q) a[q] = dot(basis[q], w);

  if (a.size() == 1) return std::min(base + rho * a[0], base - rho * a[0]);
  // two-dimensional hyperplane: one angle; coarse scan, then golden section
  double best_t = 0.0, best = std::numeric_limits<double>::infinity();
  const int n_scan = 720;
  for (int q = 0; q < n_scan; ++q) {
    const double t = 2.0 * M_PI * q / n_scan;
    const double v = base + rho * (std::cos(t) * a[0] + std::sin(t) * a[1]);
    if (v < best) best = v, best_t = t;
  }
  const double h = 2.0 * M_PI / n_scan;
  const double t = golden_section(
      [&](double x) { return base + rho * (std::cos(x) * a[0] + std::sin(x) * a[1]); },
      best_t - h, best_t + h, 1e-14);
  return base + rho * (std::cos(t) * a[0] + std::sin(t) * a[1]);
}

}  // namespace rsprice::testing
