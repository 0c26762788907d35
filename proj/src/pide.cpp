#include "rsprice/pide.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace rsprice {

namespace {

// Solves a tridiagonal system in place (Thomas algorithm); `lower[0]` and
// `upper[n-1]` are ignored.
void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                       std::vector<double>& upper, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t k = 1; k < n; ++k) {
    const double w = lower[k] / diag[k - 1];
    diag[k] -= w * upper[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / diag[k];
}

}  // namespace

std::size_t PideResult::layer(double t) const {
  const double dt = times_[1] - times_[0];
  const double k = std::round(t / dt);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), times_.size() - 1);
}

void PideResult::build_interpolators() {
  interp_.clear();
  interp_.reserve(times_.size() * n_states_);
  const std::size_t N = s_.size();
  for (std::size_t k = 0; k < times_.size(); ++k)
    for (std::size_t i = 0; i < n_states_; ++i) {
      std::vector<double> x = x_;
      std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>((k * n_states_ + i) * N),
                            values_.begin() + static_cast<std::ptrdiff_t>((k * n_states_ + i + 1) * N));
      interp_.emplace_back(std::move(x), std::move(v));
    }
}

double PideResult::value(std::size_t k, std::size_t i, double s) const {
  const std::size_t N = s_.size();
  if (s <= s_.front()) {
    const double d = (node(k, i, 1) - node(k, i, 0)) / (s_[1] - s_[0]);
    return node(k, i, 0) + d * (s - s_.front());
  }
  if (s >= s_.back()) {
    const double d = (node(k, i, N - 1) - node(k, i, N - 2)) / (s_[N - 1] - s_[N - 2]);
    return node(k, i, N - 1) + d * (s - s_.back());
  }
  return interp_[k * n_states_ + i](std::log(s));
}

double PideResult::slope(std::size_t k, std::size_t i, double s) const {
  const std::size_t N = s_.size();
  if (s <= s_.front()) return (node(k, i, 1) - node(k, i, 0)) / (s_[1] - s_[0]);
  if (s >= s_.back()) return (node(k, i, N - 1) - node(k, i, N - 2)) / (s_[N - 1] - s_[N - 2]);
  return interp_[k * n_states_ + i].prime(std::log(s)) / s;
}

void PideResult::write_csv(std::ostream& out) const {
  out << "t,s,i,V\n" << std::setprecision(17);
  for (std::size_t k = 0; k < times_.size(); ++k)
    for (std::size_t i = 0; i < n_states_; ++i)
      for (std::size_t n = 0; n < s_.size(); ++n)
        out << times_[k] << ',' << s_[n] << ',' << i + 1 << ',' << node(k, i, n) << '\n';
}

PideResult price_pide(const RegimeSet& m, const Claim& claim, const SharpeTarget& L,
                      const PideConfig& config) {
  if (m.has_feedback()) throw std::invalid_argument("the PIDE solver needs constant intensities");
  if (config.n_space < 5 || config.n_time < 1)
    throw std::invalid_argument("PIDE grid needs >= 5 price nodes and >= 1 time step");
  check_sharpe_margin(m, L, config.sharpe_margin, m.s0(), m.s0(), 1);

  const std::size_t I = m.n_states();
  const std::size_t N = config.n_space;
  const std::size_t M = config.n_time;
  const double scale = claim.scale(m.s0());
  const double s_min = config.s_min > 0.0 ? config.s_min : scale / 5.0;
  const double s_max = config.s_max > 0.0 ? config.s_max : scale * 5.0;
  if (!(s_max > s_min)) throw std::invalid_argument("PIDE grid needs s_max > s_min");
  const double T = m.horizon();
  const double dt = T / static_cast<double>(M);

  PideResult out;
  out.n_states_ = I;
  out.x_.resize(N);
  out.s_.resize(N);
  const double x0 = std::log(s_min), x1 = std::log(s_max);
  const double dx = (x1 - x0) / static_cast<double>(N - 1);
  for (std::size_t n = 0; n < N; ++n) {
    out.x_[n] = x0 + dx * static_cast<double>(n);
    out.s_[n] = std::exp(out.x_[n]);
  }
  out.times_.resize(M + 1);
  for (std::size_t k = 0; k <= M; ++k) out.times_[k] = T * static_cast<double>(k) / static_cast<double>(M);
  out.values_.assign((M + 1) * I * N, 0.0);

  std::vector<LocalContext> ctx(I);
  std::vector<double> kappa(I);
  std::vector<std::vector<double>> lambda_q(I, std::vector<double>(I, 0.0));
  std::vector<std::vector<double>> shift(I, std::vector<double>(I, 0.0));
  for (std::size_t i = 0; i < I; ++i) {
    ctx[i] = local_context(m, i, m.s0());
    kappa[i] = loading_coefficient(L.at(i), ctx[i].theta);
    for (std::size_t j = 0; j < I; ++j) {
      if (ctx[i].lambda[j] <= 0.0) continue;
      lambda_q[i][j] = ctx[i].lambda[j] * (1.0 - ctx[i].gamma[j] * ctx[i].theta / ctx[i].delta());
      shift[i][j] = std::log1p(ctx[i].gamma[j]);
    }
  }

  double payoff_max = 0.0;
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t n = 0; n < N; ++n) {
      const double f = claim.payoff(out.s_[n], i);
      out.values_[(M * I + i) * N + n] = f;
      payoff_max = std::max(payoff_max, std::abs(f));
    }
  const double lip = claim.lipschitz();
  const double bound = 10.0 * (payoff_max + (std::isfinite(lip) ? lip * s_max : 0.0) + 1.0);

  // tridiagonal local operator per regime (interior rows)
  std::vector<double> op_lo(I), op_dg(I), op_up(I);
  for (std::size_t i = 0; i < I; ++i) {
    const LocalContext& cx = ctx[i];
    double leak = 0.0, jump_drift = 0.0;
    for (std::size_t j = 0; j < I; ++j) {
      leak += lambda_q[i][j];
      jump_drift += cx.gamma[j] * lambda_q[i][j];
    }
    const double sig2 = cx.sigma * cx.sigma;
    const double drift = cx.r - jump_drift - 0.5 * sig2;
    const double a = 0.5 * sig2 / (dx * dx);
    const double b = drift / (2.0 * dx);
    double lo_c = a - b, up_c = a + b;
    if (lo_c < 0.0 || up_c < 0.0) {  // upwind the drift
      lo_c = a + std::max(-drift, 0.0) / dx;
      up_c = a + std::max(drift, 0.0) / dx;
    }
    op_lo[i] = lo_c;
    op_up[i] = up_c;
    op_dg[i] = -(lo_c + up_c) - (cx.r + leak);
  }
  const double w0 = (out.s_[0] - out.s_[1]) / (out.s_[2] - out.s_[1]);
  const double w1 = (out.s_[N - 1] - out.s_[N - 2]) / (out.s_[N - 3] - out.s_[N - 2]);

  using Layer = std::vector<double>;  // I * N values
  ControlVector c;
  c.u.assign(I, 0.0);
  std::vector<std::vector<double>> jumped(I, std::vector<double>(N));

  // jump-in coupling plus risk loading, evaluated on one layer
  auto explicit_part = [&](const double* v_all, Layer& e) {
    e.assign(I * N, 0.0);
    std::vector<boost::math::interpolators::pchip<std::vector<double>>> interp;
    interp.reserve(I);
    for (std::size_t j = 0; j < I; ++j)
      interp.emplace_back(std::vector<double>(out.x_),
                          std::vector<double>(v_all + j * N, v_all + (j + 1) * N));
    auto at = [&](std::size_t j, double x) {
      const double* v = v_all + j * N;
      if (x <= out.x_.front()) {
        const double d = (v[1] - v[0]) / (out.s_[1] - out.s_[0]);
        return v[0] + d * (std::exp(x) - out.s_[0]);
      }
      if (x >= out.x_.back()) {
        const double d = (v[N - 1] - v[N - 2]) / (out.s_[N - 1] - out.s_[N - 2]);
        return v[N - 1] + d * (std::exp(x) - out.s_[N - 1]);
      }
      return interp[j](x);
    };
    for (std::size_t i = 0; i < I; ++i) {
      const LocalContext& cx = ctx[i];
      const double* v = v_all + i * N;
      for (std::size_t j = 0; j < I; ++j)
        if (cx.lambda[j] > 0.0)
          for (std::size_t n = 0; n < N; ++n) jumped[j][n] = at(j, out.x_[n] + shift[i][j]);
      for (std::size_t n = 0; n < N; ++n) {
        double vx;
        if (n == 0) vx = (v[1] - v[0]) / dx;
        else if (n == N - 1) vx = (v[N - 1] - v[N - 2]) / dx;
        else vx = (v[n + 1] - v[n - 1]) / (2.0 * dx);
        c.z = vx * cx.sigma;
        double coupling = 0.0;
        for (std::size_t j = 0; j < I; ++j) {
          c.u[j] = cx.lambda[j] > 0.0 ? jumped[j][n] - v[n] : 0.0;
          if (lambda_q[i][j] > 0.0) coupling += lambda_q[i][j] * jumped[j][n];
        }
        const double R = kappa[i] > 0.0 ? residual_risk(c, cx) : 0.0;
        e[i * N + n] = coupling + kappa[i] * R;
      }
    }
  };

  // theta-scheme step of length h from `from` to `to` with explicit terms e
  std::vector<double> lw(N - 2), dgv(N - 2), up(N - 2), rh(N - 2);
  auto advance = [&](const double* from, const Layer& e, double h, double theta, double* to) {
    const std::size_t n_in = N - 2;
    for (std::size_t i = 0; i < I; ++i) {
      const double* v = from + i * N;
      const double lo_c = op_lo[i], up_c = op_up[i], dg = op_dg[i];
      for (std::size_t r = 0; r < n_in; ++r) {
        const std::size_t n = r + 1;
        const double av = lo_c * v[n - 1] + dg * v[n] + up_c * v[n + 1];
        lw[r] = -theta * h * lo_c;
        dgv[r] = 1.0 - theta * h * dg;
        up[r] = -theta * h * up_c;
        rh[r] = v[n] + (1.0 - theta) * h * av + h * e[i * N + n];
      }
      // V_ss = 0 at both ends: V_0 = (1 - w0) V_1 + w0 V_2, same at the top
      const double l1 = lw[0], un = up[n_in - 1];
      dgv[0] += l1 * (1.0 - w0);
      up[0] += l1 * w0;
      dgv[n_in - 1] += un * (1.0 - w1);
      lw[n_in - 1] += un * w1;
      solve_tridiagonal(lw, dgv, up, rh);
      double* dst = to + i * N;
      for (std::size_t r = 0; r < n_in; ++r) dst[r + 1] = rh[r];
      dst[0] = (1.0 - w0) * dst[1] + w0 * dst[2];
      dst[N - 1] = (1.0 - w1) * dst[N - 2] + w1 * dst[N - 3];
    }
  };

  Layer e_prev, e_now, e_mix, half(I * N);
  for (std::size_t k = M; k-- > 0;) {
    const double* old = &out.values_[(k + 1) * I * N];
    double* now = &out.values_[k * I * N];
    explicit_part(old, e_now);
    if (k + 2 >= M) {
      // Rannacher start-up: two implicit half steps damp the payoff kink
      advance(old, e_now, 0.5 * dt, 1.0, half.data());
      Layer e_half;
      explicit_part(half.data(), e_half);
      advance(half.data(), e_half, 0.5 * dt, 1.0, now);
    } else {
      // Crank-Nicolson on the local operator, Adams-Bashforth on the explicit part
      e_mix.resize(I * N);
      for (std::size_t q = 0; q < I * N; ++q) e_mix[q] = 1.5 * e_now[q] - 0.5 * e_prev[q];
      advance(old, e_mix, dt, 0.5, now);
    }
    std::swap(e_prev, e_now);

    for (std::size_t q = 0; q < I * N; ++q) {
      if (!std::isfinite(now[q]) || std::abs(now[q]) > bound) {
        std::ostringstream os;
        os << "PIDE diverged at t=" << out.times_[k] << " (|V| beyond " << bound
           << "); retry with more time steps than " << M;
        throw PideDivergenceError(os.str());
      }
    }
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t n = 1; n + 1 < N; ++n)
        out.max_abs_vs = std::max(
            out.max_abs_vs, std::abs((now[i * N + n + 1] - now[i * N + n - 1]) /
                                     (out.s_[n + 1] - out.s_[n - 1])));
  }

  out.build_interpolators();
  out.price = out.value(0, m.j0(), m.s0());
  return out;
}

PideControls extract_controls(const PideResult& grid, const RegimeSet& m, std::size_t layer) {
  const std::size_t I = m.n_states();
  const std::size_t N = grid.s().size();
  if (grid.n_states() != I) throw std::invalid_argument("grid and market disagree on states");
  PideControls out;
  out.z.assign(I, std::vector<double>(N, 0.0));
  out.u.assign(I, std::vector<std::vector<double>>(I, std::vector<double>(N, 0.0)));
  const auto& s = grid.s();
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t n = 0; n < N; ++n) {
      double vs;
      if (n == 0) vs = (grid.node(layer, i, 1) - grid.node(layer, i, 0)) / (s[1] - s[0]);
      else if (n == N - 1) vs = (grid.node(layer, i, N - 1) - grid.node(layer, i, N - 2)) / (s[N - 1] - s[N - 2]);
      else vs = (grid.node(layer, i, n + 1) - grid.node(layer, i, n - 1)) / (s[n + 1] - s[n - 1]);
      out.z[i][n] = vs * s[n] * m.sigma(i);
      for (std::size_t j = 0; j < I; ++j) {
        if (j == i || m.intensity(j, i).identically_zero()) continue;
        out.u[i][j][n] = grid.value(layer, j, s[n] * (1.0 + m.gamma(j, i))) - grid.node(layer, i, n);
      }
    }
  }
  return out;
}

}  // namespace rsprice
