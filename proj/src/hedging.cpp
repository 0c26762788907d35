#include "rsprice/hedging.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "rsprice/parallel.hpp"

namespace rsprice {

bool LsmcSurface::evaluate(std::size_t k, double, std::size_t i, double s, LocalContext& ctx,
                           ControlVector& c) const {
  sol_.evaluate(k, i, s, ctx, c);
  if (k >= sol_.n_steps()) return true;
  const RegimeFit& f = sol_.fit(k, i);
  return s >= f.s_lo && s <= f.s_hi;
}

bool PideSurface::evaluate(std::size_t, double t, std::size_t i, double s, LocalContext& ctx,
                           ControlVector& c) const {
  fill_local_context(m_, i, s, ctx);
  const std::size_t layer = grid_.layer(t);
  const std::size_t I = m_.n_states();
  c.u.assign(I, 0.0);
  c.u_mortality = 0.0;
  c.y = grid_.value(layer, i, s);
  c.z = grid_.slope(layer, i, s) * s * ctx.sigma;
  for (std::size_t j = 0; j < I; ++j)
    if (ctx.lambda[j] > 0.0) c.u[j] = grid_.value(layer, j, s * (1.0 + ctx.gamma[j])) - c.y;
  return s >= grid_.s().front() && s <= grid_.s().back();
}

StrategyKind parse_strategy(const std::string& name) {
  if (name == "optimal") return StrategyKind::optimal;
  if (name == "variance_minimal" || name == "variance-minimal") return StrategyKind::variance_minimal;
  if (name == "custom") return StrategyKind::custom;
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::optimal: return "optimal";
    case StrategyKind::variance_minimal: return "variance_minimal";
    case StrategyKind::custom: return "custom";
  }
  return "?";
}

BacktestReport backtest(const PathSet& paths, const PriceSurface& surface, const SharpeTarget& L,
                        StrategyKind strategy, const CustomStrategy& custom, unsigned threads) {
  if (strategy == StrategyKind::custom && !custom)
    throw std::invalid_argument("custom strategy requested without a strategy function");
  const RegimeSet& m = surface.market();
  const std::size_t P = paths.n_paths();
  const std::size_t K = paths.n_steps();
  const std::size_t I = m.n_states();
  const auto& times = paths.times();

  // risk[k * P + p] = sqrt(model QV) h, the local risk the drift is measured against
  std::vector<double> incr(K * P), risk(K * P), terminal(P);
  std::vector<std::size_t> outside(P);

  parallel_for(P, threads, [&](std::size_t begin, std::size_t end) {
    LocalContext ctx;
    ControlVector c;
    for (std::size_t p = begin; p < end; ++p) {
      std::size_t out_count = 0;
      if (!surface.evaluate(0, times[0], paths.regime(0, p), paths.s(0, p), ctx, c)) ++out_count;
      double x = c.y;
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t i = paths.regime(k, p);
        const double s = paths.s(k, p);
        if (k > 0 && !surface.evaluate(k, times[k], i, s, ctx, c)) ++out_count;
        const double y = c.y;
        const double orth = c.u_mortality * c.u_mortality * surface.mortality_rate(k);
        double pi = 0.0;
        switch (strategy) {
          case StrategyKind::optimal: pi = optimal_strategy(c, ctx, L.at(i), orth); break;
          case StrategyKind::variance_minimal: pi = variance_optimal_strategy(c, ctx); break;
          case StrategyKind::custom: pi = custom(k, times[k], i, s, y); break;
        }
        const double h = paths.step(k);
        const double f = charge_rate(c, ctx, L.at(i), orth);
        const double qv = instantaneous_moments(pi, f, c, ctx, orth).quadratic_variation;

        const double growth = std::exp(paths.log_discount(k, p) - paths.log_discount(k + 1, p));
        const double x_next = (x - pi) * growth + pi * paths.s(k + 1, p) / s;
        if (k + 1 < K) {
          if (!surface.evaluate(k + 1, times[k + 1], paths.regime(k + 1, p), paths.s(k + 1, p),
                                ctx, c))
            ++out_count;
        } else {
          c.y = surface.claim().payoff(paths.s(K, p), paths.regime(K, p));
        }
        const double y_next = c.y;
        const double d = (x_next - y_next) - (x - y) * growth;
        incr[k * P + p] = d;
        risk[k * P + p] = std::sqrt(qv) * h;
        x = x_next;
        if (k + 1 == K) terminal[p] = x_next - y_next;
      }
      if (K == 0) terminal[p] = 0.0;
      outside[p] = out_count;
    }
  });

  BacktestReport rep;
  rep.strategy = to_string(strategy);
  rep.n_paths = P;
  rep.n_steps = K;
  rep.regimes.resize(I);
  std::vector<double> s1(I), s2(I), q1(I), q2(I), b1(I), b2(I), ab(I), hsum(I);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t p = 0; p < P; ++p) {
      const std::size_t i = paths.regime(k, p);
      const double h = paths.step(k);
      const double d = incr[k * P + p];
      rep.regimes[i].samples++;
      hsum[i] += h;
      s1[i] += d;
      s2[i] += d * d;
      q1[i] += d * d;
      q2[i] += d * d * d * d;
      const double b = risk[k * P + p];
      b1[i] += b;
      b2[i] += b * b;
      ab[i] += d * b;
    }
  }
  for (std::size_t i = 0; i < I; ++i) {
    RegimeStatistics& st = rep.regimes[i];
    st.target = L.at(i);
    const double n = static_cast<double>(st.samples);
    if (st.samples < 2) continue;
    const double h = hsum[i] / n;
    const double mean = s1[i] / n;
    const double var = std::max(s2[i] / n - mean * mean, 0.0);
    st.drift_rate = mean / h;
    st.drift_se = std::sqrt(var / n) / h;
    const double qmean = q1[i] / n;
    st.qv_rate = qmean / h;
    st.qv_se = std::sqrt(std::max(q2[i] / n - qmean * qmean, 0.0) / n) / h;
    st.sharpe = st.qv_rate > 0.0 ? st.drift_rate / std::sqrt(st.qv_rate) : 0.0;
    if (b1[i] > 0.0) {
      // ratio estimator sum d / sum sqrt(QV) h with its delta-method error
      const double ratio = s1[i] / b1[i];
      const double resid2 = s2[i] - 2.0 * ratio * ab[i] + ratio * ratio * b2[i];
      st.normalized_sharpe = ratio;
      st.normalized_sharpe_se = std::sqrt(std::max(resid2, 0.0)) / b1[i];
    }
  }

  double mean = 0.0;
  for (double v : terminal) mean += v;
  mean /= static_cast<double>(P);
  double var = 0.0;
  for (double v : terminal) var += (v - mean) * (v - mean);
  var /= static_cast<double>(P > 1 ? P - 1 : 1);
  rep.terminal_mean = mean;
  rep.terminal_variance = var;
  rep.terminal_mean_se = std::sqrt(var / static_cast<double>(P));
  rep.terminal_surplus = std::move(terminal);
  for (std::size_t v : outside) rep.extrapolated_nodes += v;
  return rep;
}

void BacktestReport::write_csv(std::ostream& out) const {
  out << "strategy,regime,samples,drift_rate,drift_se,qv_rate,qv_se,sharpe,normalized_sharpe,"
         "normalized_sharpe_se,target\n"
      << std::setprecision(12);
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    const auto& st = regimes[i];
    out << strategy << ',' << i + 1 << ',' << st.samples << ',' << st.drift_rate << ','
        << st.drift_se << ',' << st.qv_rate << ',' << st.qv_se << ',' << st.sharpe << ','
        << st.normalized_sharpe << ',' << st.normalized_sharpe_se << ',' << st.target << '\n';
  }
}

}  // namespace rsprice
