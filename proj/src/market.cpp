#include "rsprice/market.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "rsprice/parallel.hpp"

namespace rsprice {

namespace {

std::string at_pair(std::size_t target, std::size_t source) {
  std::ostringstream os;
  os << "(" << target + 1 << "," << source + 1 << ")";
  return os.str();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double Intensity::lower_bound() const {
  if (!feedback) return level;
  if (slope < 0.0) return 0.0;
  return level > 0.0 ? level : 0.0;
}

MarketConfig market_config_from_json(const nlohmann::json& doc) {
  MarketConfig cfg;
  try {
    for (const auto& st : doc.at("states")) {
      cfg.states.push_back({st.at("r").get<double>(), st.at("mu").get<double>(),
                            st.at("sigma").get<double>()});
    }
    if (doc.contains("transitions")) {
      for (const auto& tr : doc.at("transitions")) {
        TransitionParams t;
        t.from = tr.at("from").get<int>();
        t.to = tr.at("to").get<int>();
        t.gamma = tr.at("gamma").get<double>();
        if (tr.contains("lambda_affine")) {
          const auto& a = tr.at("lambda_affine");
          t.lambda = Intensity::affine(a.at("a").get<double>(), a.at("b").get<double>(),
                                       a.at("cap").get<double>());
        } else {
          t.lambda = Intensity::constant(tr.at("lambda").get<double>());
        }
        cfg.transitions.push_back(t);
      }
    }
    cfg.s0 = doc.value("s0", 100.0);
    cfg.j0 = doc.value("j0", 1);
    cfg.horizon = doc.value("horizon", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw MarketError(std::string("malformed model document: ") + e.what());
  }
  return cfg;
}

MarketConfig load_market_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MarketError("cannot open model file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw MarketError("cannot parse model file '" + path + "': " + e.what());
  }
  return market_config_from_json(doc);
}

nlohmann::json to_json(const MarketConfig& config) {
  nlohmann::json doc;
  doc["states"] = nlohmann::json::array();
  for (const auto& s : config.states)
    doc["states"].push_back({{"r", s.r}, {"mu", s.mu}, {"sigma", s.sigma}});
  doc["transitions"] = nlohmann::json::array();
  for (const auto& t : config.transitions) {
    nlohmann::json row = {{"from", t.from}, {"to", t.to}, {"gamma", t.gamma}};
    if (t.lambda.feedback)
      row["lambda_affine"] = {{"a", t.lambda.level}, {"b", t.lambda.slope}, {"cap", t.lambda.cap}};
    else
      row["lambda"] = t.lambda.level;
    doc["transitions"].push_back(row);
  }
  doc["s0"] = config.s0;
  doc["j0"] = config.j0;
  doc["horizon"] = config.horizon;
  return doc;
}

MarketConfig table1_config() {
  MarketConfig cfg;
  cfg.states = {{0.03, 0.07, 0.1}, {0.01, 0.02, 0.25}};
  cfg.transitions = {{1, 2, -0.1, Intensity::constant(2.0)},
                     {2, 1, 0.05, Intensity::constant(5.0)}};
  cfg.s0 = 100.0;
  cfg.j0 = 1;
  cfg.horizon = 1.0;
  return cfg;
}

RegimeSet build_market(const MarketConfig& config) {
  const std::size_t n = config.states.size();
  if (n == 0) throw MarketError("model has no states");
  if (n > 255) throw MarketError("too many states (max 255)");
  RegimeSet m;
  m.states_ = config.states;
  m.gamma_.assign(n * n, 0.0);
  m.lambda_.assign(n * n, Intensity::constant(0.0));
  m.config_ = config;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& st = config.states[i];
    if (!std::isfinite(st.r) || !std::isfinite(st.mu) || !std::isfinite(st.sigma))
      throw MarketError("non-finite coefficient at state " + std::to_string(i + 1));
    if (st.sigma < 0.0) throw MarketError("sigma < 0 at state " + std::to_string(i + 1));
    if (st.mu < st.r) throw MarketError("mu < r at state " + std::to_string(i + 1));
  }

  std::vector<bool> seen(n * n, false);
  for (const auto& t : config.transitions) {
    if (t.from < 1 || t.to < 1 || static_cast<std::size_t>(t.from) > n ||
        static_cast<std::size_t>(t.to) > n)
      throw MarketError("transition references unknown state (" + std::to_string(t.to) + "," +
                        std::to_string(t.from) + ")");
    const std::size_t src = static_cast<std::size_t>(t.from - 1);
    const std::size_t tgt = static_cast<std::size_t>(t.to - 1);
    if (src == tgt) throw MarketError("self transition at state " + std::to_string(t.from));
    if (seen[tgt * n + src]) throw MarketError("duplicate transition at " + at_pair(tgt, src));
    seen[tgt * n + src] = true;
    if (!(t.gamma > -1.0)) throw MarketError("gamma <= -1 at " + at_pair(tgt, src));
    const auto& lam = t.lambda;
    if (!lam.feedback && !(lam.level >= 0.0))
      throw MarketError("negative lambda at " + at_pair(tgt, src));
    if (lam.feedback) {
      if (!(lam.cap >= 0.0) || !std::isfinite(lam.cap))
        throw MarketError("invalid intensity cap at " + at_pair(tgt, src));
      if (lam.lower_bound() > lam.cap)
        throw MarketError("intensity exceeds its cap at " + at_pair(tgt, src));
      m.feedback_ = true;
    }
    m.gamma_[tgt * n + src] = t.gamma;
    m.lambda_[tgt * n + src] = lam;
  }

  for (std::size_t i = 0; i < n; ++i) {
    double floor = config.states[i].sigma * config.states[i].sigma;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double g = m.gamma(j, i);
      floor += g * g * m.intensity(j, i).lower_bound();
    }
    if (floor < RegimeSet::kVarianceFloor)
      throw MarketError("delta^2 below epsilon at state " + std::to_string(i + 1));
  }

  if (!(config.s0 > 0.0)) throw MarketError("s0 must be positive");
  if (config.j0 < 1 || static_cast<std::size_t>(config.j0) > n)
    throw MarketError("j0 outside 1.." + std::to_string(n));
  if (!(config.horizon > 0.0)) throw MarketError("horizon must be positive");
  m.s0_ = config.s0;
  m.j0_ = static_cast<std::size_t>(config.j0 - 1);
  m.horizon_ = config.horizon;
  return m;
}

double RegimeSet::exit_rate_bound(std::size_t source) const {
  double total = 0.0;
  for (std::size_t j = 0; j < n_states(); ++j) total += intensity(j, source).cap;
  return total;
}

double RegimeSet::compensator_drift(std::size_t source, double s) const {
  double total = 0.0;
  for (std::size_t j = 0; j < n_states(); ++j) {
    if (j == source) continue;
    total += gamma(j, source) * lambda(j, source, s);
  }
  return total;
}

double instantaneous_variance(const RegimeSet& m, std::size_t i, double s) {
  if (i >= m.n_states()) throw std::out_of_range("state index out of range");
  double v = m.sigma(i) * m.sigma(i);
  for (std::size_t j = 0; j < m.n_states(); ++j) {
    if (j == i) continue;
    const double g = m.gamma(j, i);
    v += g * g * m.lambda(j, i, s);
  }
  return v;
}

double sharpe_theta(const RegimeSet& m, std::size_t i, double s) {
  return (m.mu(i) - m.r(i)) / std::sqrt(instantaneous_variance(m, i, s));
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

PathSet::PathSet(std::vector<double> times, std::size_t n_paths, std::size_t n_states)
    : times_(std::move(times)), n_paths_(n_paths), n_states_(n_states) {
  const std::size_t nodes = times_.size();
  const std::size_t steps = nodes - 1;
  s_.assign(nodes * n_paths_, 0.0);
  regime_.assign(nodes * n_paths_, 0);
  dW_.assign(steps * n_paths_, 0.0);
  dNtilde_.assign(steps * n_states_ * n_paths_, 0.0);
  jumps_.assign(steps * n_states_ * n_paths_, 0);
  log_discount_.assign(nodes * n_paths_, 0.0);
}

double PathSet::discount(std::size_t k, std::size_t p) const {
  return std::exp(log_discount_[k * n_paths_ + p]);
}

MarketPath PathSet::path(std::size_t p) const {
  MarketPath out;
  out.times = times_;
  for (std::size_t k = 0; k < times_.size(); ++k) {
    out.s.push_back(s(k, p));
    out.j.push_back(regime(k, p));
    out.discount.push_back(discount(k, p));
  }
  for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
    out.dW.push_back(dW(k, p));
    std::vector<double> row(n_states_);
    for (std::size_t j = 0; j < n_states_; ++j) row[j] = dNtilde(k, j, p);
    out.dNtilde.push_back(std::move(row));
  }
  if (has_events()) out.events = events_[p];
  return out;
}

void PathSet::write_csv(std::ostream& out) const {
  out << "path_id,t,S,J\n";
  out << std::setprecision(17);
  for (std::size_t p = 0; p < n_paths_; ++p)
    for (std::size_t k = 0; k < times_.size(); ++k)
      out << p << ',' << times_[k] << ',' << s(k, p) << ',' << regime(k, p) + 1 << '\n';
}

PathSet simulate_paths(const RegimeSet& m, double s0, std::size_t j0, double horizon,
                       const SimulationOptions& options) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (options.n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (options.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
  if (!(s0 > 0.0)) throw std::invalid_argument("s0 must be positive");
  if (j0 >= m.n_states()) throw std::invalid_argument("j0 out of range");

  const std::size_t K = options.n_steps;
  const std::size_t P = options.n_paths;
  const std::size_t I = m.n_states();
  std::vector<double> times(K + 1);
  for (std::size_t k = 0; k <= K; ++k) times[k] = horizon * static_cast<double>(k) / K;
  times[K] = horizon;

  PathSet paths(times, P, I);
  if (options.record_events) paths.events_.resize(P);

  parallel_for(P, options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> lam(I), comp(I);
    std::vector<unsigned> count(I);
    for (std::size_t p = begin; p < end; ++p) {
      std::mt19937_64 rng(substream_seed(options.seed, p));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      double s = s0;
      std::size_t i = j0;
      double log_disc = 0.0;
      paths.s_[p] = s;
      paths.regime_[p] = static_cast<std::uint8_t>(i);
      paths.log_discount_[p] = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double t0 = times[k];
        double remaining = times[k + 1] - t0;
        double dw_total = 0.0;
        std::fill(comp.begin(), comp.end(), 0.0);
        std::fill(count.begin(), count.end(), 0u);
        while (remaining > 0.0) {
          const double bound = m.exit_rate_bound(i);
          double wait = remaining;
          bool candidate = false;
          if (bound > 0.0) {
            const double e = -std::log1p(-uniform(rng)) / bound;
            if (e < remaining) {
              wait = e;
              candidate = true;
            }
          }
          // intensities frozen at the start of the sub-interval (exact when constant)
          double jump_drift = 0.0;
          for (std::size_t j = 0; j < I; ++j) {
            lam[j] = (j == i) ? 0.0 : m.lambda(j, i, s);
            jump_drift += m.gamma(j, i) * lam[j];
            comp[j] += lam[j] * wait;
          }
          const double sig = m.sigma(i);
          const double dw = normal(rng) * std::sqrt(wait);
          dw_total += dw;
          s *= std::exp((m.mu(i) - jump_drift - 0.5 * sig * sig) * wait + sig * dw);
          log_disc -= m.r(i) * wait;
          remaining -= wait;
          if (!candidate) break;

          double total = 0.0;
          for (std::size_t j = 0; j < I; ++j) {
            lam[j] = (j == i) ? 0.0 : m.lambda(j, i, s);
            if (lam[j] > m.intensity(j, i).cap * (1.0 + 1e-12))
              throw IntensityBoundError("intensity cap exceeded at " + std::to_string(j + 1) +
                                        "<-" + std::to_string(i + 1) +
                                        " (s=" + std::to_string(s) + ")");
            total += lam[j];
          }
          const double u = uniform(rng) * bound;
          if (u >= total) continue;  // rejected candidate
          double acc = 0.0;
          std::size_t target = i;
          for (std::size_t j = 0; j < I; ++j) {
            acc += lam[j];
            if (u < acc) {
              target = j;
              break;
            }
          }
          if (target == i) continue;
          const double before = s;
          s *= 1.0 + m.gamma(target, i);
          ++count[target];
          if (options.record_events)
            paths.events_[p].push_back({times[k + 1] - remaining, i, target, before, s});
          i = target;
        }
        const std::size_t node = (k + 1) * P + p;
        paths.s_[node] = s;
        paths.regime_[node] = static_cast<std::uint8_t>(i);
        paths.log_discount_[node] = log_disc;
        paths.dW_[k * P + p] = dw_total;
        for (std::size_t j = 0; j < I; ++j) {
          const std::size_t idx = (k * I + j) * P + p;
          paths.dNtilde_[idx] = static_cast<double>(count[j]) - comp[j];
          paths.jumps_[idx] = static_cast<std::uint8_t>(std::min(count[j], 255u));
        }
      }
    }
  });
  return paths;
}

}  // namespace rsprice
