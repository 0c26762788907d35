#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rsprice {

/// Raised when a model configuration violates one of the market assumptions.
/// The message names the violation, e.g. "mu < r at state 1".
class MarketError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a feedback intensity exceeds its declared cap during thinning.
class IntensityBoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transition intensity of one (source -> target) channel.
///
/// Constant intensities have slope == 0 and cap == level. Feedback intensities
/// follow lambda(s) = max(0, level + slope * s) and must stay below `cap`.
struct Intensity {
  double level = 0.0;
  double slope = 0.0;
  double cap = 0.0;
  bool feedback = false;

  static Intensity constant(double lambda) { return {lambda, 0.0, lambda, false}; }
  static Intensity affine(double a, double b, double cap) { return {a, b, cap, true}; }

  double at(double s) const {
    if (!feedback) return level;
    const double v = level + slope * s;
    return v > 0.0 ? v : 0.0;
  }
  /// Infimum of lambda(s) over s > 0.
  double lower_bound() const;
  bool identically_zero() const { return !feedback ? level == 0.0 : cap == 0.0; }
};

struct StateParams {
  double r = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

/// One row of the `transitions[]` block. States are 1-based in configs.
struct TransitionParams {
  int from = 1;
  int to = 2;
  double gamma = 0.0;
  Intensity lambda;
};

/// Raw, unvalidated model configuration.
struct MarketConfig {
  std::vector<StateParams> states;
  std::vector<TransitionParams> transitions;
  double s0 = 100.0;
  int j0 = 1;
  double horizon = 1.0;
};

MarketConfig market_config_from_json(const nlohmann::json& doc);
MarketConfig load_market_config(const std::string& path);
nlohmann::json to_json(const MarketConfig& config);

/// Two-state model used throughout the numerical examples: a calm regime
/// (r=3%, mu=7%, sigma=10%) and a stressed one (r=1%, mu=2%, sigma=25%),
/// switching at rates 2 and 5 with jumps of -10% and +5%.
MarketConfig table1_config();

/// Validated regime-switching market. States are 0-based here.
///
/// gamma(target, source) is the relative jump of S when the economy moves
/// from `source` into `target`; lambda(target, source, s) the matching
/// intensity. Self transitions carry zero jump and zero intensity.
class RegimeSet {
 public:
  static constexpr double kVarianceFloor = 1e-10;

  std::size_t n_states() const { return states_.size(); }
  double r(std::size_t i) const { return states_[i].r; }
  double mu(std::size_t i) const { return states_[i].mu; }
  double sigma(std::size_t i) const { return states_[i].sigma; }
  double gamma(std::size_t target, std::size_t source) const {
    return gamma_[target * n_states() + source];
  }
  const Intensity& intensity(std::size_t target, std::size_t source) const {
    return lambda_[target * n_states() + source];
  }
  double lambda(std::size_t target, std::size_t source, double s) const {
    return intensity(target, source).at(s);
  }
  /// Sum of the declared caps of all channels leaving `source`.
  double exit_rate_bound(std::size_t source) const;
  /// Sum_j gamma_j(i) lambda_j(i, s): the compensator of the jump part.
  double compensator_drift(std::size_t source, double s) const;
  bool has_feedback() const { return feedback_; }

  double s0() const { return s0_; }
  std::size_t j0() const { return j0_; }
  double horizon() const { return horizon_; }

  const MarketConfig& config() const { return config_; }

 private:
  friend RegimeSet build_market(const MarketConfig& config);

  std::vector<StateParams> states_;
  std::vector<double> gamma_;
  std::vector<Intensity> lambda_;
  bool feedback_ = false;
  double s0_ = 100.0;
  std::size_t j0_ = 0;
  double horizon_ = 1.0;
  MarketConfig config_;
};

/// Validates a configuration and returns the immutable market.
RegimeSet build_market(const MarketConfig& config);

/// delta^2(i, s) = sigma(i)^2 + sum_{j != i} gamma_j(i)^2 lambda_j(i, s).
double instantaneous_variance(const RegimeSet& m, std::size_t i, double s);

/// theta(i, s) = (mu(i) - r(i)) / delta(i, s).
double sharpe_theta(const RegimeSet& m, std::size_t i, double s);

struct TransitionEvent {
  double t = 0.0;
  std::size_t from = 0;
  std::size_t to = 0;
  double s_before = 0.0;
  double s_after = 0.0;
};

/// One simulated trajectory, extracted from a PathSet.
struct MarketPath {
  std::vector<double> times;
  std::vector<double> s;
  std::vector<std::size_t> j;
  std::vector<double> dW;
  /// dNtilde[k][target]
  std::vector<std::vector<double>> dNtilde;
  std::vector<double> discount;
  std::vector<TransitionEvent> events;
};

struct SimulationOptions {
  std::size_t n_steps = 50;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool record_events = false;
};

/// Simulated paths stored node-major: value(k, p) lives at k * n_paths + p.
class PathSet {
 public:
  PathSet() = default;
  PathSet(std::vector<double> times, std::size_t n_paths, std::size_t n_states);

  std::size_t n_paths() const { return n_paths_; }
  std::size_t n_steps() const { return times_.size() - 1; }
  std::size_t n_states() const { return n_states_; }
  const std::vector<double>& times() const { return times_; }
  double step(std::size_t k) const { return times_[k + 1] - times_[k]; }

  double s(std::size_t k, std::size_t p) const { return s_[k * n_paths_ + p]; }
  std::size_t regime(std::size_t k, std::size_t p) const { return regime_[k * n_paths_ + p]; }
  double dW(std::size_t k, std::size_t p) const { return dW_[k * n_paths_ + p]; }
  double dNtilde(std::size_t k, std::size_t target, std::size_t p) const {
    return dNtilde_[(k * n_states_ + target) * n_paths_ + p];
  }
  /// Number of transitions into `target` during step k.
  unsigned jumps(std::size_t k, std::size_t target, std::size_t p) const {
    return jumps_[(k * n_states_ + target) * n_paths_ + p];
  }
  /// exp(-int_0^{t_k} r ds)
  double discount(std::size_t k, std::size_t p) const;
  double log_discount(std::size_t k, std::size_t p) const { return log_discount_[k * n_paths_ + p]; }
  const std::vector<TransitionEvent>& events(std::size_t p) const { return events_.at(p); }
  bool has_events() const { return !events_.empty(); }

  MarketPath path(std::size_t p) const;

  /// One row per node: path_id,t,S,J (J is 1-based).
  void write_csv(std::ostream& out) const;

 private:
  friend PathSet simulate_paths(const RegimeSet&, double, std::size_t, double,
                                const SimulationOptions&);
  std::vector<double> times_;
  std::size_t n_paths_ = 0;
  std::size_t n_states_ = 0;
  std::vector<double> s_;
  std::vector<std::uint8_t> regime_;
  std::vector<double> dW_;
  std::vector<double> dNtilde_;
  std::vector<std::uint8_t> jumps_;
  std::vector<double> log_discount_;
  std::vector<std::vector<TransitionEvent>> events_;
};

/// Simulates joint (S, J) paths under the physical measure on a uniform grid.
///
/// Between transitions S is log-normal with drift mu(i) - sum_j gamma_j(i)
/// lambda_j(i, s); transitions are drawn by thinning against the channel caps
/// (exact exponential clocks when intensities are constant). Path p draws
/// from its own substream, so results do not depend on `threads`.
PathSet simulate_paths(const RegimeSet& m, double s0, std::size_t j0, double horizon,
                       const SimulationOptions& options);

/// Independent engine for substream `stream` of `seed`.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace rsprice
