#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace rsprice {

/// Terminal pay-off F(S(T), J(T)).
struct Claim {
  enum class Kind { call, put, digital, stock, constant, tabulated };

  Kind kind = Kind::call;
  double strike = 100.0;  ///< strike for call/put/digital, amount for constant
  /// tabulated: piecewise-linear F(s) through (knots[n], values[n]), flat outside
  std::vector<double> knots;
  std::vector<double> values;

  static Claim call(double strike) { return {Kind::call, strike, {}, {}}; }
  static Claim put(double strike) { return {Kind::put, strike, {}, {}}; }
  static Claim digital(double strike) { return {Kind::digital, strike, {}, {}}; }
  static Claim stock() { return {Kind::stock, 0.0, {}, {}}; }
  static Claim constant(double amount) { return {Kind::constant, amount, {}, {}}; }
  static Claim tabulated(std::vector<double> knots, std::vector<double> values);

  /// Parses "call:100", "put:90", "digital:110", "stock", "constant:5".
  static Claim parse(const std::string& text);

  double payoff(double s, std::size_t regime = 0) const;
  /// Largest |dF/ds|; infinity for discontinuous pay-offs.
  double lipschitz() const;
  /// Characteristic price level used to size grids (strike, or s0 when none).
  double scale(double fallback) const;
  std::string label() const;
};

}  // namespace rsprice
