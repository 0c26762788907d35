#pragma once

namespace rsprice {

/// Inputs of the single-regime Black-Scholes reference model.
struct BsInputs {
  double s0 = 100.0;
  double strike = 100.0;
  double r = 0.0;
  double sigma = 0.2;
  double maturity = 1.0;
};

/// Standard normal CDF, 0.5 erfc(-x / sqrt 2); relative error near machine epsilon.
double normal_cdf(double x);

double bs_call(const BsInputs& in);
/// Put via put-call parity.
double bs_put(const BsInputs& in);
/// N(d1)
double bs_delta(const BsInputs& in);

}  // namespace rsprice
