#include "rsprice/bsref.hpp"

#include <cmath>
#include <stdexcept>

namespace rsprice {

namespace {

void validate(const BsInputs& in) {
  if (!(in.s0 > 0.0) || !(in.strike > 0.0) || !(in.sigma > 0.0) || !(in.maturity > 0.0))
    throw std::invalid_argument("Black-Scholes inputs require s0, strike, sigma, maturity > 0");
}

double d1(const BsInputs& in) {
  const double vol = in.sigma * std::sqrt(in.maturity);
  return (std::log(in.s0 / in.strike) + (in.r + 0.5 * in.sigma * in.sigma) * in.maturity) / vol;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bs_call(const BsInputs& in) {
  validate(in);
  const double a = d1(in);
  const double b = a - in.sigma * std::sqrt(in.maturity);
  return in.s0 * normal_cdf(a) - in.strike * std::exp(-in.r * in.maturity) * normal_cdf(b);
}

double bs_put(const BsInputs& in) {
  return bs_call(in) - in.s0 + in.strike * std::exp(-in.r * in.maturity);
}

double bs_delta(const BsInputs& in) {
  validate(in);
  return normal_cdf(d1(in));
}

}  // namespace rsprice
