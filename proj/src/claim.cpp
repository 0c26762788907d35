#include "rsprice/claim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rsprice {

Claim Claim::tabulated(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() < 2 || knots.size() != values.size())
    throw std::invalid_argument("tabulated claim needs >= 2 matching knots and values");
  if (!std::is_sorted(knots.begin(), knots.end()) ||
      std::adjacent_find(knots.begin(), knots.end()) != knots.end())
    throw std::invalid_argument("tabulated claim knots must be strictly increasing");
  return {Kind::tabulated, 0.0, std::move(knots), std::move(values)};
}

Claim Claim::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "stock") return stock();
  if (colon == std::string::npos) throw std::invalid_argument("claim '" + text + "' needs ':<value>'");
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw std::invalid_argument("claim '" + text + "' has an invalid number");
  }
  if (kind == "call") return call(value);
  if (kind == "put") return put(value);
  if (kind == "digital") return digital(value);
  if (kind == "constant") return constant(value);
  throw std::invalid_argument("unknown claim kind '" + kind + "'");
}

double Claim::payoff(double s, std::size_t) const {
  switch (kind) {
    case Kind::call: return s > strike ? s - strike : 0.0;
    case Kind::put: return s < strike ? strike - s : 0.0;
    case Kind::digital: return s > strike ? 1.0 : 0.0;
    case Kind::stock: return s;
    case Kind::constant: return strike;
    case Kind::tabulated: {
      if (s <= knots.front()) return values.front();
      if (s >= knots.back()) return values.back();
      const auto it = std::upper_bound(knots.begin(), knots.end(), s);
      const std::size_t hi = static_cast<std::size_t>(it - knots.begin());
      const double w = (s - knots[hi - 1]) / (knots[hi] - knots[hi - 1]);
      return values[hi - 1] + w * (values[hi] - values[hi - 1]);
    }
  }
  return 0.0;
}

double Claim::lipschitz() const {
  switch (kind) {
    case Kind::call:
    case Kind::put:
    case Kind::stock: return 1.0;
    case Kind::constant: return 0.0;
    case Kind::digital: return std::numeric_limits<double>::infinity();
    case Kind::tabulated: {
      double m = 0.0;
      for (std::size_t n = 1; n < knots.size(); ++n)
        m = std::max(m, std::abs(values[n] - values[n - 1]) / (knots[n] - knots[n - 1]));
      return m;
    }
  }
  return 0.0;
}

double Claim::scale(double fallback) const {
  switch (kind) {
    case Kind::call:
    case Kind::put:
    case Kind::digital: return strike;
    case Kind::tabulated: return 0.5 * (knots.front() + knots.back());
    default: return fallback;
  }
}

std::string Claim::label() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::call: os << "call:" << strike; break;
    case Kind::put: os << "put:" << strike; break;
    case Kind::digital: os << "digital:" << strike; break;
    case Kind::stock: os << "stock"; break;
    case Kind::constant: os << "constant:" << strike; break;
    case Kind::tabulated: os << "tabulated[" << knots.size() << "]"; break;
  }
  return os.str();
}

}  // namespace rsprice
