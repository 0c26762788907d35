#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rsprice {

/// Raised when the (regularised) normal equations are numerically singular.
class RegressionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Polynomial in x = (s - center) / scale with coefficients for 1, x, x^2, ...
struct Polynomial {
  double center = 0.0;
  double scale = 1.0;
  std::vector<double> coef;

  double operator()(double s) const;
  std::size_t degree() const { return coef.empty() ? 0 : coef.size() - 1; }
};

/// Writes 1, x, ..., x^degree into out[0..degree].
void power_basis(double x, std::size_t degree, double* out);

/// Ridge least squares for every column of `responses`, with the penalty
/// relative to each column's own scale: X'X + ridge diag(X'X). Throws
/// RegressionError, prefixed by `where`, when the smallest eigenvalue of the
/// regularised normal matrix is below 1e-13 of the largest.
Eigen::MatrixXd least_squares(const Eigen::MatrixXd& design, const Eigen::MatrixXd& responses,
                              double ridge, const std::string& where = "");

/// Fits v on {1, x, ..., x^degree}, x = (s - center) / scale.
Polynomial fit_polynomial(const std::vector<double>& s, const std::vector<double>& v,
                          std::size_t degree, double ridge, double scale = 1.0,
                          double center = 0.0);

/// Clips v to its [tail, 1 - tail] empirical quantiles. Returns the number of
/// clipped entries. No-op for tail <= 0 or fewer than 3 values.
std::size_t winsorize(double* v, std::size_t n, double tail);
inline std::size_t winsorize(std::vector<double>& v, double tail) {
  return winsorize(v.data(), v.size(), tail);
}

}  // namespace rsprice
