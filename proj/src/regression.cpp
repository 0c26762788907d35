#include "rsprice/regression.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rsprice {

double Polynomial::operator()(double s) const {
  const double x = (s - center) / scale;
  double v = 0.0;
  for (std::size_t n = coef.size(); n-- > 0;) v = v * x + coef[n];
  return v;
}

void power_basis(double x, std::size_t degree, double* out) {
  out[0] = 1.0;
  for (std::size_t n = 1; n <= degree; ++n) out[n] = out[n - 1] * x;
}

Eigen::MatrixXd least_squares(const Eigen::MatrixXd& design, const Eigen::MatrixXd& responses,
                              double ridge, const std::string& where) {
  const Eigen::Index p = design.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal() *= 1.0 + ridge;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || !(lo > 1e-13 * hi)) {
    std::ostringstream os;
    os << (where.empty() ? "" : where + ": ") << "rank-deficient regression (" << design.rows()
       << " samples, " << p << " columns, eigenvalue ratio " << (hi > 0.0 ? lo / hi : 0.0) << ")";
    throw RegressionError(os.str());
  }
  const Eigen::MatrixXd rhs = design.transpose() * responses;
  return gram.ldlt().solve(rhs);
}

Polynomial fit_polynomial(const std::vector<double>& s, const std::vector<double>& v,
                          std::size_t degree, double ridge, double scale, double center) {
  if (s.size() != v.size()) throw std::invalid_argument("fit_polynomial: size mismatch");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(degree + 1));
  std::vector<double> row(degree + 1);
  for (std::size_t n = 0; n < s.size(); ++n) {
    power_basis((s[n] - center) / scale, degree, row.data());
    for (std::size_t c = 0; c <= degree; ++c)
      x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c)) = row[c];
  }
  const Eigen::Map<const Eigen::VectorXd> y(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::MatrixXd b = least_squares(x, y, ridge);
  Polynomial out;
  out.center = center;
  out.scale = scale;
  out.coef.assign(b.data(), b.data() + b.rows());
  return out;
}

std::size_t winsorize(double* v, std::size_t n, double tail) {
  if (!(tail > 0.0) || n < 3) return 0;
  std::vector<double> sorted(v, v + n);
  const auto lo_rank = static_cast<std::size_t>(std::floor(tail * static_cast<double>(n - 1)));
  const auto hi_rank = static_cast<std::size_t>(std::ceil((1.0 - tail) * static_cast<double>(n - 1)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(lo_rank), sorted.end());
  const double lo = sorted[lo_rank];
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(hi_rank), sorted.end());
  const double hi = sorted[hi_rank];
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] < lo) {
      v[i] = lo;
      ++clipped;
    } else if (v[i] > hi) {
      v[i] = hi;
      ++clipped;
    }
  }
  return clipped;
}

}  // namespace rsprice
