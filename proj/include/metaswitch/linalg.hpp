#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace metaswitch {

/// Eigensolver failure reported by LAPACK (info != 0).
class EigensolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeneralEigen {
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;  // right eigenvectors, unit 2-norm columns; empty if not requested
};

/// Dense non-Hermitian eigendecomposition (LAPACK zgeev). Order is whatever LAPACK returns.
GeneralEigen general_eigen(const Eigen::MatrixXcd& a, bool want_vectors = true);

/// Eigenvalues only; cheaper than general_eigen(a, true).
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXcd& a);

/// Least squares fit y = intercept + slope x with coefficient of determination.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
};

LinearFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Fit y = b exp(a x) by least squares on log y. Requires y > 0.
struct ExpFit {
  double rate = 0.0;    // a
  double prefactor = 0.0;  // b
  double r2 = 0.0;
  double rate_stderr = 0.0;
};

ExpFit fit_exponential(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace metaswitch
