#include "metaswitch/linalg.hpp"

#include <cmath>
#include <complex>
#include <string>

#include <lapacke.h>

namespace metaswitch {

namespace {

GeneralEigen run_zgeev(const Eigen::MatrixXcd& a, bool want_vectors) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("general_eigen: matrix is not square");
  }
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::MatrixXcd work = a;  // zgeev overwrites its input
  GeneralEigen out;
  out.values.resize(n);
  if (want_vectors) {
    out.vectors.resize(n, n);
  }
  auto* data = reinterpret_cast<lapack_complex_double*>(work.data());
  auto* w = reinterpret_cast<lapack_complex_double*>(out.values.data());
  auto* vr = want_vectors ? reinterpret_cast<lapack_complex_double*>(out.vectors.data()) : nullptr;
  const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', want_vectors ? 'V' : 'N', n, data,
                                        n, w, nullptr, 1, vr, want_vectors ? n : 1);
  if (info != 0) {
    throw EigensolverError("zgeev failed with info = " + std::to_string(info));
  }
  return out;
}

}  // namespace

GeneralEigen general_eigen(const Eigen::MatrixXcd& a, bool want_vectors) {
  return run_zgeev(a, want_vectors);
}

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXcd& a) { return run_zgeev(a, false).values; }

LinearFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.size();
  if (n != y.size() || n < 2) {
    throw std::invalid_argument("fit_line needs at least two (x, y) pairs of equal length");
  }
  const double mx = x.mean();
  const double my = y.mean();
  const double sxx = (x.array() - mx).square().sum();
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  const double syy = (y.array() - my).square().sum();
  if (sxx <= 0.0) {
    throw std::invalid_argument("fit_line: all x values coincide");
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double sse = (y.array() - fit.intercept - fit.slope * x.array()).square().sum();
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.slope_stderr = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
  return fit;
}

ExpFit fit_exponential(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if ((y.array() <= 0.0).any()) {
    throw std::invalid_argument("fit_exponential requires positive y");
  }
  const LinearFit lin = fit_line(x, y.array().log().matrix());
  ExpFit fit;
  fit.rate = lin.slope;
  fit.prefactor = std::exp(lin.intercept);
  fit.r2 = lin.r2;
  fit.rate_stderr = lin.slope_stderr;
  return fit;
}

}  // namespace metaswitch
