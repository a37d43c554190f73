#include "metaswitch/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "metaswitch/parallel.hpp"

namespace metaswitch {

namespace {

std::vector<Eigen::Index> descending_real_order(const Eigen::VectorXcd& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (values(a).real() != values(b).real()) return values(a).real() > values(b).real();
    return values(a).imag() > values(b).imag();
  });
  return order;
}

double min_eigenvalue(const Operator& hermitian) {
  const Eigen::SelfAdjointEigenSolver<Operator> solver(hermitian, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

Operator hermitize(const Operator& a) { return 0.5 * (a + a.adjoint()); }

}  // namespace

Operator SpectrumResult::eigenmatrix(Eigen::Index l) const {
  return unvectorize(right_vectors.col(l), dim());
}

SpectrumResult full_spectrum(const ModelParams& params, const SpectrumOptions& options) {
  const Superoperator sup = build_superoperator(params, 0.0, options.max_atoms);
  const GeneralEigen eig = general_eigen(sup.matrix, true);
  const auto order = descending_real_order(eig.values);

  SpectrumResult out;
  out.params = params;
  const Eigen::Index n = eig.values.size();
  out.eigenvalues.resize(n);
  out.right_vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = eig.values(order[static_cast<std::size_t>(k)]);
    out.right_vectors.col(k) = eig.vectors.col(order[static_cast<std::size_t>(k)]);
  }

  if (std::abs(out.eigenvalues(0)) > 1e-9) {
    std::ostringstream msg;
    msg << "leading eigenvalue " << out.eigenvalues(0) << " is not zero";
    throw SpectralError(msg.str());
  }
  if (n > 1 && std::abs(out.eigenvalues(1)) < 1e-12) {
    throw SpectralError("degenerate zero eigenvalue: stationary state is not unique");
  }

  const int d = params.dim();
  Operator rho0 = unvectorize(out.right_vectors.col(0), d);
  const cplx tr = rho0.trace();
  if (std::abs(tr) < 1e-14) {
    throw SpectralError("stationary eigenmatrix has vanishing trace");
  }
  out.rho_ss = hermitize(rho0 / tr);
  out.right_vectors.col(0) = vectorize(out.rho_ss);
  if (min_eigenvalue(out.rho_ss) < -1e-10) {
    throw SpectralError("stationary state is not positive semidefinite");
  }

  if (options.check_residuals) {
    const Operator h = build_h_eff(params);
    const Operator l = build_jump_op(params);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Operator rho = out.eigenmatrix(k);
      const double res = (apply_lindblad(rho, h, l) - out.eigenvalues(k) * rho).cwiseAbs().maxCoeff();
      out.max_residual = std::max(out.max_residual, res);
    }
  }
  return out;
}

Eigen::VectorXcd sorted_eigenvalues(const ModelParams& params, double s) {
  const Eigen::VectorXcd values = eigenvalues(build_superoperator(params, s).matrix);
  const auto order = descending_real_order(values);
  Eigen::VectorXcd out(values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k) out(k) = values(order[static_cast<std::size_t>(k)]);
  return out;
}

GapScaling fit_gap_scaling(const std::vector<int>& sizes, const std::vector<double>& gaps) {
  if (sizes.size() != gaps.size()) {
    throw std::invalid_argument("fit_gap_scaling: sizes and gaps differ in length");
  }
  GapScaling out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (gaps[i] > 0.0 && std::isfinite(gaps[i])) {
      out.sizes.push_back(sizes[i]);
      out.gaps.push_back(gaps[i]);
    } else {
      out.excluded.push_back(sizes[i]);
    }
  }
  if (out.sizes.size() < 4) {
    throw std::invalid_argument("gap scaling needs at least four sizes with a positive gap");
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(out.sizes.size()));
  Eigen::VectorXd y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x(i) = out.sizes[static_cast<std::size_t>(i)];
    y(i) = out.gaps[static_cast<std::size_t>(i)];
  }
  out.fit = fit_exponential(x, y);
  return out;
}

GapScaling gap_scaling(const ModelParams& params_template, const std::vector<int>& sizes,
                       int jobs) {
  std::vector<double> gaps(sizes.size());
  parallel_for(sizes.size(), jobs, [&](std::size_t i) {
    ModelParams p = params_template;
    p.n_atoms = sizes[i];
    gaps[i] = -sorted_eigenvalues(p)(1).real();
  });
  return fit_gap_scaling(sizes, gaps);
}

double excitation_density(const Operator& rho) {
  const Eigen::Index d = rho.rows();
  const double n = static_cast<double>(d - 1);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) acc += rho(i, i).real() * static_cast<double>(i) / n;
  return acc;
}

double normalized_overlap(const Operator& a, const Operator& b) {
  // <A^dag, B> = Tr[A^dag B]
  const cplx num = (a.adjoint() * b).trace();
  const cplx den = (a.adjoint() * a).trace();
  return num.real() / den.real();
}

MetastableManifold extract_mm(const SpectrumResult& spectrum) {
  if (spectrum.eigenvalues.size() < 2) {
    throw SpectralError("extract_mm needs at least two eigenvalues");
  }
  const cplx lambda1 = spectrum.eigenvalues(1);
  const double tol = kRealGapRelTol * std::abs(lambda1.real()) + 1e-10;
  if (std::abs(lambda1.imag()) > tol) {
    std::ostringstream msg;
    msg << "lambda_1 = " << lambda1 << " is complex; no real metastable manifold";
    throw ComplexGapError(lambda1.imag(), msg.str());
  }

  // rho_1 = e^{i phi} R with R Hermitian, so Tr[rho_1 rho_1] = e^{2 i phi} Tr[R^2].
  Operator rho1 = spectrum.eigenmatrix(1);
  const cplx self = (rho1 * rho1).trace();
  const double phi = 0.5 * std::arg(self);
  rho1 *= std::polar(1.0, -phi);
  Operator herm = hermitize(rho1);
  herm /= herm.norm();

  const Eigen::SelfAdjointEigenSolver<Operator> solver(herm);
  const Eigen::VectorXd& alpha = solver.eigenvalues();
  const Operator& vecs = solver.eigenvectors();
  const Eigen::Index d = herm.rows();
  Operator pos = Operator::Zero(d, d);
  Operator neg = Operator::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Operator proj = vecs.col(i) * vecs.col(i).adjoint();
    if (alpha(i) > 0.0) {
      pos += alpha(i) * proj;
    } else if (alpha(i) < 0.0) {
      neg += (-alpha(i)) * proj;
    }
  }
  double w_pos = pos.trace().real();
  double w_neg = neg.trace().real();
  const double scale = alpha.cwiseAbs().maxCoeff();
  if (w_pos <= 1e-12 * scale || w_neg <= 1e-12 * scale) {
    throw SpectralError("rho_1 is (semi)definite; cannot split into two metastable states");
  }
  Operator rho_a = pos / w_pos;
  Operator rho_b = neg / w_neg;
  double ne_a = excitation_density(rho_a);
  double ne_b = excitation_density(rho_b);
  // Label the lower-excitation state as the dark rho_+.
  if (ne_a > ne_b) {
    std::swap(rho_a, rho_b);
    std::swap(ne_a, ne_b);
    std::swap(w_pos, w_neg);
    herm = -herm;
  }

  MetastableManifold mm;
  mm.rho_plus = rho_a;
  mm.rho_minus = rho_b;
  mm.rho1_hermitian = herm;
  mm.weight_plus = w_pos;
  mm.weight_minus = w_neg;
  mm.ne_plus = ne_a;
  mm.ne_minus = ne_b;
  mm.lambda1 = lambda1.real();
  const Operator& ss = spectrum.rho_ss;
  mm.d_plus = normalized_overlap(mm.rho_plus, ss);
  mm.d_minus = normalized_overlap(mm.rho_minus, ss);
  const Operator err = ss - mm.d_plus * mm.rho_plus - mm.d_minus * mm.rho_minus;
  mm.mm_error = (err.adjoint() * err).trace().real();
  return mm;
}

OccupationStats occupation_stats(const MetastableManifold& mm, const SpectrumResult& spectrum) {
  const double spread = mm.ne_plus - mm.ne_minus;
  if (std::abs(spread) < 1e-12) {
    throw SpectralError("degenerate metastable manifold: n_e+ == n_e-");
  }
  OccupationStats st;
  st.ne_ss = excitation_density(spectrum.rho_ss);
  st.r = mm.d_plus / mm.d_minus;
  const double p_dark = (st.ne_ss - mm.ne_minus) / spread;
  st.clipped = p_dark < 0.0 || p_dark > 1.0;
  st.p_dark = std::clamp(p_dark, 0.0, 1.0);
  st.p_bright = 1.0 - st.p_dark;
  st.closure_residual =
      std::abs(st.ne_ss - (mm.d_plus * mm.ne_plus + mm.d_minus * mm.ne_minus));
  return st;
}

double BinnedPDF::mass() const {
  double acc = 0.0;
  for (double d : densities) acc += d * 2.0 * half_width;
  return acc;
}

BinnedPDF bin_weighted(const std::vector<double>& values, const std::vector<double>& weights,
                       double half_width) {
  if (!(half_width > 0.0)) {
    throw std::invalid_argument("bin half-width must be positive");
  }
  if (values.size() != weights.size()) {
    throw std::invalid_argument("bin_weighted: values and weights differ in length");
  }
  const double width = 2.0 * half_width;
  const auto n_bins = static_cast<std::size_t>(std::ceil(1.0 / width - 1e-12));
  BinnedPDF pdf;
  pdf.half_width = half_width;
  pdf.centers.resize(n_bins);
  pdf.densities.assign(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) pdf.centers[b] = (static_cast<double>(b) + 0.5) * width;
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = std::clamp(values[i], 0.0, 1.0);
    auto b = static_cast<std::size_t>(x / width);
    b = std::min(b, n_bins - 1);
    pdf.densities[b] += weights[i];
    total += weights[i];
  }
  if (total > 0.0) {
    for (double& d : pdf.densities) d /= total * width;
  }
  return pdf;
}

BinnedPDF pdf_from_density_matrix(const Operator& rho, double half_width) {
  if (!(half_width > 0.0)) {
    throw std::invalid_argument("bin half-width must be positive");
  }
  const Eigen::SelfAdjointEigenSolver<Operator> solver(hermitize(rho));
  const Eigen::VectorXd& probs = solver.eigenvalues();
  if (probs.minCoeff() < -1e-8) {
    throw std::invalid_argument("pdf_from_density_matrix: rho has a negative eigenvalue " +
                                std::to_string(probs.minCoeff()));
  }
  const Eigen::Index d = rho.rows();
  const double n = static_cast<double>(d - 1);
  std::vector<double> values;
  std::vector<double> weights;
  for (Eigen::Index l = 0; l < d; ++l) {
    double x = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) x += std::norm(solver.eigenvectors()(i, l)) * i / n;
    values.push_back(x);
    weights.push_back(std::max(0.0, probs(l)));
  }
  return bin_weighted(values, weights, half_width);
}

Operator SlowRelaxation::at(double t) const {
  return rho_ss + (amplitude * std::exp(lambda1 * t)) * direction;
}

double SlowRelaxation::excitation_at(double t) const {
  return ne_ss + amplitude * std::exp(lambda1 * t) * ne_direction;
}

SlowRelaxation slow_relaxation(const Operator& rho0, const SpectrumResult& spectrum,
                               const MetastableManifold& mm) {
  if (!(mm.lambda1 < 0.0)) {
    throw SpectralError("slow_relaxation requires a real negative lambda_1");
  }
  // Left eigenvector of lambda_1 = row 1 of V^{-1}: solve V^T y = e_1.
  const Eigen::Index n = spectrum.right_vectors.rows();
  Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(n);
  e1(1) = 1.0;
  const Eigen::VectorXcd left = spectrum.right_vectors.transpose().partialPivLu().solve(e1);
  const cplx coeff = (left.array() * vectorize(rho0).array()).sum();
  // Express the raw rho_1 column through the Hermitized one: rho_1 = kappa * rho1_hermitian.
  const CVector raw = spectrum.right_vectors.col(1);
  const CVector herm = vectorize(mm.rho1_hermitian);
  const cplx kappa = herm.dot(raw) / herm.squaredNorm();
  SlowRelaxation out;
  out.lambda1 = mm.lambda1;
  out.rho_ss = spectrum.rho_ss;
  out.direction = mm.rho_plus - mm.rho_minus;
  // rho1_hermitian = w (rho+ - rho-) with w = weight_plus = weight_minus (traceless).
  const double w = 0.5 * (mm.weight_plus + mm.weight_minus);
  out.amplitude = (coeff * kappa).real() * w;
  out.ne_ss = excitation_density(spectrum.rho_ss);
  out.ne_direction = mm.ne_plus - mm.ne_minus;
  return out;
}

}  // namespace metaswitch
