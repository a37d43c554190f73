#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaswitch/linalg.hpp"
#include "metaswitch/model.hpp"

namespace metaswitch {

/// lambda_1 has a non-negligible imaginary part, so no real metastable manifold exists.
class ComplexGapError : public std::runtime_error {
 public:
  ComplexGapError(double imag_part, const std::string& what)
      : std::runtime_error(what), imag_part_(imag_part) {}
  double imag_part() const { return imag_part_; }

 private:
  double imag_part_;
};

/// Structural failure of the spectral pipeline (degenerate stationary state, degenerate rho_1).
class SpectralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full Liouvillian eigendecomposition sorted by descending real part.
struct SpectrumResult {
  ModelParams params;
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd right_vectors;  // column l = vec(rho_l), unit 2-norm for l >= 1
  Operator rho_ss;                 // Hermitian, unit trace
  double max_residual = 0.0;       // max_l ||L[rho_l] - lambda_l rho_l||_max

  int dim() const { return params.dim(); }
  Operator eigenmatrix(Eigen::Index l) const;
  double gap() const { return -eigenvalues(1).real(); }
};

struct SpectrumOptions {
  bool check_residuals = true;
  int max_atoms = kMaxAtoms;
};

SpectrumResult full_spectrum(const ModelParams& params, const SpectrumOptions& options = {});

/// Leading eigenvalues only (no eigenmatrices); sorted by descending real part.
Eigen::VectorXcd sorted_eigenvalues(const ModelParams& params, double s = 0.0);

struct GapScaling {
  std::vector<int> sizes;        // sizes used in the fit
  std::vector<double> gaps;      // -Re lambda_1 per used size
  std::vector<int> excluded;     // sizes dropped for nonpositive gap
  ExpFit fit;                    // gap ~ prefactor * exp(rate * N)
};

/// Gap -Re lambda_1 for each N in sizes (params.n_atoms ignored) and the log-linear fit.
GapScaling gap_scaling(const ModelParams& params_template, const std::vector<int>& sizes,
                       int jobs = 1);

/// Same fit from precomputed gaps.
GapScaling fit_gap_scaling(const std::vector<int>& sizes, const std::vector<double>& gaps);

struct MetastableManifold {
  Operator rho_plus;   // dark (lower excitation)
  Operator rho_minus;  // bright
  Operator rho1_hermitian;  // Hermitized rho_1 with unit Frobenius norm
  double weight_plus = 0.0;   // rho1_hermitian = weight_plus rho_plus - weight_minus rho_minus
  double weight_minus = 0.0;
  double ne_plus = 0.0;
  double ne_minus = 0.0;
  double d_plus = 0.0;
  double d_minus = 0.0;
  double mm_error = 0.0;
  double lambda1 = 0.0;
};

/// Relative tolerance on Im(lambda_1) for treating lambda_1 as real.
inline constexpr double kRealGapRelTol = 1e-7;

MetastableManifold extract_mm(const SpectrumResult& spectrum);

/// Tr[(Sz/N + 1/2) rho].
double excitation_density(const Operator& rho);

/// Hilbert-Schmidt overlap D[A, B] = <A^dag, B> / <A^dag, A> with <A, B> = Tr[A B].
double normalized_overlap(const Operator& a, const Operator& b);

struct OccupationStats {
  double r = 0.0;        // D[rho+, rho_ss] / D[rho-, rho_ss]
  double p_dark = 0.0;   // (ne_ss - ne-) / (ne+ - ne-), clipped to [0, 1]
  double p_bright = 0.0;
  double ne_ss = 0.0;
  bool clipped = false;
  double closure_residual = 0.0;  // |ne_ss - (D+ ne+ + D- ne-)|
};

OccupationStats occupation_stats(const MetastableManifold& mm, const SpectrumResult& spectrum);

/// Histogram on [0, 1] with bin width 2c; densities integrate to one.
struct BinnedPDF {
  std::vector<double> centers;
  std::vector<double> densities;
  double half_width = 0.01;

  double mass() const;
};

/// Weighted histogram of values in [0, 1]; weights need not be normalized.
BinnedPDF bin_weighted(const std::vector<double>& values, const std::vector<double>& weights,
                       double half_width);

/// PDF of n_e over the eigenstates of rho, each weighted by its eigenvalue.
BinnedPDF pdf_from_density_matrix(const Operator& rho, double half_width = 0.01);

/// rho(t) = rho_ss + A (rho+ - rho-) exp(lambda_1 t).
struct SlowRelaxation {
  double amplitude = 0.0;
  double lambda1 = 0.0;
  Operator rho_ss;
  Operator direction;  // rho+ - rho-
  double ne_ss = 0.0;
  double ne_direction = 0.0;

  Operator at(double t) const;
  double excitation_at(double t) const;
};

SlowRelaxation slow_relaxation(const Operator& rho0, const SpectrumResult& spectrum,
                               const MetastableManifold& mm);

}  // namespace metaswitch
