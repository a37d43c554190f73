#pragma once

#include <complex>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace metaswitch {

using cplx = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Largest atom number for which dense superoperators are built (side (N+1)^2 = 3721).
inline constexpr int kMaxAtoms = 60;

/// Physical parameters of one driven-dissipative ensemble. Rates are in units of the decay rate.
struct ModelParams {
  int n_atoms = 1;
  double rabi = 1.5;
  double detuning = 0.0;
  double interaction = 10.0;
  double decay = 1.0;

  /// Throws std::invalid_argument on n_atoms < 1 or decay <= 0.
  void validate() const;
  double spin() const { return 0.5 * n_atoms; }
  int dim() const { return n_atoms + 1; }
};

/// Permutation-symmetric sector |M>, M = -S..S, stored at index i = M + S.
class DickeBasis {
 public:
  explicit DickeBasis(int n_atoms);

  int n_atoms() const { return n_atoms_; }
  int dim() const { return n_atoms_ + 1; }
  double spin() const { return 0.5 * n_atoms_; }
  double magnetization(int index) const { return index - spin(); }
  int index(double magnetization) const;

 private:
  int n_atoms_;
};

struct CollectiveOps {
  Operator sx, sy, sz, splus, sminus;
};

CollectiveOps build_collective_ops(const DickeBasis& basis);

/// H_eff = Omega Sx - (V/2N) S+S- + ((V - i gamma)/2 - Delta) Sz - i gamma S/2.
Operator build_h_eff(const ModelParams& params);

/// L = sqrt(gamma) sum_M sqrt(M+S) |M-1><M|; note this omits the sqrt(S-M+1) factor of S-.
Operator build_jump_op(const ModelParams& params);

/// n_e operator Sz/N + 1/2 (diagonal, entries i/N).
Operator excitation_operator(const DickeBasis& basis);

/// Tilted generator acting on column-stacked density matrices:
///   vec(A X B) = (B^T kron A) vec(X), so
///   L_s = -i (I kron H - conj(H) kron I) + e^{-s} conj(L) kron L.
struct Superoperator {
  Eigen::MatrixXcd matrix;
  double tilt = 0.0;
  int dim = 0;  // Hilbert-space dimension N+1
};

Superoperator build_superoperator(const ModelParams& params, double s = 0.0,
                                  int max_atoms = kMaxAtoms);

/// The no-jump generator -i(I kron H - conj(H) kron I), the s -> infinity limit.
Eigen::MatrixXcd no_jump_generator(const ModelParams& params);

/// L_0[rho] evaluated directly on the matrix.
Operator apply_lindblad(const Operator& rho, const ModelParams& params);

/// Same with prebuilt H_eff and jump operator, for repeated application.
Operator apply_lindblad(const Operator& rho, const Operator& h_eff, const Operator& jump);

CVector vectorize(const Operator& rho);
Operator unvectorize(const CVector& v, int dim);

/// Column-stacked identity, so that trace_functional().dot(vec(rho)) == Tr rho.
Eigen::RowVectorXcd trace_functional(int dim);

}  // namespace metaswitch
