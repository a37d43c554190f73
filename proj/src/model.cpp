#include "metaswitch/model.hpp"

#include <cmath>
#include <sstream>

namespace metaswitch {

void ModelParams::validate() const {
  if (n_atoms < 1) {
    throw std::invalid_argument("n_atoms must be >= 1, got " + std::to_string(n_atoms));
  }
  if (!(decay > 0.0)) {
    throw std::invalid_argument("decay must be positive");
  }
  if (!std::isfinite(rabi) || !std::isfinite(detuning) || !std::isfinite(interaction)) {
    throw std::invalid_argument("model parameters must be finite");
  }
}

DickeBasis::DickeBasis(int n_atoms) : n_atoms_(n_atoms) {
  if (n_atoms < 1) {
    throw std::invalid_argument("DickeBasis requires n_atoms >= 1");
  }
}

int DickeBasis::index(double magnetization) const {
  const double shifted = magnetization + spin();
  const long i = std::lround(shifted);
  if (std::abs(shifted - static_cast<double>(i)) > 1e-9 || i < 0 || i > n_atoms_) {
    std::ostringstream msg;
    msg << "magnetization " << magnetization << " not in the spin-" << spin() << " ladder";
    throw std::out_of_range(msg.str());
  }
  return static_cast<int>(i);
}

CollectiveOps build_collective_ops(const DickeBasis& basis) {
  const int d = basis.dim();
  const double s = basis.spin();
  CollectiveOps ops;
  ops.splus = Operator::Zero(d, d);
  ops.sz = Operator::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const double m = basis.magnetization(i);
    ops.sz(i, i) = m;
    if (i + 1 < d) {
      // S+|M> = sqrt((S-M)(S+M+1)) |M+1>
      ops.splus(i + 1, i) = std::sqrt((s - m) * (s + m + 1.0));
    }
  }
  ops.sminus = ops.splus.adjoint();
  ops.sx = 0.5 * (ops.splus + ops.sminus);
  ops.sy = (ops.splus - ops.sminus) / cplx(0.0, 2.0);
  return ops;
}

Operator build_h_eff(const ModelParams& params) {
  params.validate();
  const DickeBasis basis(params.n_atoms);
  const CollectiveOps ops = build_collective_ops(basis);
  const double n = params.n_atoms;
  const double gamma = params.decay;
  const cplx zcoef = cplx(0.5 * params.interaction, -0.5 * gamma) - params.detuning;

  Operator h = params.rabi * ops.sx;
  h -= (params.interaction / (2.0 * n)) * (ops.splus * ops.sminus);
  h += zcoef * ops.sz;
  h.diagonal().array() += cplx(0.0, -0.5 * gamma * basis.spin());
  return h;
}

Operator build_jump_op(const ModelParams& params) {
  params.validate();
  const DickeBasis basis(params.n_atoms);
  const int d = basis.dim();
  const double root_gamma = std::sqrt(params.decay);
  Operator l = Operator::Zero(d, d);
  for (int i = 1; i < d; ++i) {
    l(i - 1, i) = root_gamma * std::sqrt(basis.magnetization(i) + basis.spin());
  }
  return l;
}

Operator excitation_operator(const DickeBasis& basis) {
  Operator ne = Operator::Zero(basis.dim(), basis.dim());
  for (int i = 0; i < basis.dim(); ++i) {
    ne(i, i) = static_cast<double>(i) / basis.n_atoms();
  }
  return ne;
}

namespace {

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const Eigen::Index ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  Eigen::MatrixXcd out(ar * br, ac * bc);
  for (Eigen::Index j = 0; j < ac; ++j) {
    for (Eigen::Index i = 0; i < ar; ++i) {
      out.block(i * br, j * bc, br, bc) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXcd no_jump_generator(const ModelParams& params) {
  const Operator h = build_h_eff(params);
  const Operator id = Operator::Identity(h.rows(), h.cols());
  return cplx(0.0, -1.0) * (kron(id, h) - kron(h.conjugate(), id));
}

Superoperator build_superoperator(const ModelParams& params, double s, int max_atoms) {
  params.validate();
  if (params.n_atoms > max_atoms) {
    throw std::length_error("n_atoms " + std::to_string(params.n_atoms) +
                            " exceeds superoperator cap " + std::to_string(max_atoms));
  }
  const Operator l = build_jump_op(params);
  Superoperator sup;
  sup.tilt = s;
  sup.dim = params.dim();
  sup.matrix = no_jump_generator(params);
  sup.matrix += std::exp(-s) * kron(l.conjugate(), l);
  return sup;
}

Operator apply_lindblad(const Operator& rho, const ModelParams& params) {
  if (rho.rows() != params.dim() || rho.cols() != params.dim()) {
    throw std::invalid_argument("apply_lindblad: rho is " + std::to_string(rho.rows()) + "x" +
                                std::to_string(rho.cols()) + ", expected side " +
                                std::to_string(params.dim()));
  }
  return apply_lindblad(rho, build_h_eff(params), build_jump_op(params));
}

Operator apply_lindblad(const Operator& rho, const Operator& h_eff, const Operator& jump) {
  const cplx minus_i(0.0, -1.0);
  Operator out = minus_i * (h_eff * rho - rho * h_eff.adjoint());
  out.noalias() += jump * rho * jump.adjoint();
  return out;
}

CVector vectorize(const Operator& rho) {
  return Eigen::Map<const CVector>(rho.data(), rho.size());
}

Operator unvectorize(const CVector& v, int dim) {
  if (v.size() != static_cast<Eigen::Index>(dim) * dim) {
    throw std::invalid_argument("unvectorize: length mismatch");
  }
  return Eigen::Map<const Operator>(v.data(), dim, dim);
}

Eigen::RowVectorXcd trace_functional(int dim) {
  Eigen::RowVectorXcd t = Eigen::RowVectorXcd::Zero(static_cast<Eigen::Index>(dim) * dim);
  for (int i = 0; i < dim; ++i) {
    t(i * dim + i) = 1.0;
  }
  return t;
}

}  // namespace metaswitch
