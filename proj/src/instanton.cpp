#include "metaswitch/instanton.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <gsl/gsl_spline.h>

#include "metaswitch/parallel.hpp"

namespace metaswitch {

Eigen::Matrix3d noise_covariance(const Eigen::Vector3d& m) {
  Eigen::Matrix3d mb;
  mb << 1.0, 0.0, m(0),
        0.0, 1.0, m(1),
        m(0), m(1), 2.0 * (m(2) + 1.0);
  return mb;
}

double hamiltonian(const PhasePoint& x, const ModelParams& params) {
  return mf_rhs(x.m, params).dot(x.q) + 0.5 * x.q.dot(noise_covariance(x.m) * x.q);
}

Vector6d hj_flow(const PhasePoint& x, const ModelParams& params) {
  const Eigen::Vector3d f = mf_rhs(x.m, params);
  const Eigen::Matrix3d j = mf_jacobian(x.m, params);
  const Eigen::Vector3d& q = x.q;
  Vector6d out;
  out.head<3>() = f + noise_covariance(x.m) * q;
  // d/dm of q.M q / 2: M depends linearly on m through entries (1,3), (2,3), (3,3).
  const Eigen::Vector3d noise_grad(q(0) * q(2), q(1) * q(2), q(2) * q(2));
  out.tail<3>() = -(j.transpose() * q + noise_grad);
  return out;
}

namespace {

// Inverse of the noise matrix with eigenvalues floored at `floor`.
Eigen::Matrix3d metric(const Eigen::Vector3d& m, double floor) {
  const Eigen::Matrix3d mb = noise_covariance(m);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(mb);
  const Eigen::Vector3d inv = es.eigenvalues().cwiseMax(floor).cwiseInverse();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

const std::array<Eigen::Matrix3d, 3>& noise_derivatives() {
  static const std::array<Eigen::Matrix3d, 3> d = [] {
    std::array<Eigen::Matrix3d, 3> out;
    for (auto& m : out) m.setZero();
    out[0](0, 2) = out[0](2, 0) = 1.0;
    out[1](1, 2) = out[1](2, 1) = 1.0;
    out[2](2, 2) = 2.0;
    return out;
  }();
  return d;
}

struct SegmentTerms {
  double action = 0.0;
  Eigen::Vector3d d_delta = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_mid = Eigen::Vector3d::Zero();
};

// l(delta, p) = |delta|_A |F|_A - <delta, F>_A with A = M(p)^-1, F = F(p).
SegmentTerms segment(const Eigen::Vector3d& delta, const Eigen::Vector3d& mid,
                     const ModelParams& params, double floor, bool want_gradient) {
  SegmentTerms t;
  const Eigen::Matrix3d a_mat = metric(mid, floor);
  const Eigen::Vector3d f = mf_rhs(mid, params);
  const Eigen::Vector3d u = a_mat * delta;
  const Eigen::Vector3d w = a_mat * f;
  const double a = std::sqrt(std::max(0.0, delta.dot(u)));
  const double b = std::sqrt(std::max(0.0, f.dot(w)));
  t.action = a * b - delta.dot(w);
  if (!want_gradient) return t;
  if (a > 0.0) t.d_delta = (b / a) * u;
  t.d_delta -= w;
  const Eigen::Matrix3d j = mf_jacobian(mid, params);
  const auto& dm = noise_derivatives();
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d jk = j.col(k);
    double g = -(u.dot(jk) - u.dot(dm[static_cast<std::size_t>(k)] * w));
    if (a > 0.0) g += (b / (2.0 * a)) * (-u.dot(dm[static_cast<std::size_t>(k)] * u));
    if (b > 0.0) {
      g += (a / (2.0 * b)) * (2.0 * w.dot(jk) - w.dot(dm[static_cast<std::size_t>(k)] * w));
    }
    t.d_mid(k) = g;
  }
  return t;
}

// Cubic-spline resampling in chord length; linear resampling cuts corners enough to undo the
// last digits of each optimization cycle.
std::vector<Eigen::Vector3d> resample_equal_arclength(const std::vector<Eigen::Vector3d>& nodes) {
  std::vector<double> s{0.0};
  std::vector<Eigen::Vector3d> kept{nodes.front()};
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double len = (nodes[i] - kept.back()).norm();
    if (len <= 1e-14 && i + 1 < nodes.size()) continue;
    s.push_back(s.back() + len);
    kept.push_back(nodes[i]);
  }
  const std::size_t k = nodes.size();
  std::vector<Eigen::Vector3d> out(k);
  out.front() = nodes.front();
  out.back() = nodes.back();
  const std::size_t n = kept.size();
  if (n < 3) {
    for (std::size_t i = 1; i + 1 < k; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(k - 1);
      out[i] = (1.0 - t) * nodes.front() + t * nodes.back();
    }
    return out;
  }
  gsl_interp_accel* acc = gsl_interp_accel_alloc();
  std::array<gsl_spline*, 3> splines{};
  std::vector<double> y(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) y[i] = kept[i](c);
    splines[static_cast<std::size_t>(c)] = gsl_spline_alloc(gsl_interp_cspline, n);
    gsl_spline_init(splines[static_cast<std::size_t>(c)], s.data(), y.data(), n);
  }
  for (std::size_t i = 1; i + 1 < k; ++i) {
    const double target = s.back() * static_cast<double>(i) / static_cast<double>(k - 1);
    for (int c = 0; c < 3; ++c) {
      out[i](c) = gsl_spline_eval(splines[static_cast<std::size_t>(c)], target, acc);
    }
  }
  for (gsl_spline* sp : splines) gsl_spline_free(sp);
  gsl_interp_accel_free(acc);
  return out;
}

// Interior nodes move only in the plane normal to the path they started from; the tangential
// placement is fixed by the resampling between cycles.
struct Problem {
  const ModelParams* params;
  std::vector<Eigen::Vector3d> base;
  std::vector<Eigen::Matrix<double, 3, 2>> normals;  // per interior node
  double floor;

  std::size_t interior() const { return base.size() - 2; }

  std::vector<Eigen::Vector3d> nodes(const gsl_vector* x) const {
    std::vector<Eigen::Vector3d> out = base;
    for (std::size_t i = 0; i < interior(); ++i) {
      out[i + 1] += normals[i] * Eigen::Vector2d(gsl_vector_get(x, 2 * i), gsl_vector_get(x, 2 * i + 1));
    }
    return out;
  }
};

double gsl_f(const gsl_vector* x, void* data) {
  const auto* p = static_cast<const Problem*>(data);
  return geometric_action(p->nodes(x), *p->params, p->floor);
}

void gsl_df(const gsl_vector* x, void* data, gsl_vector* g) {
  const auto* p = static_cast<const Problem*>(data);
  const auto grad = geometric_action_gradient(p->nodes(x), *p->params, p->floor);
  for (std::size_t i = 0; i < p->interior(); ++i) {
    const Eigen::Vector2d gi = p->normals[i].transpose() * grad[i + 1];
    gsl_vector_set(g, 2 * i, gi(0));
    gsl_vector_set(g, 2 * i + 1, gi(1));
  }
}

void gsl_fdf(const gsl_vector* x, void* data, double* f, gsl_vector* g) {
  *f = gsl_f(x, data);
  gsl_df(x, data, g);
}

// One BFGS run from `nodes`; returns the improved nodes.
std::vector<Eigen::Vector3d> bfgs_cycle(const std::vector<Eigen::Vector3d>& nodes,
                                        const ModelParams& params, double floor,
                                        int iterations) {
  Problem prob{&params, nodes, {}, floor};
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) {
    const Eigen::Vector3d t = (nodes[i + 1] - nodes[i - 1]).normalized();
    // Complete t to an orthonormal frame.
    const Eigen::Matrix3d h = Eigen::Matrix3d::Identity() - t * t.transpose();
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU);
    prob.normals.emplace_back(svd.matrixU().leftCols<2>());
  }
  const std::size_t dim = 2 * prob.interior();
  gsl_vector* x = gsl_vector_calloc(dim);
  gsl_multimin_function_fdf fn;
  fn.n = dim;
  fn.f = gsl_f;
  fn.df = gsl_df;
  fn.fdf = gsl_fdf;
  fn.params = &prob;
  gsl_multimin_fdfminimizer* solver =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, dim);
  // Initial step comparable to the node spacing.
  const double spacing = (nodes.back() - nodes.front()).norm() / static_cast<double>(nodes.size());
  gsl_multimin_fdfminimizer_set(solver, &fn, x, spacing, 0.1);
  for (int it = 0; it < iterations; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(solver) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(solver->gradient, 1e-13) == GSL_SUCCESS) break;
  }
  std::vector<Eigen::Vector3d> out = prob.nodes(solver->x);
  gsl_multimin_fdfminimizer_free(solver);
  gsl_vector_free(x);
  return out;
}

Eigen::Vector3d toward(const Eigen::Vector3d& dir, const Eigen::Vector3d& from,
                       const Eigen::Vector3d& to) {
  Eigen::Vector3d d = dir.normalized();
  return d.dot(to - from) < 0.0 ? Eigen::Vector3d(-d) : d;
}

// Real eigenvector of the Jacobian for eigenvalue index `which` (sorted by descending real
// part); falls back to the chord direction when that eigenvalue is complex.
Eigen::Vector3d offset_direction(const FixedPoint& fp, const ModelParams& params, int which,
                                 const Eigen::Vector3d& other) {
  const Eigen::Vector3d m = fp.state.vec();
  const Eigen::EigenSolver<Eigen::Matrix3d> es(mf_jacobian(m, params));
  std::vector<std::pair<double, int>> order;
  for (int i = 0; i < 3; ++i) order.emplace_back(es.eigenvalues()(i).real(), i);
  std::sort(order.begin(), order.end(), [](auto a, auto b) { return a.first > b.first; });
  const int best = order[static_cast<std::size_t>(which)].second;
  if (std::abs(es.eigenvalues()(best).imag()) > 1e-12) return toward(other - m, m, other);
  return toward(es.eigenvectors().col(best).real(), m, other);
}

Eigen::Vector3d node_momentum(const Eigen::Vector3d& m, const Eigen::Vector3d& tangent,
                              const ModelParams& params, double floor) {
  const Eigen::Matrix3d a_mat = metric(m, floor);
  const Eigen::Vector3d f = mf_rhs(m, params);
  const double a = std::sqrt(std::max(0.0, tangent.dot(a_mat * tangent)));
  const double b = std::sqrt(std::max(0.0, f.dot(a_mat * f)));
  if (a == 0.0) return Eigen::Vector3d::Zero();
  return a_mat * ((b / a) * tangent - f);
}

const FixedPoint* find_saddle(const std::vector<FixedPoint>& fps) {
  for (const FixedPoint& fp : fps) {
    if (fp.stability == Stability::Saddle) return &fp;
  }
  return nullptr;
}

}  // namespace

double geometric_action(const std::vector<Eigen::Vector3d>& nodes, const ModelParams& params,
                        double tikhonov) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    total += segment(nodes[i + 1] - nodes[i], 0.5 * (nodes[i] + nodes[i + 1]), params, tikhonov,
                     false)
                 .action;
  }
  return total;
}

std::vector<Eigen::Vector3d> geometric_action_gradient(const std::vector<Eigen::Vector3d>& nodes,
                                                       const ModelParams& params,
                                                       double tikhonov) {
  std::vector<Eigen::Vector3d> g(nodes.size(), Eigen::Vector3d::Zero());
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const SegmentTerms t =
        segment(nodes[i + 1] - nodes[i], 0.5 * (nodes[i] + nodes[i + 1]), params, tikhonov, true);
    g[i] += -t.d_delta + 0.5 * t.d_mid;
    g[i + 1] += t.d_delta + 0.5 * t.d_mid;
  }
  return g;
}

InstantonPath minimize_action(const FixedPoint& source, const FixedPoint& target,
                              const ModelParams& params, const InstantonOptions& options) {
  if (options.points < 3) throw std::invalid_argument("minimize_action needs at least 3 points");
  InstantonPath path;
  const Eigen::Vector3d src = source.state.vec();
  const Eigen::Vector3d dst = target.state.vec();
  if ((src - dst).norm() < 1e-12) {
    path.points.push_back({src, Eigen::Vector3d::Zero()});
    path.arclength.push_back(0.0);
    path.increments.push_back(0.0);
    path.fluctuation_points = 1;
    path.converged = true;
    return path;
  }
  if (source.stability != Stability::Stable) {
    throw InstantonError("minimize_action: source must be a stable fixed point");
  }
  const std::vector<FixedPoint> fps = find_fixed_points(params);
  const FixedPoint* saddle = target.stability == Stability::Saddle ? &target : find_saddle(fps);
  if (saddle == nullptr) {
    throw InstantonError("minimize_action: no saddle (parameters outside the bistable window)");
  }
  const Eigen::Vector3d sad = saddle->state.vec();
  const double eps = options.endpoint_offset;
  // Leave the stable point along its slowest direction and reach the saddle along its
  // unstable direction.
  const Eigen::Vector3d start = src + eps * offset_direction(source, params, 0, sad);
  const Eigen::Vector3d end = sad + eps * offset_direction(*saddle, params, 0, src);

  const auto k = static_cast<std::size_t>(options.points);
  std::vector<Eigen::Vector3d> nodes(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(k - 1);
    nodes[i] = (1.0 - t) * start + t * end;
  }
  double action = geometric_action(nodes, params, options.tikhonov);
  for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
    nodes = resample_equal_arclength(
        bfgs_cycle(nodes, params, options.tikhonov, options.cycle_iterations));
    const double next = geometric_action(nodes, params, options.tikhonov);
    path.cycles = cycle + 1;
    const double drop = action - next;
    action = next;
    if (std::abs(drop) < options.action_tol) {
      path.converged = true;
      break;
    }
  }

  // Fluctuational segment with momenta on the zero-energy manifold.
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::Vector3d tangent;
    if (i == 0) {
      tangent = nodes[1] - nodes[0];
    } else if (i + 1 == k) {
      tangent = nodes[k - 1] - nodes[k - 2];
    } else {
      tangent = 0.5 * (nodes[i + 1] - nodes[i - 1]);
    }
    PhasePoint x{nodes[i], node_momentum(nodes[i], tangent, params, options.tikhonov)};
    double inc = 0.0;
    if (i > 0) {
      s += (nodes[i] - nodes[i - 1]).norm();
      inc = segment(nodes[i] - nodes[i - 1], 0.5 * (nodes[i] + nodes[i - 1]), params,
                    options.tikhonov, false)
                .action;
    }
    path.energy_residual = std::max(path.energy_residual, std::abs(hamiltonian(x, params)));
    path.points.push_back(x);
    path.arclength.push_back(s);
    path.increments.push_back(inc);
  }
  path.fluctuation_action = action;
  path.fluctuation_points = k;
  if (path.energy_residual > options.energy_tol) path.converged = false;

  // Free relaxation from the saddle to the other stable point, q = 0.
  if (target.stability == Stability::Stable) {
    Eigen::Vector3d m = sad + eps * offset_direction(*saddle, params, 0, dst);
    const double h = options.relax_step;
    const long max_steps = static_cast<long>(1e4 / h);
    for (long step = 0; step < max_steps && (m - dst).norm() > eps; ++step) {
      const Eigen::Vector3d next = rk4_step(m, params, h);
      const double inc = segment(next - m, 0.5 * (m + next), params, options.tikhonov, false).action;
      s += (next - m).norm();
      path.deterministic_action += inc;
      path.points.push_back({next, Eigen::Vector3d::Zero()});
      path.arclength.push_back(s);
      path.increments.push_back(inc);
      m = next;
    }
    if ((m - dst).norm() > eps) {
      throw InstantonError("minimize_action: relaxation did not reach the target fixed point");
    }
  }
  path.phi = path.fluctuation_action + path.deterministic_action;
  return path;
}

std::vector<Quasipotential> quasipotential_sweep(const std::vector<double>& delta_grid,
                                                 const ModelParams& params,
                                                 const InstantonOptions& options, int jobs) {
  std::vector<Quasipotential> out(delta_grid.size());
  parallel_for(delta_grid.size(), jobs, [&](std::size_t i) {
    ModelParams p = params;
    p.detuning = delta_grid[i];
    Quasipotential qp;
    qp.delta = delta_grid[i];
    const std::vector<FixedPoint> fps = find_fixed_points(p);
    std::vector<const FixedPoint*> stable;
    for (const FixedPoint& fp : fps) {
      if (fp.stability == Stability::Stable) stable.push_back(&fp);
    }
    if (stable.size() == 2 && find_saddle(fps) != nullptr) {
      std::sort(stable.begin(), stable.end(), [](const FixedPoint* a, const FixedPoint* b) {
        return a->state.excitation() < b->state.excitation();
      });
      qp.dark_path = minimize_action(*stable[0], *stable[1], p, options);
      qp.bright_path = minimize_action(*stable[1], *stable[0], p, options);
      qp.bistable = true;
      qp.phi_d = qp.dark_path.fluctuation_action;
      qp.phi_b = qp.bright_path.fluctuation_action;
      qp.phi_db = qp.phi_d - qp.phi_b;
      qp.converged = qp.dark_path.converged && qp.bright_path.converged;
      qp.max_energy_residual =
          std::max(qp.dark_path.energy_residual, qp.bright_path.energy_residual);
    }
    out[i] = qp;
  });
  return out;
}

double arrhenius_rate(double phi, int n_atoms) { return std::exp(-n_atoms * phi); }

}  // namespace metaswitch
