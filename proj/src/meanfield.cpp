#include "metaswitch/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metaswitch/parallel.hpp"

namespace metaswitch {

double BlochState::norm() const { return std::sqrt(mx * mx + my * my + mz * mz); }

std::string to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Saddle: return "saddle";
  }
  return "unknown";
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::MonostableI: return "monostable_I";
    case Regime::Bistable: return "bistable";
    case Regime::MonostableII: return "monostable_II";
  }
  return "unknown";
}

Eigen::Vector3d mf_rhs(const Eigen::Vector3d& m, const ModelParams& params) {
  const double gamma = params.decay;
  const double shift = 0.5 * params.interaction * (m(2) + 1.0) - params.detuning;
  return {-shift * m(1) - 0.5 * gamma * m(0),
          -params.rabi * m(2) + shift * m(0) - 0.5 * gamma * m(1),
          params.rabi * m(1) - gamma * (m(2) + 1.0)};
}

Eigen::Matrix3d mf_jacobian(const Eigen::Vector3d& m, const ModelParams& params) {
  const double gamma = params.decay;
  const double half_v = 0.5 * params.interaction;
  const double shift = half_v * (m(2) + 1.0) - params.detuning;
  Eigen::Matrix3d j;
  j << -0.5 * gamma, -shift, -half_v * m(1),
       shift, -0.5 * gamma, -params.rabi + half_v * m(0),
       0.0, params.rabi, -gamma;
  return j;
}

FixedPoint classify_fixed_point(const BlochState& state, const ModelParams& params) {
  FixedPoint fp;
  fp.state = state;
  const Eigen::EigenSolver<Eigen::Matrix3d> solver(mf_jacobian(state.vec(), params), false);
  int n_neg = 0;
  int n_pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::complex<double> ev = solver.eigenvalues()(i);
    fp.jacobian_eigs[static_cast<std::size_t>(i)] = ev;
    if (ev.real() < -kStabilityTol) {
      ++n_neg;
    } else if (ev.real() > kStabilityTol) {
      ++n_pos;
      if (std::abs(ev.imag()) > kStabilityTol) fp.oscillatory_instability = true;
    } else {
      fp.marginal = true;
    }
  }
  std::sort(fp.jacobian_eigs.begin(), fp.jacobian_eigs.end(),
            [](auto a, auto b) { return a.real() > b.real(); });
  if (n_neg == 3) {
    fp.stability = Stability::Stable;
  } else if (n_pos > 0 && n_neg > 0 && !fp.marginal) {
    fp.stability = Stability::Saddle;
  } else {
    fp.stability = Stability::Unstable;
  }
  return fp;
}

namespace {

struct Cubic {
  // c3 u^3 + c2 u^2 + c1 u + c0
  double c3, c2, c1, c0;
  double operator()(double u) const { return ((c3 * u + c2) * u + c1) * u + c0; }
  double derivative(double u) const { return (3.0 * c3 * u + 2.0 * c2) * u + c1; }
};

Cubic fixed_point_cubic(const ModelParams& p) {
  const double v = p.interaction;
  const double d = p.detuning;
  const double g = p.decay;
  return {0.5 * v * v, -2.0 * v * d, 2.0 * d * d + p.rabi * p.rabi + 0.5 * g * g,
          -p.rabi * p.rabi};
}

double polish(const Cubic& c, double u) {
  for (int it = 0; it < 50; ++it) {
    const double f = c(u);
    const double df = c.derivative(u);
    if (df == 0.0) break;
    const double step = f / df;
    u -= step;
    if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(u))) break;
  }
  return u;
}

std::vector<double> cubic_roots_in_unit_interval(const Cubic& c) {
  std::vector<double> candidates;
  if (std::abs(c.c3) < 1e-300) {
    // V = 0: linear condition c1 u + c0 = 0
    if (c.c1 != 0.0) candidates.push_back(-c.c0 / c.c1);
  } else {
    Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
    companion(0, 0) = -c.c2 / c.c3;
    companion(0, 1) = -c.c1 / c.c3;
    companion(0, 2) = -c.c0 / c.c3;
    companion(1, 0) = 1.0;
    companion(2, 1) = 1.0;
    const Eigen::EigenSolver<Eigen::Matrix3d> solver(companion, false);
    for (int i = 0; i < 3; ++i) {
      const std::complex<double> r = solver.eigenvalues()(i);
      if (std::abs(r.imag()) <= 1e-6 * std::max(1.0, std::abs(r))) {
        candidates.push_back(polish(c, r.real()));
      }
    }
  }
  std::vector<double> roots;
  for (double u : candidates) {
    if (u >= -1e-12 && u <= 1.0 + 1e-12 && std::abs(c(u)) <= 1e-9 * (1.0 + std::abs(c.c1))) {
      u = std::clamp(u, 0.0, 1.0);
      const bool duplicate = std::any_of(roots.begin(), roots.end(),
                                         [u](double r) { return std::abs(r - u) < 1e-10; });
      if (!duplicate) roots.push_back(u);
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

BlochState state_from_u(double u, const ModelParams& p) {
  // m_y from the m_z equation, m_x from the m_x equation.
  const double my = p.decay * u / p.rabi;
  const double shift = 0.5 * p.interaction * u - p.detuning;
  const double mx = -2.0 * shift * my / p.decay;
  return {mx, my, u - 1.0};
}

}  // namespace

std::vector<FixedPoint> find_fixed_points(const ModelParams& params) {
  params.validate();
  std::vector<FixedPoint> out;
  if (params.rabi == 0.0) {
    out.push_back(classify_fixed_point({0.0, 0.0, -1.0}, params));
    return out;
  }
  for (double u : cubic_roots_in_unit_interval(fixed_point_cubic(params))) {
    BlochState s = state_from_u(u, params);
    // Newton refinement on the full 3D system to drive the residual to round-off.
    Eigen::Vector3d m = s.vec();
    for (int it = 0; it < 5; ++it) {
      const Eigen::Vector3d f = mf_rhs(m, params);
      if (f.lpNorm<Eigen::Infinity>() < 1e-15) break;
      m -= mf_jacobian(m, params).partialPivLu().solve(f);
    }
    out.push_back(classify_fixed_point(BlochState::from(m), params));
  }
  return out;
}

RegimeLabel classify_regime(const ModelParams& params) {
  const std::vector<FixedPoint> fps = find_fixed_points(params);
  RegimeLabel label;
  for (const auto& fp : fps) {
    if (fp.stability == Stability::Stable) {
      ++label.n_stable;
      label.stable_ne.push_back(fp.state.excitation());
    } else if (!label.unstable_ne) {
      label.unstable_ne = fp.state.excitation();
    }
  }
  std::sort(label.stable_ne.begin(), label.stable_ne.end());
  if (label.n_stable >= 2) {
    label.regime = Regime::Bistable;
    return label;
  }
  // One stable point: decide the branch from the cubic's shape. Below the local maximum of the
  // cubic the root lies on the low-excitation (dark) branch; above the local minimum, or when
  // the cubic is monotone, it lies on the high-excitation branch.
  label.regime = Regime::MonostableI;
  if (params.rabi == 0.0 || label.stable_ne.empty()) return label;
  const Cubic c = fixed_point_cubic(params);
  if (std::abs(c.c3) < 1e-300) return label;
  const double qa = 3.0 * c.c3;
  const double qb = 2.0 * c.c2;
  const double disc = qb * qb - 4.0 * qa * c.c1;
  if (disc <= 0.0) return label;
  const double u_max = (-qb - std::sqrt(disc)) / (2.0 * qa);
  const double u = 2.0 * label.stable_ne.front();
  if (u < u_max) label.regime = Regime::MonostableII;
  return label;
}

PhaseDiagram phase_diagram(const std::vector<double>& delta_grid, const ModelParams& params,
                           double resolution, int jobs) {
  if (!std::is_sorted(delta_grid.begin(), delta_grid.end())) {
    throw std::invalid_argument("phase_diagram: detuning grid must be sorted");
  }
  PhaseDiagram pd;
  pd.deltas = delta_grid;
  pd.labels.resize(delta_grid.size());
  parallel_for(delta_grid.size(), jobs, [&](std::size_t i) {
    ModelParams p = params;
    p.detuning = delta_grid[i];
    pd.labels[i] = classify_regime(p);
  });
  for (std::size_t i = 1; i < delta_grid.size(); ++i) {
    if (pd.labels[i].regime == pd.labels[i - 1].regime) continue;
    double lo = delta_grid[i - 1];
    double hi = delta_grid[i];
    const Regime lo_regime = pd.labels[i - 1].regime;
    while (hi - lo > resolution) {
      const double mid = 0.5 * (lo + hi);
      ModelParams p = params;
      p.detuning = mid;
      if (classify_regime(p).regime == lo_regime) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    pd.boundaries.push_back(0.5 * (lo + hi));
  }
  return pd;
}

Eigen::Vector3d rk4_step(const Eigen::Vector3d& m, const ModelParams& params, double dt) {
  const Eigen::Vector3d k1 = mf_rhs(m, params);
  const Eigen::Vector3d k2 = mf_rhs(m + 0.5 * dt * k1, params);
  const Eigen::Vector3d k3 = mf_rhs(m + 0.5 * dt * k2, params);
  const Eigen::Vector3d k4 = mf_rhs(m + dt * k3, params);
  return m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

MFTrajectory integrate_mf(const BlochState& initial, const ModelParams& params, double t_final,
                          double dt, int record_every) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("integrate_mf: dt must be positive and finite");
  }
  if (!(t_final >= 0.0)) {
    throw std::invalid_argument("integrate_mf: t_final must be nonnegative");
  }
  if (dt < 1e-14 * std::max(1.0, t_final)) {
    throw std::underflow_error("integrate_mf: step size underflow");
  }
  record_every = std::max(1, record_every);
  const auto steps = static_cast<long>(std::ceil(t_final / dt - 1e-12));
  const double h = steps > 0 ? t_final / static_cast<double>(steps) : 0.0;
  MFTrajectory traj;
  Eigen::Vector3d m = initial.vec();
  traj.times.push_back(0.0);
  traj.states.push_back(initial);
  for (long k = 1; k <= steps; ++k) {
    m = rk4_step(m, params, h);
    if (!m.allFinite()) {
      throw std::runtime_error("integrate_mf: state became non-finite");
    }
    if (k % record_every == 0 || k == steps) {
      traj.times.push_back(static_cast<double>(k) * h);
      traj.states.push_back(BlochState::from(m));
    }
  }
  return traj;
}

}  // namespace metaswitch
