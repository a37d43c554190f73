#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "metaswitch/model.hpp"

namespace metaswitch {

/// Normalized collective spin (m_x, m_y, m_z) = <S^alpha>/S.
struct BlochState {
  double mx = 0.0;
  double my = 0.0;
  double mz = -1.0;

  double excitation() const { return 0.5 * (mz + 1.0); }
  double norm() const;
  Eigen::Vector3d vec() const { return {mx, my, mz}; }
  static BlochState from(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }
};

enum class Stability { Stable, Unstable, Saddle };

std::string to_string(Stability s);

/// Real-part tolerance separating stable from marginal eigenvalues.
inline constexpr double kStabilityTol = 1e-8;

struct FixedPoint {
  BlochState state;
  std::array<std::complex<double>, 3> jacobian_eigs{};
  Stability stability = Stability::Unstable;
  bool marginal = false;  // some |Re eig| <= kStabilityTol (bifurcation point)
  bool oscillatory_instability = false;  // complex pair with positive real part
};

enum class Regime { MonostableI, Bistable, MonostableII };

std::string to_string(Regime r);

struct RegimeLabel {
  Regime regime = Regime::MonostableI;
  int n_stable = 0;
  std::vector<double> stable_ne;  // ascending
  std::optional<double> unstable_ne;
};

/// Time derivative of the mean-field Bloch vector.
Eigen::Vector3d mf_rhs(const Eigen::Vector3d& m, const ModelParams& params);
inline Eigen::Vector3d mf_rhs(const BlochState& s, const ModelParams& params) {
  return mf_rhs(s.vec(), params);
}

Eigen::Matrix3d mf_jacobian(const Eigen::Vector3d& m, const ModelParams& params);

/// All fixed points, sorted by ascending m_z. Uses the cubic in u = m_z + 1:
///   (V^2/2) u^3 - 2 V Delta u^2 + (2 Delta^2 + Omega^2 + gamma^2/2) u - Omega^2 = 0.
std::vector<FixedPoint> find_fixed_points(const ModelParams& params);

FixedPoint classify_fixed_point(const BlochState& state, const ModelParams& params);

RegimeLabel classify_regime(const ModelParams& params);

struct PhaseDiagram {
  std::vector<double> deltas;
  std::vector<RegimeLabel> labels;
  std::vector<double> boundaries;  // refined Delta values where the label changes
};

/// Labels every detuning in the (sorted) grid; other fields of params are held fixed.
PhaseDiagram phase_diagram(const std::vector<double>& delta_grid, const ModelParams& params,
                           double resolution = 1e-3, int jobs = 1);

struct MFTrajectory {
  std::vector<double> times;
  std::vector<BlochState> states;
};

/// Fixed-step classical RK4. Records every `record_every` steps plus the final state.
MFTrajectory integrate_mf(const BlochState& initial, const ModelParams& params, double t_final,
                          double dt, int record_every = 1);

/// One RK4 step of an autonomous 3-vector field.
Eigen::Vector3d rk4_step(const Eigen::Vector3d& m, const ModelParams& params, double dt);

}  // namespace metaswitch
