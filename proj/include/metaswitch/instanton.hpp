#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "metaswitch/meanfield.hpp"
#include "metaswitch/model.hpp"

namespace metaswitch {

/// Mean-field state m and conjugate momentum q.
struct PhasePoint {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
};

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// N-free noise matrix [[1, 0, mx], [0, 1, my], [mx, my, 2(mz + 1)]].
Eigen::Matrix3d noise_covariance(const Eigen::Vector3d& m);

/// H = F(m).q + q.M(m).q / 2.
double hamiltonian(const PhasePoint& x, const ModelParams& params);

/// (dH/dq, -dH/dm).
Vector6d hj_flow(const PhasePoint& x, const ModelParams& params);

struct InstantonOptions {
  int points = 200;               // K, nodes on the fluctuational segment
  double endpoint_offset = 1e-3;  // epsilon
  int max_cycles = 400;           // BFGS runs, each followed by equal-arclength resampling
  int cycle_iterations = 200;     // BFGS iterations per cycle
  double action_tol = 1e-10;      // stop when a cycle lowers the action by less than this
  double energy_tol = 1e-6;
  double tikhonov = 1e-10;        // eigenvalue floor when inverting the noise matrix
  double relax_step = 1e-2;       // RK4 step of the deterministic segment
};

struct InstantonPath {
  std::vector<PhasePoint> points;
  std::vector<double> arclength;   // Euclidean, from the source
  std::vector<double> increments;  // action of the segment ending at each point (0 at start)
  double phi = 0.0;                // per-atom action of the whole path
  double fluctuation_action = 0.0;
  double deterministic_action = 0.0;
  double energy_residual = 0.0;    // max |H| along the fluctuational segment
  double max_relaxation_momentum = 0.0;  // max |q| along the deterministic segment
  std::size_t fluctuation_points = 0;    // points[0, fluctuation_points) are fluctuational
  int cycles = 0;
  bool converged = false;
};

class InstantonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minimum-action path from a stable fixed point to the saddle, continued by free relaxation
/// to `target` when target is the other stable point. Throws InstantonError when the source is
/// not stable or no saddle exists.
InstantonPath minimize_action(const FixedPoint& source, const FixedPoint& target,
                              const ModelParams& params, const InstantonOptions& options = {});

/// Discrete geometric action of a node path with clamped endpoints (exposed for tests).
double geometric_action(const std::vector<Eigen::Vector3d>& nodes, const ModelParams& params,
                        double tikhonov = 1e-10);

/// Its gradient with respect to every node (endpoint rows included).
std::vector<Eigen::Vector3d> geometric_action_gradient(const std::vector<Eigen::Vector3d>& nodes,
                                                       const ModelParams& params,
                                                       double tikhonov = 1e-10);

struct Quasipotential {
  double delta = 0.0;
  bool bistable = false;
  double phi_d = 0.0;   // escape from the dark state
  double phi_b = 0.0;   // escape from the bright state
  double phi_db = 0.0;  // phi_d - phi_b
  bool converged = false;
  double max_energy_residual = 0.0;
  InstantonPath dark_path;    // dark -> saddle -> bright
  InstantonPath bright_path;  // bright -> saddle -> dark
};

/// Per-atom barriers over a detuning grid (escape action up to the saddle); non-bistable
/// entries are returned with bistable = false.
std::vector<Quasipotential> quasipotential_sweep(const std::vector<double>& delta_grid,
                                                 const ModelParams& params,
                                                 const InstantonOptions& options = {},
                                                 int jobs = 1);

/// Arrhenius estimate exp(-N phi).
double arrhenius_rate(double phi, int n_atoms);

}  // namespace metaswitch
