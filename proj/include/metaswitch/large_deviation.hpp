#pragma once

#include <stdexcept>
#include <vector>

#include "metaswitch/model.hpp"

namespace metaswitch {

/// theta(s) sampled on an increasing s grid. Entries whose eigensolve failed carry NaN and
/// failed[i] = true; downstream transforms skip them.
struct SCGFCurve {
  ModelParams params;
  std::vector<double> s;
  std::vector<double> theta;
  std::vector<bool> failed;

  /// Smallest discrete second difference, normalized to th(i+1) - 2 th(i) + th(i-1) on a
  /// uniform grid. Negative values indicate non-convexity.
  double min_second_difference() const;
};

/// Second differences below this are treated as non-convex.
inline constexpr double kConvexityTol = 1e-7;

/// Largest real part of the tilted-generator spectrum at one tilt.
double scgf_at(const ModelParams& params, double s);

/// theta on the given grid (must be strictly increasing), one dense eigensolve per point.
SCGFCurve scgf(const ModelParams& params, const std::vector<double>& s_grid, int jobs = 1);

/// n points evenly spaced on [lo, hi].
std::vector<double> uniform_grid(double lo, double hi, int n);

/// 201 points on [-1, 1].
std::vector<double> default_s_grid();

struct RefineOptions {
  int factor = 5;          // each flagged cell is split into `factor` subcells
  int rounds = 1;          // repeated detection/splitting passes
  double prominence = 10.0;  // spike threshold relative to the median |dk/ds|
};

/// scgf on the grid, then densify around cells where |dk/ds| spikes (near-kinks).
SCGFCurve scgf_refined(const ModelParams& params, const std::vector<double>& s_grid,
                       const RefineOptions& options = {}, int jobs = 1);

/// -theta'(0): mean photon emission rate. Central differences with the step shrunk by 10
/// until two successive estimates agree to rel_tol (or the step reaches 1e-8).
double mean_emission_rate(const ModelParams& params, double rel_tol = 1e-7);

class LegendreError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// phi(k) sorted by increasing k; k is the total rate (not per atom).
struct RateFunction {
  int n_atoms = 1;
  std::vector<double> k;
  std::vector<double> phi;
  std::vector<double> s;       // tilt at which each point was generated
  std::vector<bool> repaired;  // point fell out of monotone order and was recomputed

  std::vector<double> k_per_atom() const;
};

/// Parametric transform k(s) = -theta'(s) (three-point centered differences at interior grid
/// points), phi = -theta - s k. Throws LegendreError when the curve is non-convex beyond
/// kConvexityTol or fewer than three usable points remain.
RateFunction legendre(const SCGFCurve& curve);

/// Inverse transform theta(s) = -min_k [phi(k) + k s] over the sampled points.
double theta_from_rate(const RateFunction& rf, double s);

struct BimodalityReport {
  int n_maxima = 0;
  std::vector<double> maxima;  // k locations, increasing
  double plateau_width = 0.0;  // k-length between maxima where |phi| < flat_tol
  double kink_span = 0.0;      // k-length covered by the detected kinks
  std::vector<double> kink_s;  // tilt at the centre of each kink (including unreported ones)
};

/// A kink of theta shows up as a run of points where k changes much faster with s than
/// elsewhere (|dk/ds| above prominence x median). Kinks split -phi into branches; the
/// maximum of a branch is its point of smallest phi, and it is reported only if that phi is
/// within height_tol x N of the global minimum (kinks far out in the tails do not make a
/// second mode).
BimodalityReport bimodality_report(const RateFunction& rf, double prominence = 10.0,
                                   double height_tol = 0.01, double flat_tol = 1e-6);

}  // namespace metaswitch
