#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metaswitch/linalg.hpp"
#include "metaswitch/meanfield.hpp"
#include "metaswitch/model.hpp"
#include "metaswitch/spectral.hpp"

namespace metaswitch {

enum class SwitchDirection { Upward, Downward };

std::string to_string(SwitchDirection d);

struct SwitchEvent {
  double time = 0.0;
  SwitchDirection direction = SwitchDirection::Upward;
};

/// Two-threshold hysteresis detector acting on a centred moving average of n_e.
struct SwitchDetector {
  double theta_dark = 0.0;
  double theta_bright = 1.0;
  double min_dwell = 5.0;         // time units
  double smoothing_window = 1.0;  // time units; <= sample spacing means no smoothing

  void validate() const;
};

/// Thresholds at the unstable n_e -/+ `fraction` of the distance to each stable point, with
/// the default smoothing and dwell (both in units of 1/gamma). Throws std::invalid_argument
/// unless the parameters are mean-field bistable.
SwitchDetector default_detector(const ModelParams& params, double fraction = 0.4);

/// Throws std::invalid_argument unless the thresholds bracket the unstable fixed point.
void check_bracketing(const SwitchDetector& detector, const std::vector<FixedPoint>& fixed_points);

struct TrajectoryConfig {
  double dt = 0.0;        // <= 0 means default_dt(params)
  double t_final = 100.0;
  std::uint64_t seed = 0;
  int record_stride = 1;  // record n_e every this many steps
  std::optional<CVector> initial_state;  // default |M = -S>
  std::vector<double> snapshot_times;    // store the state vector at these times

  void validate() const;
};

/// 0.02 / (gamma N): expected jump probability per step at most 0.02.
double default_dt(const ModelParams& params);

/// Largest jump probability allowed in one step before the run aborts.
inline constexpr double kMaxJumpProbability = 0.1;

class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrajectoryRecord {
  int n_atoms = 1;
  double decay = 1.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<double> ne;
  std::vector<double> jump_times;
  std::vector<SwitchEvent> switches;
  std::vector<CVector> snapshots;  // one per TrajectoryConfig::snapshot_times entry
  double max_norm_error = 0.0;     // largest | ||psi|| - 1 | after any step

  /// First switch time or 50 / gamma, whichever is earlier.
  double burn_in() const;
};

/// Per-step quantum-jump unraveling with an exact no-jump propagator. Deterministic in
/// (params, config). Throws StepSizeError if a jump probability exceeds kMaxJumpProbability.
TrajectoryRecord evolve_trajectory(const ModelParams& params, const TrajectoryConfig& config);

/// Seed of trajectory `index` derived from a master seed (SplitMix64 mixing).
std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index);

/// `count` trajectories with seeds trajectory_seed(config.seed, i), in index order.
std::vector<TrajectoryRecord> run_ensemble(const ModelParams& params,
                                           const TrajectoryConfig& config, int count,
                                           int jobs = 1);

/// Fills record.switches from record.ne.
void detect_switches(TrajectoryRecord& record, const SwitchDetector& detector);

/// Same, after checking the thresholds against the mean-field fixed points.
void detect_switches(TrajectoryRecord& record, const std::vector<FixedPoint>& fixed_points,
                     const SwitchDetector& detector);

/// Completed dwell times between consecutive switches; the open intervals before the first
/// and after the last switch are censored and dropped.
struct WaitingTimes {
  std::vector<double> dark;    // ended by an upward switch
  std::vector<double> bright;  // ended by a downward switch
};

WaitingTimes collect_waiting_times(const std::vector<TrajectoryRecord>& records);

struct DwellSummary {
  double mean = 0.0;
  double stderr_mean = 0.0;
  int count = 0;
  bool sufficient = false;
};

DwellSummary summarize(const std::vector<double>& samples, int min_samples);

/// Mean waiting times per size and T = b exp(v N) fits.
struct SwitchStats {
  std::vector<int> sizes;
  std::vector<DwellSummary> dark;
  std::vector<DwellSummary> bright;
  std::optional<ExpFit> fit_dark;    // only sizes with sufficient samples; needs >= 4 sizes
  std::optional<ExpFit> fit_bright;
  std::vector<int> fit_sizes_dark;
  std::vector<int> fit_sizes_bright;
};

inline constexpr int kMinSwitchSamples = 20;

SwitchStats waiting_time_stats(const std::vector<WaitingTimes>& per_size,
                               const std::vector<int>& sizes,
                               int min_samples = kMinSwitchSamples);

/// Histogram of n_e over all records after each record's burn-in. Samples are equally spaced
/// in time, so each carries the same weight.
BinnedPDF trajectory_pdf(const std::vector<TrajectoryRecord>& records, double half_width);

/// tau = (1/T_b + 1/T_d)^(-1).
double relaxation_time(double t_bright, double t_dark);

struct RelaxationScaling {
  std::vector<int> sizes;
  std::vector<double> tau;
  std::optional<ExpFit> fit;  // tau ~ b exp(kappa N), needs >= 2 sizes
};

/// tau for each size where both means are available.
RelaxationScaling relaxation_times(const SwitchStats& stats);

}  // namespace metaswitch
