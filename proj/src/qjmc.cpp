#include "metaswitch/qjmc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "metaswitch/parallel.hpp"

namespace metaswitch {

std::string to_string(SwitchDirection d) {
  return d == SwitchDirection::Upward ? "upward" : "downward";
}

void SwitchDetector::validate() const {
  if (!(theta_dark < theta_bright)) {
    throw std::invalid_argument("switch detector: theta_dark must be below theta_bright");
  }
  if (!(min_dwell >= 0.0) || !(smoothing_window >= 0.0)) {
    throw std::invalid_argument("switch detector: dwell and smoothing window must be >= 0");
  }
}

SwitchDetector default_detector(const ModelParams& params, double fraction) {
  const RegimeLabel label = classify_regime(params);
  if (label.regime != Regime::Bistable || !label.unstable_ne || label.stable_ne.size() < 2) {
    throw std::invalid_argument("default_detector: parameters are not mean-field bistable");
  }
  const double mid = *label.unstable_ne;
  SwitchDetector d;
  d.theta_dark = mid - fraction * (mid - label.stable_ne.front());
  d.theta_bright = mid + fraction * (label.stable_ne.back() - mid);
  d.smoothing_window = 1.0 / params.decay;
  d.min_dwell = 5.0 / params.decay;
  return d;
}

void check_bracketing(const SwitchDetector& detector,
                      const std::vector<FixedPoint>& fixed_points) {
  detector.validate();
  bool found = false;
  for (const FixedPoint& fp : fixed_points) {
    if (fp.stability == Stability::Stable) continue;
    found = true;
    const double ne = fp.state.excitation();
    if (!(detector.theta_dark < ne && ne < detector.theta_bright)) {
      throw std::invalid_argument("switch thresholds do not bracket the unstable fixed point");
    }
  }
  if (!found) {
    throw std::invalid_argument("switch detection needs an unstable mean-field fixed point");
  }
}

void TrajectoryConfig::validate() const {
  if (!(t_final >= 0.0) || !std::isfinite(t_final)) {
    throw std::invalid_argument("trajectory: t_final must be finite and >= 0");
  }
  if (!std::isfinite(dt)) throw std::invalid_argument("trajectory: dt must be finite");
  if (record_stride < 1) throw std::invalid_argument("trajectory: record_stride must be >= 1");
}

double default_dt(const ModelParams& params) {
  return 0.02 / (params.decay * params.n_atoms);
}

double TrajectoryRecord::burn_in() const {
  const double cap = 50.0 / decay;
  return switches.empty() ? cap : std::min(switches.front().time, cap);
}

namespace {

struct Propagator {
  ModelParams params;
  double dt = 0.0;
  Operator no_jump;  // exp(-i H_eff dt)
};

Propagator make_propagator(const ModelParams& params, const TrajectoryConfig& config) {
  params.validate();
  config.validate();
  Propagator p;
  p.params = params;
  p.dt = config.dt > 0.0 ? config.dt : default_dt(params);
  const Operator gen = cplx(0.0, -p.dt) * build_h_eff(params);
  p.no_jump = gen.exp();
  return p;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

TrajectoryRecord run_one(const Propagator& prop, const TrajectoryConfig& config,
                         std::uint64_t seed) {
  const int n = prop.params.n_atoms;
  const int d = n + 1;
  const double gamma = prop.params.decay;
  const double dt = prop.dt;

  CVector psi = CVector::Zero(d);
  if (config.initial_state) {
    if (config.initial_state->size() != d) {
      throw std::invalid_argument("trajectory: initial state has wrong dimension");
    }
    psi = *config.initial_state;
    const double norm = psi.norm();
    if (!(norm > 0.0)) throw std::invalid_argument("trajectory: initial state is zero");
    psi /= norm;
  } else {
    psi(0) = 1.0;
  }

  const auto steps = static_cast<long long>(std::ceil(config.t_final / dt - 1e-9));
  std::vector<long long> snapshot_steps;
  for (double t : config.snapshot_times) {
    const long long k = std::llround(t / dt);
    if (t < 0.0 || k > steps) {
      throw std::invalid_argument("trajectory: snapshot time outside [0, t_final]");
    }
    snapshot_steps.push_back(k);
  }

  TrajectoryRecord rec;
  rec.n_atoms = n;
  rec.decay = gamma;
  rec.dt = dt;
  rec.seed = seed;
  rec.snapshots.resize(snapshot_steps.size());
  const auto n_records = static_cast<std::size_t>(steps / config.record_stride + 1);
  rec.times.reserve(n_records);
  rec.ne.reserve(n_records);

  auto excitation = [&](const CVector& v) {
    double acc = 0.0;
    for (int i = 1; i < d; ++i) acc += i * std::norm(v(i));
    return acc;  // sum_i i |psi_i|^2 = <S_z + S>
  };
  auto record = [&](long long k, double occupied) {
    if (k % config.record_stride == 0) {
      rec.times.push_back(static_cast<double>(k) * dt);
      rec.ne.push_back(occupied / n);
    }
    for (std::size_t j = 0; j < snapshot_steps.size(); ++j) {
      if (snapshot_steps[j] == k) rec.snapshots[j] = psi;
    }
  };

  std::mt19937_64 rng(seed);
  CVector next(d);
  double occupied = excitation(psi);
  record(0, occupied);
  for (long long k = 0; k < steps; ++k) {
    const double p_jump = dt * gamma * occupied;
    if (p_jump > kMaxJumpProbability) {
      throw StepSizeError("dt too large: jump probability " + std::to_string(p_jump) +
                          " exceeds " + std::to_string(kMaxJumpProbability) +
                          " (dt = " + std::to_string(dt) + ")");
    }
    if (uniform01(rng) < p_jump) {
      // L|M> ~ sqrt(M + S)|M - 1>; the sqrt(gamma) prefactor drops out on normalization.
      for (int i = 1; i < d; ++i) next(i - 1) = std::sqrt(static_cast<double>(i)) * psi(i);
      next(d - 1) = 0.0;
      rec.jump_times.push_back(static_cast<double>(k + 1) * dt);
    } else {
      next.noalias() = prop.no_jump * psi;
    }
    psi = next / next.norm();
    rec.max_norm_error = std::max(rec.max_norm_error, std::abs(psi.norm() - 1.0));
    occupied = excitation(psi);
    record(k + 1, occupied);
  }
  return rec;
}

}  // namespace

TrajectoryRecord evolve_trajectory(const ModelParams& params, const TrajectoryConfig& config) {
  return run_one(make_propagator(params, config), config, config.seed);
}

std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<TrajectoryRecord> run_ensemble(const ModelParams& params,
                                           const TrajectoryConfig& config, int count,
                                           int jobs) {
  if (count < 0) throw std::invalid_argument("run_ensemble: negative count");
  const Propagator prop = make_propagator(params, config);
  std::vector<TrajectoryRecord> out(static_cast<std::size_t>(count));
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = run_one(prop, config, trajectory_seed(config.seed, i));
  });
  return out;
}

void detect_switches(TrajectoryRecord& record, const SwitchDetector& detector) {
  detector.validate();
  record.switches.clear();
  const std::size_t n = record.ne.size();
  if (n == 0) return;

  // Centred moving average over `smoothing_window` time units.
  std::vector<double> smooth(record.ne);
  if (n > 1) {
    const double spacing = record.times[1] - record.times[0];
    const auto half = static_cast<std::size_t>(std::floor(0.5 * detector.smoothing_window / spacing));
    if (half > 0) {
      std::vector<double> prefix(n + 1, 0.0);
      for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + record.ne[i];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        smooth[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
      }
    }
  }

  enum class Phase { Unknown, Dark, Bright };
  Phase phase = Phase::Unknown;
  std::optional<SwitchEvent> pending;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = smooth[i];
    const double t = record.times[i];
    if (phase == Phase::Unknown) {
      if (x < detector.theta_dark) phase = Phase::Dark;
      if (x > detector.theta_bright) phase = Phase::Bright;
      continue;
    }
    if (pending) {
      const bool back = phase == Phase::Dark ? x < detector.theta_dark : x > detector.theta_bright;
      if (back) {
        pending.reset();  // excursion shorter than min_dwell
      } else if (t - pending->time >= detector.min_dwell) {
        record.switches.push_back(*pending);
        phase = phase == Phase::Dark ? Phase::Bright : Phase::Dark;
        pending.reset();
      }
      continue;
    }
    if (phase == Phase::Dark && x > detector.theta_bright) {
      pending = SwitchEvent{t, SwitchDirection::Upward};
    } else if (phase == Phase::Bright && x < detector.theta_dark) {
      pending = SwitchEvent{t, SwitchDirection::Downward};
    }
    if (pending && detector.min_dwell <= 0.0) {
      record.switches.push_back(*pending);
      phase = phase == Phase::Dark ? Phase::Bright : Phase::Dark;
      pending.reset();
    }
  }
}

void detect_switches(TrajectoryRecord& record, const std::vector<FixedPoint>& fixed_points,
                     const SwitchDetector& detector) {
  check_bracketing(detector, fixed_points);
  detect_switches(record, detector);
}

WaitingTimes collect_waiting_times(const std::vector<TrajectoryRecord>& records) {
  WaitingTimes w;
  for (const TrajectoryRecord& r : records) {
    for (std::size_t i = 1; i < r.switches.size(); ++i) {
      const double dwell = r.switches[i].time - r.switches[i - 1].time;
      if (r.switches[i].direction == SwitchDirection::Upward) {
        w.dark.push_back(dwell);
      } else {
        w.bright.push_back(dwell);
      }
    }
  }
  return w;
}

DwellSummary summarize(const std::vector<double>& samples, int min_samples) {
  DwellSummary s;
  s.count = static_cast<int>(samples.size());
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double x : samples) sum += x;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - s.mean) * (x - s.mean);
    s.stderr_mean = std::sqrt(ss / (s.count - 1) / s.count);
  }
  s.sufficient = s.count >= min_samples && s.mean > 0.0;
  return s;
}

namespace {

std::optional<ExpFit> fit_sufficient(const std::vector<int>& sizes,
                                     const std::vector<DwellSummary>& cells,
                                     std::vector<int>& used) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (cells[i].sufficient) {
      used.push_back(sizes[i]);
      x.push_back(sizes[i]);
      y.push_back(cells[i].mean);
    }
  }
  if (x.size() < 4) return std::nullopt;
  return fit_exponential(Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())),
                         Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())));
}

}  // namespace

SwitchStats waiting_time_stats(const std::vector<WaitingTimes>& per_size,
                               const std::vector<int>& sizes, int min_samples) {
  if (per_size.size() != sizes.size()) {
    throw std::invalid_argument("waiting_time_stats: one WaitingTimes per size required");
  }
  SwitchStats st;
  st.sizes = sizes;
  for (const WaitingTimes& w : per_size) {
    st.dark.push_back(summarize(w.dark, min_samples));
    st.bright.push_back(summarize(w.bright, min_samples));
  }
  st.fit_dark = fit_sufficient(sizes, st.dark, st.fit_sizes_dark);
  st.fit_bright = fit_sufficient(sizes, st.bright, st.fit_sizes_bright);
  return st;
}

BinnedPDF trajectory_pdf(const std::vector<TrajectoryRecord>& records, double half_width) {
  std::vector<double> values;
  for (const TrajectoryRecord& r : records) {
    const double start = r.burn_in();
    for (std::size_t i = 0; i < r.ne.size(); ++i) {
      if (r.times[i] >= start) values.push_back(r.ne[i]);
    }
  }
  return bin_weighted(values, std::vector<double>(values.size(), 1.0), half_width);
}

double relaxation_time(double t_bright, double t_dark) {
  if (!(t_bright > 0.0) || !(t_dark > 0.0)) {
    throw std::invalid_argument("relaxation_time: waiting times must be positive");
  }
  return 1.0 / (1.0 / t_bright + 1.0 / t_dark);
}

RelaxationScaling relaxation_times(const SwitchStats& stats) {
  RelaxationScaling rs;
  for (std::size_t i = 0; i < stats.sizes.size(); ++i) {
    if (stats.dark[i].sufficient && stats.bright[i].sufficient) {
      rs.sizes.push_back(stats.sizes[i]);
      rs.tau.push_back(relaxation_time(stats.bright[i].mean, stats.dark[i].mean));
    }
  }
  if (rs.sizes.size() >= 2) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(rs.sizes.size()));
    Eigen::VectorXd y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) = rs.sizes[static_cast<std::size_t>(i)];
      y(i) = rs.tau[static_cast<std::size_t>(i)];
    }
    rs.fit = fit_exponential(x, y);
  }
  return rs;
}

}  // namespace metaswitch
