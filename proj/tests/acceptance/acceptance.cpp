// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as arguments to
// run a subset, e.g. `acceptance 1 2 11`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "metaswitch/compare.hpp"
#include "metaswitch/config.hpp"
#include "metaswitch/instanton.hpp"
#include "metaswitch/large_deviation.hpp"
#include "metaswitch/meanfield.hpp"
#include "metaswitch/qjmc.hpp"
#include "metaswitch/runner.hpp"
#include "metaswitch/spectral.hpp"
#include "../test_util.hpp"

using namespace metaswitch;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ModelParams at(int n, double delta) {
  ModelParams p;
  p.n_atoms = n;
  p.detuning = delta;
  return p;
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

// Collects failed checks and a short human-readable trail.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    if (!ok) {
      ok_ = false;
      failures_.push_back(what);
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return ok_; }
  std::string text() const {
    std::string out;
    for (const auto& n : notes_) out += (out.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + std::string("FAILED ") + f;
    return out;
  }

 private:
  bool ok_ = true;
  std::vector<std::string> notes_;
  std::vector<std::string> failures_;
};

// ---------------------------------------------------------------------------------------
// Shared, lazily computed data

struct SpectralPoint {
  double gap = 0.0;
  std::optional<double> r;
  std::optional<MetastableManifold> mm;
  std::string error;
};

std::map<std::pair<long long, int>, SpectralPoint>& spectral_cache() {
  static std::map<std::pair<long long, int>, SpectralPoint> cache;
  return cache;
}

const SpectralPoint& spectral_point(double delta, int n) {
  const auto key = std::make_pair(std::llround(delta * 1e9), n);
  auto& cache = spectral_cache();
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  SpectralPoint sp;
  const SpectrumResult s = full_spectrum(at(n, delta));
  sp.gap = s.gap();
  try {
    sp.mm = extract_mm(s);
    sp.r = occupation_stats(*sp.mm, s).r;
  } catch (const std::exception& e) {
    sp.error = e.what();
  }
  return cache.emplace(key, std::move(sp)).first->second;
}

const std::vector<int> kRatioSizes{8, 12, 16, 20, 24, 28};

SpectralSeries spectral_series(double delta) {
  SpectralSeries s;
  s.delta = delta;
  for (int n : kRatioSizes) {
    const SpectralPoint& sp = spectral_point(delta, n);
    if (!sp.r) continue;
    s.sizes.push_back(n);
    s.r.push_back(*sp.r);
    s.gaps.push_back(sp.gap);
  }
  return s;
}

// Waiting times for one (delta, N), sampled in independent chunks until both directions have
// `target` completed dwells or the step budget is spent. Deterministic in the seed.
struct SwitchSample {
  WaitingTimes waits;
  double simulated_time = 0.0;
  double steps = 0.0;
};

constexpr std::uint64_t kSeed = 20240611;
constexpr int kTargetDwells = 30;

SwitchSample sample_switches(double delta, int n, double step_budget) {
  const ModelParams p = at(n, delta);
  const SwitchDetector det = default_detector(p);
  const double dt = default_dt(p);
  const std::uint64_t base =
      trajectory_seed(trajectory_seed(kSeed, static_cast<std::uint64_t>(n)),
                      static_cast<std::uint64_t>(std::llround(delta * 1e6)));
  SwitchSample out;
  for (std::uint64_t chunk = 0;; ++chunk) {
    const bool enough = static_cast<int>(out.waits.dark.size()) >= kTargetDwells &&
                        static_cast<int>(out.waits.bright.size()) >= kTargetDwells;
    if (enough || out.steps >= step_budget) break;
    // Chunks much longer than the dwells seen so far keep censoring losses small.
    double longest_mean = 0.0;
    for (const auto* w : {&out.waits.dark, &out.waits.bright}) {
      if (!w->empty()) {
        double m = 0.0;
        for (double x : *w) m += x;
        longest_mean = std::max(longest_mean, m / static_cast<double>(w->size()));
      }
    }
    TrajectoryConfig tc;
    tc.dt = dt;
    tc.seed = trajectory_seed(base, chunk);
    tc.record_stride = std::max(1, static_cast<int>(std::lround(0.1 / dt)));
    tc.t_final = std::max(5000.0, 20.0 * longest_mean);
    tc.t_final = std::min(tc.t_final, (step_budget - out.steps) * dt + 1.0);
    TrajectoryRecord rec = evolve_trajectory(p, tc);
    detect_switches(rec, det);
    const WaitingTimes w = collect_waiting_times({rec});
    out.waits.dark.insert(out.waits.dark.end(), w.dark.begin(), w.dark.end());
    out.waits.bright.insert(out.waits.bright.end(), w.bright.begin(), w.bright.end());
    out.simulated_time += tc.t_final;
    out.steps += tc.t_final / dt;
  }
  return out;
}

struct SwitchPlan {
  double delta;
  std::vector<int> sizes;
  double step_budget;  // per size
};

// The largest sizes are dropped when the fitted law predicts that twenty dwells of each
// kind would not fit into the step budget.
const std::vector<SwitchPlan> kSwitchPlans{
    {3.2, {12, 14, 16, 18, 20, 22}, 1.5e8},
    {3.4, {12, 16, 20, 24, 28, 32}, 4.5e8},
    {3.6, {12, 14, 16, 18, 20, 22}, 1.5e8},
    {3.8, {8, 10, 12, 14, 16}, 1.5e8},
};

struct SwitchSeries {
  QjmcSeries series;
  std::vector<std::string> log;
};

std::map<long long, SwitchSeries>& switch_cache() {
  static std::map<long long, SwitchSeries> cache;
  return cache;
}

const SwitchSeries& switch_series(const SwitchPlan& plan) {
  const long long key = std::llround(plan.delta * 1e9);
  auto& cache = switch_cache();
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  SwitchSeries out;
  std::vector<WaitingTimes> per_size;
  std::vector<int> sizes;
  for (int n : plan.sizes) {
    if (sizes.size() >= 3) {
      // Predict mean dwells at n from a fit through the sizes sampled so far.
      const SwitchStats partial = waiting_time_stats(per_size, sizes);
      std::vector<double> xs, td, tb;
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!partial.dark[i].sufficient || !partial.bright[i].sufficient) continue;
        xs.push_back(sizes[i]);
        td.push_back(partial.dark[i].mean);
        tb.push_back(partial.bright[i].mean);
      }
      if (xs.size() >= 2) {
        const Eigen::Index k = static_cast<Eigen::Index>(xs.size());
        const Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), k);
        const ExpFit fd = fit_exponential(x, Eigen::Map<Eigen::VectorXd>(td.data(), k));
        const ExpFit fb = fit_exponential(x, Eigen::Map<Eigen::VectorXd>(tb.data(), k));
        const double cycle =
            fd.prefactor * std::exp(fd.rate * n) + fb.prefactor * std::exp(fb.rate * n);
        const double needed = 21.0 * cycle / default_dt(at(n, plan.delta));
        if (needed > plan.step_budget) {
          out.log.push_back("N=" + std::to_string(n) + " skipped (predicted " + fmt(needed, 2) +
                            " steps)");
          break;
        }
      }
    }
    const SwitchSample s = sample_switches(plan.delta, n, plan.step_budget);
    out.log.push_back("N=" + std::to_string(n) + ": " + std::to_string(s.waits.dark.size()) +
                      "d/" + std::to_string(s.waits.bright.size()) + "b in t=" +
                      fmt(s.simulated_time, 3));
    per_size.push_back(s.waits);
    sizes.push_back(n);
  }
  out.series = {plan.delta, waiting_time_stats(per_size, sizes)};
  return cache.emplace(key, std::move(out)).first->second;
}

const std::vector<double> kInstantonGrid{3.1, 3.2, 3.3, 3.4, 3.5, 3.6, 3.7, 3.8, 3.9, 4.0, 4.1};

struct InstantonSweep {
  std::vector<Quasipotential> q;
  double seconds = 0.0;
};

const InstantonSweep& instanton_sweep() {
  static const InstantonSweep sweep = [] {
    const auto t0 = Clock::now();
    InstantonSweep s;
    s.q = quasipotential_sweep(kInstantonGrid, ModelParams{});
    s.seconds = seconds_since(t0);
    return s;
  }();
  return sweep;
}

// ---------------------------------------------------------------------------------------
// Criteria

Report phase_diagram_criterion() {
  Report rep;
  const auto t0 = Clock::now();
  const PhaseDiagram pd = phase_diagram(uniform_grid(2.0, 5.0, 301), ModelParams{});
  const auto fps = find_fixed_points(at(1, 3.4));
  const double secs = seconds_since(t0);
  rep.check(pd.boundaries.size() == 2, "two boundaries");
  if (pd.boundaries.size() == 2) {
    rep.note("boundaries " + fmt(pd.boundaries[0], 6) + ", " + fmt(pd.boundaries[1], 6));
    rep.check(pd.boundaries[0] > 2.9 && pd.boundaries[0] < 3.1, "lower boundary in (2.9, 3.1)");
    rep.check(pd.boundaries[1] > 4.1 && pd.boundaries[1] < 4.3, "upper boundary in (4.1, 4.3)");
  }
  std::vector<Regime> seq;
  for (const auto& l : pd.labels) {
    if (seq.empty() || seq.back() != l.regime) seq.push_back(l.regime);
  }
  rep.check(seq == std::vector<Regime>{Regime::MonostableI, Regime::Bistable, Regime::MonostableII},
            "regime order I, bistable, II");
  int stable = 0, unstable = 0;
  for (const auto& fp : fps) (fp.stability == Stability::Stable ? stable : unstable)++;
  rep.note("delta=3.4: " + std::to_string(stable) + " stable, " + std::to_string(unstable) +
           " unstable");
  rep.check(stable == 2 && unstable == 1 && fps.size() == 3, "2 stable + 1 unstable at 3.4");
  rep.note("runtime " + fmt(secs, 3) + " s");
  rep.check(secs < 1.0, "runtime < 1 s");
  return rep;
}

Report single_atom_criterion() {
  Report rep;
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (double delta : {-2.0, 0.0, 0.7, 3.4}) {
    for (double rabi : {0.5, 1.5, 4.0}) {
      ModelParams p = at(1, delta);
      p.rabi = rabi;
      p.interaction = 0.0;
      const Eigen::VectorXcd got = full_spectrum(p).eigenvalues;
      const Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(
          metaswitch::testing::optical_bloch_oracle(rabi, delta, 1.0));
      worst = std::max({worst, metaswitch::testing::spectrum_distance(got, es.eigenvalues()),
                        metaswitch::testing::spectrum_distance(es.eigenvalues(), got)});
    }
  }
  const double secs = seconds_since(t0);
  rep.note("max eigenvalue distance " + fmt(worst, 3) + ", runtime " + fmt(secs, 3) + " s");
  rep.check(worst < 1e-9, "spectrum within 1e-9");
  rep.check(secs < 1.0, "runtime < 1 s");
  return rep;
}

Report gap_scaling_criterion() {
  Report rep;
  std::vector<int> sizes;
  for (int n = 8; n <= 36; n += 4) sizes.push_back(n);
  for (double delta : {2.4, 3.4, 4.4}) {
    const GapScaling g = gap_scaling(at(1, delta), sizes);
    rep.note("delta=" + fmt(delta) + ": a=" + fmt(g.fit.rate) + " R2=" + fmt(g.fit.r2) +
             (g.excluded.empty() ? "" : " excluded " + std::to_string(g.excluded.size())));
    rep.check(g.sizes.size() == sizes.size(), "all sizes gapped at " + fmt(delta));
    if (delta < 3.0) {
      rep.check(std::abs(g.fit.rate) < 0.02, "|a| < 0.02 at " + fmt(delta));
    } else {
      rep.check(g.fit.rate < -0.05, "a < -0.05 at " + fmt(delta));
      rep.check(g.fit.r2 > 0.98, "R2 > 0.98 at " + fmt(delta));
    }
  }
  return rep;
}

Report manifold_criterion() {
  Report rep;
  const SpectrumResult s28 = full_spectrum(at(28, 3.4));
  const MetastableManifold mm = extract_mm(s28);
  const double overlap = std::abs((mm.rho_plus * mm.rho_minus).trace());
  rep.note("<rho+,rho->=" + fmt(overlap, 3));
  rep.check(overlap < 1e-10, "orthogonal to 1e-10");
  for (const Operator* rho : {&mm.rho_plus, &mm.rho_minus}) {
    rep.check(std::abs(rho->trace() - cplx(1.0)) < 1e-10, "unit trace");
    const Eigen::SelfAdjointEigenSolver<Operator> es(0.5 * (*rho + rho->adjoint()));
    rep.check(es.eigenvalues().minCoeff() > -1e-10, "positive semidefinite");
  }
  const SpectralPoint& p16 = spectral_point(3.4, 16);
  const SpectralPoint& p28 = spectral_point(3.4, 28);
  if (!p16.mm || !p28.mm) {
    rep.check(false, "manifold at N=16 and N=28");
    return rep;
  }
  rep.note("mm_error N=16 " + fmt(p16.mm->mm_error) + ", N=28 " + fmt(p28.mm->mm_error));
  rep.check(p28.mm->mm_error < p16.mm->mm_error, "mm_error decreases");
  const RegimeLabel label = classify_regime(at(28, 3.4));
  rep.note("n_e+ " + fmt(mm.ne_plus) + " vs " + fmt(label.stable_ne.at(0)) + ", n_e- " +
           fmt(mm.ne_minus) + " vs " + fmt(label.stable_ne.at(1)));
  rep.check(std::abs(mm.ne_plus - label.stable_ne.at(0)) < 0.05, "dark density within 0.05");
  rep.check(std::abs(mm.ne_minus - label.stable_ne.at(1)) < 0.05, "bright density within 0.05");
  return rep;
}

Report occupation_criterion() {
  Report rep;
  std::vector<double> slopes;
  for (double delta : {3.2, 3.4, 3.8}) {
    const SpectralSeries s = spectral_series(delta);
    const auto ex = spectral_exponents(s);
    rep.check(s.sizes.size() == kRatioSizes.size(), "ratio at every size for " + fmt(delta));
    if (!ex.ln_r) {
      rep.check(false, "ln r fit at " + fmt(delta));
      continue;
    }
    rep.note("delta=" + fmt(delta) + ": slope " + fmt(ex.ln_r->slope) + " R2 " +
             fmt(ex.ln_r->r2));
    rep.check(ex.ln_r->r2 > 0.95, "R2 > 0.95 at " + fmt(delta));
    slopes.push_back(ex.ln_r->slope);
  }
  rep.check(slopes.size() == 3 && slopes[0] < 0 && slopes[1] < 0 && slopes[2] > 0,
            "slope sign flips from negative to positive");
  return rep;
}

Report ld_criterion() {
  Report rep;
  double worst_theta0 = 0.0, worst_rate = 0.0;
  for (double delta : {2.4, 3.4, 4.4}) {
    for (int n : {4, 8, 12, 16}) {
      const ModelParams p = at(n, delta);
      worst_theta0 = std::max(worst_theta0, std::abs(scgf_at(p, 0.0)));
      const double expected = n * excitation_density(full_spectrum(p).rho_ss);
      worst_rate = std::max(worst_rate, std::abs(mean_emission_rate(p) - expected) / expected);
    }
  }
  const std::vector<double> grid = uniform_grid(-0.5, 0.5, 101);
  for (double delta : {2.4, 3.4}) {
    const int n = 24;
    const ModelParams p = at(n, delta);
    const SCGFCurve c = scgf_refined(p, grid);
    for (std::size_t i = 0; i < c.s.size(); ++i) {
      if (c.s[i] == 0.0) worst_theta0 = std::max(worst_theta0, std::abs(c.theta[i]));
    }
    const RateFunction rf = legendre(c);
    const BimodalityReport b = bimodality_report(rf);
    const RegimeLabel label = classify_regime(p);
    std::string maxima;
    for (double k : b.maxima) maxima += " " + fmt(k);
    std::string mf;
    for (double ne : label.stable_ne) mf += " " + fmt(n * ne);
    rep.note("N=24 delta=" + fmt(delta) + ": maxima" + maxima + " (MF" + mf + ")");
    const int expected_modes = delta < 3.0 ? 1 : 2;
    rep.check(b.n_maxima == expected_modes,
              std::to_string(expected_modes) + " maxima at " + fmt(delta));
    if (b.n_maxima == expected_modes && label.stable_ne.size() == b.maxima.size()) {
      for (std::size_t i = 0; i < b.maxima.size(); ++i) {
        const double target = n * label.stable_ne[i];
        rep.check(std::abs(b.maxima[i] - target) < 0.1 * target,
                  "maximum within 10% of N n_e at " + fmt(delta));
      }
    }
  }
  rep.note("max |theta(0)| " + fmt(worst_theta0, 3) + ", max rel rate error " +
           fmt(worst_rate, 3));
  rep.check(worst_theta0 < 1e-9, "theta(0) = 0");
  rep.check(worst_rate < 1e-3, "-theta'(0) = N n_e to 0.1%");
  return rep;
}

Report unraveling_criterion() {
  Report rep;
  const ModelParams p = at(4, 3.4);
  TrajectoryConfig cfg;
  cfg.t_final = 60.0;
  cfg.seed = kSeed;
  // The per-step scheme is first order in dt; a quarter of the default step keeps its bias
  // below the ensemble standard error during the initial transient.
  const double dt = 0.25 * default_dt(p);
  cfg.dt = dt;
  cfg.record_stride = static_cast<int>(std::lround(0.5 / dt));
  const int m = 2000;
  const auto ens = run_ensemble(p, cfg, m);
  CVector ground = CVector::Zero(p.dim());
  ground(0) = 1.0;
  const Operator rho0 = ground * ground.adjoint();
  int inside = 0;
  double worst = 0.0;
  for (int j = 1; j <= 20; ++j) {
    double sum = 0.0, sq = 0.0;
    for (const auto& r : ens) {
      sum += r.ne[j];
      sq += r.ne[j] * r.ne[j];
    }
    const double mean = sum / m;
    const double se = std::sqrt((sq / m - mean * mean) / (m - 1));
    const double exact =
        excitation_density(metaswitch::testing::propagate_dense(rho0, p, ens.front().times[j]));
    const double z = std::abs(mean - exact) / se;
    worst = std::max(worst, z);
    if (z < 3.0) ++inside;
  }
  rep.note(std::to_string(inside) + "/20 checkpoints within 3 SE (max " + fmt(worst, 3) + " SE)");
  rep.check(inside == 20, "all checkpoints within 3 SE");

  const double t_late = 20.0;
  std::vector<double> rates;
  for (const auto& r : ens) {
    const auto late = std::count_if(r.jump_times.begin(), r.jump_times.end(),
                                    [&](double t) { return t > t_late; });
    rates.push_back(static_cast<double>(late) / (cfg.t_final - t_late));
  }
  const DwellSummary s = summarize(rates, 1);
  const double expected = p.n_atoms * excitation_density(full_spectrum(p).rho_ss);
  const double z = std::abs(s.mean - expected) / s.stderr_mean;
  rep.note("jump rate " + fmt(s.mean) + " vs " + fmt(expected) + " (" + fmt(z, 3) + " SE)");
  rep.check(z < 3.0, "jump rate within 3 SE");
  return rep;
}

Report waiting_time_criterion() {
  Report rep;
  std::vector<double> v_d, v_b;
  for (const SwitchPlan& plan : kSwitchPlans) {
    const SwitchSeries& ss = switch_series(plan);
    for (const auto& l : ss.log) rep.note("delta=" + fmt(plan.delta) + " " + l);
    const SwitchStats& st = ss.series.stats;
    if (!st.fit_dark || !st.fit_bright) {
      rep.check(false, "waiting-time fits at " + fmt(plan.delta));
      v_d.push_back(NAN);
      v_b.push_back(NAN);
      continue;
    }
    rep.note("delta=" + fmt(plan.delta) + ": v_d " + fmt(st.fit_dark->rate) + " (R2 " +
             fmt(st.fit_dark->r2) + ", " + std::to_string(st.fit_sizes_dark.size()) +
             " sizes), v_b " + fmt(st.fit_bright->rate) + " (R2 " + fmt(st.fit_bright->r2) +
             ", " + std::to_string(st.fit_sizes_bright.size()) + " sizes)");
    v_d.push_back(st.fit_dark->rate);
    v_b.push_back(st.fit_bright->rate);
    if (plan.delta == 3.4) {
      rep.check(st.fit_dark->r2 > 0.9 && st.fit_bright->r2 > 0.9, "R2 > 0.9 at 3.4");
      rep.check(st.fit_sizes_dark.front() == 12 && st.fit_sizes_bright.front() == 12,
                "fit starts at N=12");
      rep.check(st.fit_bright->rate > st.fit_dark->rate, "v_b > v_d at 3.4");
    }
  }
  for (std::size_t i = 1; i < v_d.size(); ++i) {
    rep.check(v_d[i] > v_d[i - 1], "v_d increasing at " + fmt(kSwitchPlans[i].delta));
    rep.check(v_b[i] < v_b[i - 1], "v_b decreasing at " + fmt(kSwitchPlans[i].delta));
  }
  return rep;
}

Report instanton_criterion() {
  Report rep;
  const InstantonSweep& sw = instanton_sweep();
  std::vector<double> deltas, phi_d, phi_b, phi_db;
  for (const Quasipotential& q : sw.q) {
    const std::string at_delta = " at " + fmt(q.delta);
    rep.check(q.bistable && q.converged, "converged" + at_delta);
    if (!q.bistable) continue;
    rep.check(q.max_energy_residual < 1e-6, "|H| < 1e-6" + at_delta);
    rep.check(q.phi_d >= 0.0 && q.phi_b >= 0.0, "phi >= 0" + at_delta);
    for (const InstantonPath* path : {&q.dark_path, &q.bright_path}) {
      rep.check(path->deterministic_action < 1e-8, "deterministic action < 1e-8" + at_delta);
    }
    deltas.push_back(q.delta);
    phi_d.push_back(q.phi_d);
    phi_b.push_back(q.phi_b);
    phi_db.push_back(q.phi_db);
  }
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    rep.check(phi_d[i] > phi_d[i - 1], "phi_d increasing at " + fmt(deltas[i]));
    rep.check(phi_b[i] < phi_b[i - 1], "phi_b decreasing at " + fmt(deltas[i]));
  }
  const auto crossing = zero_crossing(deltas, phi_db);
  rep.check(crossing.has_value(), "crossing inside the window");
  if (crossing) rep.note("phi_d = phi_b at delta " + fmt(*crossing));
  double max_h = 0.0;
  for (const auto& q : sw.q) max_h = std::max(max_h, q.max_energy_residual);
  rep.note("max |H| " + fmt(max_h, 3) + ", " + fmt(sw.seconds / sw.q.size(), 3) + " s per delta");
  rep.check(sw.seconds / sw.q.size() < 60.0, "runtime < 1 min per delta");
  return rep;
}

Report cross_method_criterion() {
  Report rep;
  ComparisonInputs in;
  for (const SwitchPlan& plan : kSwitchPlans) {
    in.spectral.push_back(spectral_series(plan.delta));
    in.qjmc.push_back(switch_series(plan).series);
  }
  in.instanton = instanton_sweep().q;
  const ComparisonTable t = compare_methods(in);
  std::vector<double> d, spec, qjmc, inst, tau;
  for (const ComparisonRow& r : t.rows) {
    d.push_back(r.delta);
    spec.push_back(r.phi_db_spectral);
    qjmc.push_back(r.phi_db_qjmc);
    inst.push_back(r.phi_db_instanton);
    tau.push_back(r.tau_exponent_qjmc);
    rep.note("delta=" + fmt(r.delta) + ": " + fmt(r.phi_db_spectral) + " / " +
             fmt(r.phi_db_qjmc) + " / " + fmt(r.phi_db_instanton) + ", tau exponent " +
             fmt(r.tau_exponent_qjmc));
    const bool agree = (r.phi_db_spectral > 0) == (r.phi_db_qjmc > 0) &&
                       (r.phi_db_qjmc > 0) == (r.phi_db_instanton > 0);
    rep.check(agree, "signs agree at " + fmt(r.delta));
  }
  rep.check(t.rows.size() == kSwitchPlans.size(), "every detuning compared");
  const auto cs = zero_crossing(d, spec);
  const auto cq = zero_crossing(d, qjmc);
  const auto ci = zero_crossing(d, inst);
  const auto peak = peak_location(d, tau);
  if (!cs || !cq || !ci || !peak) {
    rep.check(false, "crossings and tau peak exist");
    return rep;
  }
  rep.note("crossings " + fmt(*cs) + " / " + fmt(*cq) + " / " + fmt(*ci) + ", tau peak " +
           fmt(*peak));
  const double lo = std::min({*cs, *cq, *ci});
  const double hi = std::max({*cs, *cq, *ci});
  rep.check(hi - lo < 0.2, "crossings within 0.2");
  rep.check(std::abs(*peak - *ci) < 0.3 && std::abs(*peak - *cs) < 0.3 &&
                std::abs(*peak - *cq) < 0.3,
            "tau peak within 0.3 of the crossings");
  return rep;
}

std::map<std::string, std::string> manifest_hashes(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  const nlohmann::json m = nlohmann::json::parse(in);
  std::map<std::string, std::string> out;
  for (const auto& f : m.at("files")) out[f.at("path")] = f.at("sha256");
  return out;
}

Report property_criterion() {
  Report rep;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  double trace_err = 0.0, herm_err = 0.0;
  for (int n = 1; n <= 10; ++n) {
    const ModelParams p = at(n, 2.0 + 0.3 * n);
    const Operator h = build_h_eff(p), l = build_jump_op(p);
    for (int k = 0; k < 20; ++k) {
      const Operator rho = metaswitch::testing::random_density_matrix(p.dim(), rng);
      const Operator out = apply_lindblad(rho, h, l);
      trace_err = std::max(trace_err, std::abs(out.trace()));
      herm_err = std::max(herm_err, metaswitch::testing::max_abs(out - out.adjoint()));
    }
    const Superoperator sup = build_superoperator(p);
    trace_err = std::max(
        trace_err, (trace_functional(p.dim()) * sup.matrix).cwiseAbs().maxCoeff());
  }
  rep.note("trace " + fmt(trace_err, 2) + ", hermiticity " + fmt(herm_err, 2));
  rep.check(trace_err < 1e-10, "trace preservation");
  rep.check(herm_err < 1e-10, "hermiticity preservation");

  double pair_err = 0.0;
  for (int n : {4, 8, 12}) {
    const Eigen::VectorXcd ev = full_spectrum(at(n, 3.4)).eigenvalues;
    pair_err = std::max(pair_err, metaswitch::testing::spectrum_distance(ev, ev.conjugate()));
  }
  rep.note("conjugate pairs " + fmt(pair_err, 2));
  rep.check(pair_err < 1e-8, "conjugate-pair spectrum");

  auto ball_point = [&] {
    Eigen::Vector3d m;
    do m = {uni(rng), uni(rng), uni(rng)};
    while (m.norm() > 1.0);
    return m;
  };
  double max_norm = 0.0;
  for (int k = 0; k < 100; ++k) {
    const ModelParams p = at(1, 2.0 + 3.0 * (k % 10) / 9.0);
    const MFTrajectory tr = integrate_mf(BlochState::from(ball_point()), p, 20.0, 0.01, 10);
    for (const auto& s : tr.states) max_norm = std::max(max_norm, s.norm());
  }
  rep.note("max |m| " + fmt(max_norm, 12));
  rep.check(max_norm <= 1.0 + 1e-9, "unit ball invariance");

  double min_eig = 1.0;
  for (int k = 0; k < 10000; ++k) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(noise_covariance(ball_point()));
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  rep.note("min noise eigenvalue " + fmt(min_eig, 3));
  rep.check(min_eig >= -1e-12, "noise matrix PSD on the ball");

  double involution = 0.0;
  for (double delta : {2.4, 3.4}) {
    const SCGFCurve c = scgf_refined(at(8, delta), uniform_grid(-1.0, 1.0, 81));
    const RateFunction rf = legendre(c);
    for (std::size_t i = 1; i + 1 < c.s.size(); ++i) {
      involution = std::max(involution, std::abs(theta_from_rate(rf, c.s[i]) - c.theta[i]));
    }
  }
  rep.note("legendre involution " + fmt(involution, 3));
  rep.check(involution < 1e-4, "legendre involution");

  TrajectoryConfig tc;
  tc.t_final = 50.0;
  tc.seed = 11;
  const TrajectoryRecord r1 = evolve_trajectory(at(6, 3.4), tc);
  const TrajectoryRecord r2 = evolve_trajectory(at(6, 3.4), tc);
  rep.check(r1.ne == r2.ne && r1.jump_times == r2.jump_times, "trajectory rerun identical");

  const fs::path root = fs::temp_directory_path() / "metaswitch_acceptance";
  std::vector<std::map<std::string, std::string>> hashes;
  for (const char* name : {"a", "b"}) {
    const fs::path dir = root / name;
    fs::remove_all(dir);
    const nlohmann::json j = {{"sweep", {{"N_list", {3, 4}}, {"delta_list", {3.4}}}},
                              {"output_dir", dir.string()},
                              {"seed", 7},
                              {"phase_diagram", {{"points", 11}}},
                              {"ld", {{"points", 21}, {"refine_rounds", 0}}},
                              {"trajectories", {{"t_final", 40}, {"count", 2}, {"min_switches", 1}}},
                              {"instanton", {{"points", 30}}}};
    const RunReport r = run(parse_config(j));
    rep.check(r.ok(), std::string("run ") + name + " succeeded");
    hashes.push_back(manifest_hashes(dir));
  }
  rep.note(std::to_string(hashes[0].size()) + " files hashed");
  rep.check(!hashes[0].empty() && hashes[0] == hashes[1], "byte-identical reruns");

  const double secs = seconds_since(t0);
  rep.note("runtime " + fmt(secs, 3) + " s");
  rep.check(secs < 120.0, "runtime < 2 min");
  return rep;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Report()>>> criteria{
      {1, phase_diagram_criterion},   {2, single_atom_criterion}, {3, gap_scaling_criterion},
      {4, manifold_criterion},        {5, occupation_criterion},  {6, ld_criterion},
      {7, unraveling_criterion},      {8, waiting_time_criterion}, {9, instanton_criterion},
      {10, cross_method_criterion},   {11, property_criterion},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Report rep;
    try {
      rep = fn();
    } catch (const std::exception& e) {
      rep.check(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    std::printf("criterion %2d: %s  [%.1f s]  %s\n", id, rep.ok() ? "PASS" : "FAIL", secs,
                rep.text().c_str());
    std::fflush(stdout);
    if (!rep.ok()) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
