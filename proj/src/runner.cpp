#include "metaswitch/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>

#include <gsl/gsl_version.h>
#include <openssl/opensslv.h>

#include "metaswitch/compare.hpp"
#include "metaswitch/instanton.hpp"
#include "metaswitch/io.hpp"
#include "metaswitch/large_deviation.hpp"
#include "metaswitch/meanfield.hpp"
#include "metaswitch/parallel.hpp"
#include "metaswitch/qjmc.hpp"
#include "metaswitch/spectral.hpp"

namespace metaswitch {

bool RunReport::ok() const {
  return std::all_of(tasks.begin(), tasks.end(), [](const TaskOutcome& t) { return t.ok; });
}

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "1.0.0";
// Concurrent dense spectral work is limited to this many bytes of estimated storage.
constexpr double kSpectralMemoryBudget = 4e9;

std::string tag(int n, double delta) {
  return "N" + std::to_string(n) + "_delta" + format_number(delta);
}

std::string delta_tag(double delta) { return "delta" + format_number(delta); }

double superop_bytes(int n, int copies) {
  const double side = std::pow(static_cast<double>(n + 1), 2.0);
  return side * side * 16.0 * copies;
}

struct Item {
  double delta;
  int n;
};

class Runner {
 public:
  explicit Runner(const RunConfig& c) : cfg_(c), out_(c.output_dir) {}

  RunReport run();

 private:
  const RunConfig& cfg_;
  fs::path out_;
  std::vector<fs::path> files_;
  std::vector<TaskOutcome> outcomes_;
  TaskOutcome* current_ = nullptr;

  std::optional<std::vector<SpectralSeries>> metastable_;
  std::optional<std::vector<QjmcSeries>> qjmc_;
  std::optional<std::vector<Quasipotential>> instanton_;

  ModelParams params(int n, double delta) const {
    ModelParams p = cfg_.model;
    p.n_atoms = n;
    p.detuning = delta;
    return p;
  }

  std::vector<Item> items() const {
    std::vector<Item> out;
    for (double d : cfg_.delta_list) {
      for (int n : cfg_.sizes()) out.push_back({d, n});
    }
    return out;
  }

  CsvWriter csv(const fs::path& rel, std::vector<std::string> header) {
    CsvWriter w(out_ / rel, std::move(header));
    files_.push_back(rel);
    return w;
  }

  void json_file(const fs::path& rel, const json& j) {
    write_json(out_ / rel, j);
    files_.push_back(rel);
  }

  void warn(const std::string& msg) {
    if (current_ != nullptr) current_->warnings.push_back(msg);
  }

  void execute(Task task, const std::function<void()>& body);

  void phase_diagram_task();
  void spectrum_task();
  void metastable_task();
  void ld_task();
  void trajectories_task();
  void instanton_task();
  void compare_task();
  void write_manifest();
};

void Runner::execute(Task task, const std::function<void()>& body) {
  outcomes_.push_back({});
  TaskOutcome& o = outcomes_.back();
  o.task = task;
  current_ = &o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const std::exception& e) {
    o.ok = false;
    o.error = e.what();
  }
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  current_ = nullptr;
}

RunReport Runner::run() {
  fs::create_directories(out_);
  const Task t = cfg_.task;
  auto want = [&](Task x) { return t == x || t == Task::All; };
  if (want(Task::PhaseDiagram)) execute(Task::PhaseDiagram, [&] { phase_diagram_task(); });
  if (want(Task::Spectrum)) execute(Task::Spectrum, [&] { spectrum_task(); });
  if (want(Task::Metastable)) execute(Task::Metastable, [&] { metastable_task(); });
  if (want(Task::LD)) execute(Task::LD, [&] { ld_task(); });
  if (want(Task::Trajectories)) execute(Task::Trajectories, [&] { trajectories_task(); });
  if (want(Task::Instanton)) execute(Task::Instanton, [&] { instanton_task(); });
  if (want(Task::Compare)) execute(Task::Compare, [&] { compare_task(); });
  write_manifest();
  RunReport report;
  report.tasks = outcomes_;
  report.files = files_;
  return report;
}

void Runner::phase_diagram_task() {
  const auto& o = cfg_.phase_diagram;
  const PhaseDiagram pd = phase_diagram(uniform_grid(o.delta_min, o.delta_max, o.points),
                                        params(1, cfg_.model.detuning), o.resolution, cfg_.jobs);
  CsvWriter w = csv("phase_diagram.csv", {"delta", "n_stable", "regime", "ne_1", "ne_2", "ne_unstable"});
  for (std::size_t i = 0; i < pd.deltas.size(); ++i) {
    const RegimeLabel& l = pd.labels[i];
    w.row({cell(pd.deltas[i]), cell(l.n_stable), cell(to_string(l.regime)),
           l.stable_ne.size() > 0 ? cell(l.stable_ne[0]) : CsvCell{},
           l.stable_ne.size() > 1 ? cell(l.stable_ne[1]) : CsvCell{}, cell(l.unstable_ne)});
  }
  CsvWriter b = csv("phase_boundaries.csv", {"delta"});
  for (double x : pd.boundaries) b.row({cell(x)});
}

void Runner::spectrum_task() {
  const std::vector<Item> it = items();
  std::vector<std::optional<Eigen::VectorXcd>> ev(it.size());
  std::vector<std::string> errors(it.size());
  budgeted_parallel_for(
      it.size(), cfg_.jobs, kSpectralMemoryBudget,
      [&](std::size_t i) { return superop_bytes(it[i].n, 2); },
      [&](std::size_t i) {
        try {
          ev[i] = sorted_eigenvalues(params(it[i].n, it[i].delta));
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });
  CsvWriter w = csv("spectrum.csv", {"N", "delta", "re_lambda1", "im_lambda1", "re_lambda2", "gap"});
  std::vector<SpectralSeries> series;
  for (std::size_t i = 0; i < it.size(); ++i) {
    if (series.empty() || series.back().delta != it[i].delta) series.push_back({it[i].delta, {}, {}, {}});
    if (!ev[i]) {
      warn(tag(it[i].n, it[i].delta) + ": " + errors[i]);
      continue;
    }
    const Eigen::VectorXcd& e = *ev[i];
    w.row({cell(it[i].n), cell(it[i].delta), cell(e(1).real()), cell(e(1).imag()),
           cell(e(2).real()), cell(-e(1).real())});
    series.back().sizes.push_back(it[i].n);
    series.back().gaps.push_back(-e(1).real());
  }
  CsvWriter f = csv("gap_fits.csv", {"delta", "rate", "prefactor", "r2"});
  for (const SpectralSeries& s : series) {
    const SpectralExponents ex = spectral_exponents(s);
    if (!ex.gap) continue;
    f.row({cell(s.delta), cell(ex.gap->rate), cell(ex.gap->prefactor), cell(ex.gap->r2)});
  }
}

void Runner::metastable_task() {
  const std::vector<Item> it = items();
  struct Result {
    MetastableManifold mm;
    OccupationStats occ;
    double gap = 0.0;
    std::optional<BinnedPDF> pdf_ss, pdf_plus, pdf_minus;
  };
  std::vector<std::optional<Result>> res(it.size());
  std::vector<std::string> errors(it.size());
  const double hw = cfg_.spectrum.pdf_half_width;
  budgeted_parallel_for(
      it.size(), cfg_.jobs, kSpectralMemoryBudget,
      [&](std::size_t i) { return superop_bytes(it[i].n, 4); },
      [&](std::size_t i) {
        try {
          const SpectrumResult spec = full_spectrum(params(it[i].n, it[i].delta));
          Result r;
          r.gap = spec.gap();
          r.mm = extract_mm(spec);
          r.occ = occupation_stats(r.mm, spec);
          if (cfg_.spectrum.write_pdfs) {
            r.pdf_ss = pdf_from_density_matrix(spec.rho_ss, hw);
            r.pdf_plus = pdf_from_density_matrix(r.mm.rho_plus, hw);
            r.pdf_minus = pdf_from_density_matrix(r.mm.rho_minus, hw);
          }
          r.mm.rho_plus.resize(0, 0);
          r.mm.rho_minus.resize(0, 0);
          r.mm.rho1_hermitian.resize(0, 0);
          res[i] = std::move(r);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });
  CsvWriter w = csv("mm.csv", {"N", "delta", "ne_ss", "ne_plus", "ne_minus", "d_plus", "d_minus", "r",
                               "mm_error"});
  std::vector<SpectralSeries> series;
  for (std::size_t i = 0; i < it.size(); ++i) {
    if (series.empty() || series.back().delta != it[i].delta) series.push_back({it[i].delta, {}, {}, {}});
    if (!res[i]) {
      warn(tag(it[i].n, it[i].delta) + ": " + errors[i]);
      continue;
    }
    const Result& r = *res[i];
    w.row({cell(it[i].n), cell(it[i].delta), cell(r.occ.ne_ss), cell(r.mm.ne_plus),
           cell(r.mm.ne_minus), cell(r.mm.d_plus), cell(r.mm.d_minus), cell(r.occ.r),
           cell(r.mm.mm_error)});
    series.back().sizes.push_back(it[i].n);
    series.back().r.push_back(r.occ.r);
    series.back().gaps.push_back(r.gap);
    const std::pair<const char*, const std::optional<BinnedPDF>*> pdfs[] = {
        {"ss", &r.pdf_ss}, {"plus", &r.pdf_plus}, {"minus", &r.pdf_minus}};
    for (const auto& [name, pdf] : pdfs) {
      if (!*pdf) continue;
      CsvWriter p = csv(fs::path("pdf") / ("pdf_" + tag(it[i].n, it[i].delta) + "_" + name + ".csv"),
                        {"center", "density"});
      for (std::size_t b = 0; b < (*pdf)->centers.size(); ++b) {
        p.row({cell((*pdf)->centers[b]), cell((*pdf)->densities[b])});
      }
    }
  }
  CsvWriter f = csv("occupation_fits.csv", {"delta", "ln_r_slope", "ln_r_intercept", "ln_r_r2"});
  for (const SpectralSeries& s : series) {
    const SpectralExponents ex = spectral_exponents(s);
    if (!ex.ln_r) continue;
    f.row({cell(s.delta), cell(ex.ln_r->slope), cell(ex.ln_r->intercept), cell(ex.ln_r->r2)});
  }
  metastable_ = std::move(series);
}

void Runner::ld_task() {
  const auto& o = cfg_.ld;
  CsvWriter summary = csv("ld_summary.csv", {"N", "delta", "theta0", "emission_rate", "n_maxima",
                                             "k_max_1", "k_max_2", "kink_s"});
  for (const Item& it : items()) {
    const ModelParams p = params(it.n, it.delta);
    try {
      RefineOptions ro;
      ro.factor = o.refine_factor;
      ro.rounds = o.refine_rounds;
      ro.prominence = o.prominence;
      const SCGFCurve curve = scgf_refined(p, uniform_grid(o.s_min, o.s_max, o.points), ro, cfg_.jobs);
      const fs::path dir = fs::path("ld") / tag(it.n, it.delta);
      {
        CsvWriter w = csv(dir / "scgf.csv", {"s", "theta"});
        for (std::size_t i = 0; i < curve.s.size(); ++i) {
          if (!curve.failed[i]) w.row({cell(curve.s[i]), cell(curve.theta[i])});
        }
      }
      const RateFunction rf = legendre(curve);
      {
        CsvWriter w = csv(dir / "rate_function.csv", {"k", "k_per_atom", "phi", "neg_phi"});
        const std::vector<double> kpa = rf.k_per_atom();
        for (std::size_t i = 0; i < rf.k.size(); ++i) {
          w.row({cell(rf.k[i]), cell(kpa[i]), cell(rf.phi[i]), cell(-rf.phi[i])});
        }
      }
      const BimodalityReport br = bimodality_report(rf, o.prominence, o.height_tol);
      summary.row({cell(it.n), cell(it.delta), cell(scgf_at(p, 0.0)), cell(mean_emission_rate(p)),
                   cell(br.n_maxima), br.maxima.size() > 0 ? cell(br.maxima[0]) : CsvCell{},
                   br.maxima.size() > 1 ? cell(br.maxima[1]) : CsvCell{},
                   br.kink_s.empty() ? CsvCell{} : cell(br.kink_s[0])});
    } catch (const std::invalid_argument& e) {
      warn(tag(it.n, it.delta) + ": " + e.what());
    } catch (const EigensolverError& e) {
      warn(tag(it.n, it.delta) + ": " + e.what());
    }
  }
}

void Runner::trajectories_task() {
  const auto& o = cfg_.trajectories;
  const std::vector<int> sizes = cfg_.sizes();
  CsvWriter sw = csv("switches.csv", {"N", "delta", "direction", "waiting_time"});
  CsvWriter summary = csv("waiting_summary.csv",
                          {"N", "delta", "dark_mean", "dark_stderr", "dark_count", "bright_mean",
                           "bright_stderr", "bright_count", "simulated_time"});
  CsvWriter fits = csv("waiting_fits.csv", {"delta", "v_d", "b_d", "v_b", "b_b", "r2_d", "r2_b"});
  CsvWriter relax = csv("relaxation.csv", {"N", "delta", "tau"});
  json sidecar = json::array();
  std::vector<QjmcSeries> series;
  for (double delta : cfg_.delta_list) {
    std::vector<WaitingTimes> per_size;
    for (int n : sizes) {
      const ModelParams p = params(n, delta);
      TrajectoryConfig tc;
      tc.dt = o.dt > 0.0 ? o.dt : default_dt(p);
      tc.t_final = o.t_final;
      tc.seed = trajectory_seed(trajectory_seed(cfg_.seed, static_cast<std::uint64_t>(n)),
                                static_cast<std::uint64_t>(std::llround(delta * 1e6)));
      tc.record_stride = o.record_stride > 0
                             ? o.record_stride
                             : std::max(1, static_cast<int>(std::lround(0.1 / (p.decay * tc.dt))));
      std::optional<SwitchDetector> det;
      const std::vector<FixedPoint> fps = find_fixed_points(p);
      try {
        SwitchDetector d = default_detector(p, o.threshold_fraction);
        d.min_dwell = o.min_dwell / p.decay;
        d.smoothing_window = o.smoothing_window / p.decay;
        check_bracketing(d, fps);
        det = d;
      } catch (const std::invalid_argument&) {
        warn(tag(n, delta) + ": not bistable, switches not detected");
      }
      std::vector<TrajectoryRecord> records = run_ensemble(p, tc, o.count, cfg_.jobs);
      double simulated = 0.0;
      for (TrajectoryRecord& r : records) {
        if (det) detect_switches(r, *det);
        simulated += r.times.empty() ? 0.0 : r.times.back();
      }
      for (int i = 0; i < std::min(o.saved_traces, o.count); ++i) {
        const TrajectoryRecord& r = records[static_cast<std::size_t>(i)];
        CsvWriter w = csv(fs::path("trajectories") /
                              ("trajectory_" + tag(n, delta) + "_" + std::to_string(i) + ".csv"),
                          {"t", "ne"});
        for (std::size_t k = 0; k < r.times.size(); ++k) w.row({cell(r.times[k]), cell(r.ne[k])});
      }
      const WaitingTimes wt = collect_waiting_times(records);
      for (double x : wt.dark) sw.row({cell(n), cell(delta), cell("upward"), cell(x)});
      for (double x : wt.bright) sw.row({cell(n), cell(delta), cell("downward"), cell(x)});
      const DwellSummary sd = summarize(wt.dark, o.min_switches);
      const DwellSummary sb = summarize(wt.bright, o.min_switches);
      summary.row({cell(n), cell(delta), sd.count ? cell(sd.mean) : CsvCell{},
                   sd.count > 1 ? cell(sd.stderr_mean) : CsvCell{}, cell(sd.count),
                   sb.count ? cell(sb.mean) : CsvCell{}, sb.count > 1 ? cell(sb.stderr_mean) : CsvCell{},
                   cell(sb.count), cell(simulated)});
      json entry = {{"N", n},
                    {"delta", delta},
                    {"seed", tc.seed},
                    {"dt", tc.dt},
                    {"t_final", tc.t_final},
                    {"count", o.count},
                    {"record_stride", tc.record_stride},
                    {"bistable", det.has_value()}};
      if (det) {
        entry["theta_dark"] = det->theta_dark;
        entry["theta_bright"] = det->theta_bright;
        entry["min_dwell"] = det->min_dwell;
        entry["smoothing_window"] = det->smoothing_window;
      }
      sidecar.push_back(entry);
      per_size.push_back(wt);
    }
    QjmcSeries qs{delta, waiting_time_stats(per_size, sizes, o.min_switches)};
    const SwitchStats& st = qs.stats;
    fits.row({cell(delta), st.fit_dark ? cell(st.fit_dark->rate) : CsvCell{},
              st.fit_dark ? cell(st.fit_dark->prefactor) : CsvCell{},
              st.fit_bright ? cell(st.fit_bright->rate) : CsvCell{},
              st.fit_bright ? cell(st.fit_bright->prefactor) : CsvCell{},
              st.fit_dark ? cell(st.fit_dark->r2) : CsvCell{},
              st.fit_bright ? cell(st.fit_bright->r2) : CsvCell{}});
    const RelaxationScaling rs = relaxation_times(st);
    for (std::size_t i = 0; i < rs.sizes.size(); ++i) {
      relax.row({cell(rs.sizes[i]), cell(delta), cell(rs.tau[i])});
    }
    series.push_back(std::move(qs));
  }
  json_file("trajectories.json", {{"master_seed", cfg_.seed}, {"runs", sidecar}});
  qjmc_ = std::move(series);
}

void Runner::instanton_task() {
  InstantonOptions opt;
  opt.points = cfg_.instanton.points;
  opt.endpoint_offset = cfg_.instanton.endpoint_offset;
  opt.max_cycles = cfg_.instanton.max_cycles;
  const std::vector<double>& deltas =
      cfg_.instanton.delta_list.empty() ? cfg_.delta_list : cfg_.instanton.delta_list;
  std::vector<Quasipotential> sweep = quasipotential_sweep(deltas, cfg_.model, opt, cfg_.jobs);
  CsvWriter w = csv("quasipotential.csv", {"delta", "phi_d", "phi_b", "phi_db"});
  CsvWriter d = csv("instanton_summary.csv",
                    {"delta", "converged", "energy_residual", "deterministic_action_d",
                     "deterministic_action_b", "cycles_d", "cycles_b"});
  for (Quasipotential& q : sweep) {
    if (!q.bistable) {
      w.row({cell(q.delta), CsvCell{}, CsvCell{}, CsvCell{}});
      warn(delta_tag(q.delta) + ": not bistable");
      continue;
    }
    if (!q.converged) warn(delta_tag(q.delta) + ": optimizer did not converge");
    w.row({cell(q.delta), cell(q.phi_d), cell(q.phi_b), cell(q.phi_db)});
    d.row({cell(q.delta), cell(q.converged ? 1 : 0), cell(q.max_energy_residual),
           cell(q.dark_path.deterministic_action), cell(q.bright_path.deterministic_action),
           cell(q.dark_path.cycles), cell(q.bright_path.cycles)});
    const std::pair<const char*, const InstantonPath*> paths[] = {{"dark", &q.dark_path},
                                                                  {"bright", &q.bright_path}};
    for (const auto& [name, path] : paths) {
      CsvWriter pw = csv(fs::path("instanton") / (delta_tag(q.delta) + "_" + name) / "instanton_path.csv",
                         {"arclength", "mx", "my", "mz", "qx", "qy", "qz", "dS"});
      for (std::size_t i = 0; i < path->points.size(); ++i) {
        const PhasePoint& x = path->points[i];
        pw.row({cell(path->arclength[i]), cell(x.m(0)), cell(x.m(1)), cell(x.m(2)), cell(x.q(0)),
                cell(x.q(1)), cell(x.q(2)), cell(path->increments[i])});
      }
    }
    q.dark_path = {};
    q.bright_path = {};
  }
  instanton_ = std::move(sweep);
}

void Runner::compare_task() {
  if (!metastable_) metastable_task();
  if (!qjmc_) trajectories_task();
  if (!instanton_) instanton_task();
  const ComparisonTable table = compare_methods({*metastable_, *qjmc_, *instanton_});
  CsvWriter w = csv("comparison.csv", {"delta", "phi_db_spectral", "phi_db_qjmc", "phi_db_instanton",
                                       "tau_exponent_spectral", "tau_exponent_qjmc"});
  std::vector<double> x, spectral, qjmc, inst, tau_q, tau_s;
  for (const ComparisonRow& r : table.rows) {
    w.row({cell(r.delta), cell(r.phi_db_spectral), cell(r.phi_db_qjmc), cell(r.phi_db_instanton),
           cell(r.tau_exponent_spectral), cell(r.tau_exponent_qjmc)});
    x.push_back(r.delta);
    spectral.push_back(r.phi_db_spectral);
    qjmc.push_back(r.phi_db_qjmc);
    inst.push_back(r.phi_db_instanton);
    tau_q.push_back(r.tau_exponent_qjmc);
    tau_s.push_back(r.tau_exponent_spectral);
  }
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json missing = json::array();
  for (const MissingRow& m : table.missing) {
    missing.push_back({{"delta", m.delta}, {"reason", m.reason}});
    warn(delta_tag(m.delta) + ": " + m.reason);
  }
  json_file("comparison_summary.json",
            {{"zero_crossing",
              {{"spectral", opt(zero_crossing(x, spectral))},
               {"qjmc", opt(zero_crossing(x, qjmc))},
               {"instanton", opt(zero_crossing(x, inst))}}},
             {"tau_peak", {{"qjmc", opt(peak_location(x, tau_q))}, {"spectral", opt(peak_location(x, tau_s))}}},
             {"missing", missing}});
}

void Runner::write_manifest() {
  json tasks = json::array();
  for (const TaskOutcome& o : outcomes_) {
    tasks.push_back({{"task", to_string(o.task)},
                     {"status", o.ok ? "ok" : "failed"},
                     {"error", o.error},
                     {"wall_seconds", o.seconds},
                     {"warnings", o.warnings}});
  }
  std::vector<fs::path> sorted = files_;
  std::sort(sorted.begin(), sorted.end());
  json files = json::array();
  for (const fs::path& f : sorted) {
    files.push_back({{"path", f.generic_string()},
                     {"sha256", sha256_file(out_ / f)},
                     {"bytes", fs::file_size(out_ / f)}});
  }
  const json manifest = {
      {"program", "metaswitch"},
      {"version", kVersion},
      {"versions",
       {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)},
        {"gsl", GSL_VERSION},
        {"openssl", OPENSSL_VERSION_TEXT},
        {"compiler", __VERSION__}}},
      {"config", config_to_json(cfg_)},
      {"seed", cfg_.seed},
      {"tasks", tasks},
      {"files", files}};
  write_json(out_ / "manifest.json", manifest);
  files_.push_back("manifest.json");
}

}  // namespace

RunReport run(const RunConfig& config) {
  config.validate();
  Runner r(config);
  return r.run();
}

}  // namespace metaswitch
