#include "metaswitch/config.hpp"

#include <array>
#include <fstream>
#include <set>
#include <utility>

namespace metaswitch {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<Task, const char*>, 8> kVerbs{{
    {Task::PhaseDiagram, "phase-diagram"},
    {Task::Spectrum, "spectrum"},
    {Task::Metastable, "metastable"},
    {Task::LD, "ld"},
    {Task::Trajectories, "trajectories"},
    {Task::Instanton, "instanton"},
    {Task::Compare, "compare"},
    {Task::All, "all"},
}};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

std::string to_string(Task t) {
  for (const auto& [task, verb] : kVerbs) {
    if (task == t) return verb;
  }
  return "unknown";
}

Task parse_task(const std::string& verb) {
  for (const auto& [task, name] : kVerbs) {
    if (verb == name) return task;
  }
  throw ConfigError("unknown task '" + verb + "'");
}

std::vector<int> RunConfig::sizes() const {
  std::vector<int> out;
  for (int n : n_list) {
    if (!max_n || n <= *max_n) out.push_back(n);
  }
  return out;
}

void RunConfig::validate() const {
  if (n_list.empty()) throw ConfigError("sweep.N_list is empty");
  if (delta_list.empty()) throw ConfigError("sweep.delta_list is empty");
  for (int n : n_list) {
    if (n < 1) throw ConfigError("sweep.N_list entries must be >= 1");
  }
  if (max_n && *max_n < 1) throw ConfigError("max_n must be >= 1");
  if (sizes().empty()) throw ConfigError("no entry of sweep.N_list is <= max_n");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(model.decay > 0.0)) throw ConfigError("model.decay must be > 0");
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  const auto& pd = phase_diagram;
  if (!(pd.delta_max > pd.delta_min) || pd.points < 2 || !(pd.resolution > 0.0)) {
    throw ConfigError("phase_diagram: need delta_max > delta_min, points >= 2, resolution > 0");
  }
  if (!(spectrum.pdf_half_width > 0.0) || spectrum.pdf_half_width > 0.5) {
    throw ConfigError("spectrum.pdf_half_width must be in (0, 0.5]");
  }
  if (!(ld.s_max > ld.s_min) || ld.points < 5 || ld.refine_rounds < 0 || ld.refine_factor < 2 ||
      !(ld.prominence > 1.0) || !(ld.height_tol > 0.0)) {
    throw ConfigError("ld: invalid grid or bimodality options");
  }
  if (!(ld.s_min < 0.0 && ld.s_max > 0.0)) throw ConfigError("ld: s grid must bracket 0");
  const auto& tr = trajectories;
  if (!(tr.t_final > 0.0) || tr.count < 1 || tr.saved_traces < 0 || tr.min_switches < 1 ||
      !(tr.threshold_fraction > 0.0 && tr.threshold_fraction < 1.0) || !(tr.min_dwell >= 0.0) ||
      !(tr.smoothing_window >= 0.0)) {
    throw ConfigError("trajectories: invalid options");
  }
  if (instanton.points < 3 || !(instanton.endpoint_offset > 0.0) || instanton.max_cycles < 1) {
    throw ConfigError("instanton: need points >= 3, endpoint_offset > 0, max_cycles >= 1");
  }
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  reject_unknown(j,
                 {"model", "sweep", "task", "output_dir", "seed", "jobs", "max_n", "phase_diagram",
                  "spectrum", "ld", "trajectories", "instanton"},
                 "config");
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"rabi", "detuning", "interaction", "decay"}, "model");
    read(m, "rabi", c.model.rabi, "model");
    read(m, "detuning", c.model.detuning, "model");
    read(m, "interaction", c.model.interaction, "model");
    read(m, "decay", c.model.decay, "model");
  }
  if (!j.contains("sweep")) throw ConfigError("missing 'sweep'");
  {
    const json& s = j.at("sweep");
    reject_unknown(s, {"N_list", "delta_list"}, "sweep");
    read(s, "N_list", c.n_list, "sweep");
    read(s, "delta_list", c.delta_list, "sweep");
  }
  if (j.contains("task")) {
    std::string verb;
    read(j, "task", verb, "config");
    c.task = parse_task(verb);
  }
  std::string out = c.output_dir.string();
  read(j, "output_dir", out, "config");
  c.output_dir = out;
  read(j, "seed", c.seed, "config");
  read(j, "jobs", c.jobs, "config");
  if (j.contains("max_n")) {
    int mn = 0;
    read(j, "max_n", mn, "config");
    c.max_n = mn;
  }
  if (j.contains("phase_diagram")) {
    const json& o = j.at("phase_diagram");
    reject_unknown(o, {"delta_min", "delta_max", "points", "resolution"}, "phase_diagram");
    read(o, "delta_min", c.phase_diagram.delta_min, "phase_diagram");
    read(o, "delta_max", c.phase_diagram.delta_max, "phase_diagram");
    read(o, "points", c.phase_diagram.points, "phase_diagram");
    read(o, "resolution", c.phase_diagram.resolution, "phase_diagram");
  }
  if (j.contains("spectrum")) {
    const json& o = j.at("spectrum");
    reject_unknown(o, {"pdf_half_width", "write_pdfs"}, "spectrum");
    read(o, "pdf_half_width", c.spectrum.pdf_half_width, "spectrum");
    read(o, "write_pdfs", c.spectrum.write_pdfs, "spectrum");
  }
  if (j.contains("ld")) {
    const json& o = j.at("ld");
    reject_unknown(o,
                   {"s_min", "s_max", "points", "refine_rounds", "refine_factor", "prominence",
                    "height_tol"},
                   "ld");
    read(o, "s_min", c.ld.s_min, "ld");
    read(o, "s_max", c.ld.s_max, "ld");
    read(o, "points", c.ld.points, "ld");
    read(o, "refine_rounds", c.ld.refine_rounds, "ld");
    read(o, "refine_factor", c.ld.refine_factor, "ld");
    read(o, "prominence", c.ld.prominence, "ld");
    read(o, "height_tol", c.ld.height_tol, "ld");
  }
  if (j.contains("trajectories")) {
    const json& o = j.at("trajectories");
    reject_unknown(o,
                   {"dt", "t_final", "count", "record_stride", "threshold_fraction", "min_dwell",
                    "smoothing_window", "saved_traces", "min_switches"},
                   "trajectories");
    auto& t = c.trajectories;
    read(o, "dt", t.dt, "trajectories");
    read(o, "t_final", t.t_final, "trajectories");
    read(o, "count", t.count, "trajectories");
    read(o, "record_stride", t.record_stride, "trajectories");
    read(o, "threshold_fraction", t.threshold_fraction, "trajectories");
    read(o, "min_dwell", t.min_dwell, "trajectories");
    read(o, "smoothing_window", t.smoothing_window, "trajectories");
    read(o, "saved_traces", t.saved_traces, "trajectories");
    read(o, "min_switches", t.min_switches, "trajectories");
  }
  if (j.contains("instanton")) {
    const json& o = j.at("instanton");
    reject_unknown(o, {"points", "endpoint_offset", "max_cycles", "delta_list"}, "instanton");
    read(o, "points", c.instanton.points, "instanton");
    read(o, "endpoint_offset", c.instanton.endpoint_offset, "instanton");
    read(o, "max_cycles", c.instanton.max_cycles, "instanton");
    read(o, "delta_list", c.instanton.delta_list, "instanton");
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"rabi", c.model.rabi},
                {"detuning", c.model.detuning},
                {"interaction", c.model.interaction},
                {"decay", c.model.decay}};
  j["sweep"] = {{"N_list", c.n_list}, {"delta_list", c.delta_list}};
  j["task"] = to_string(c.task);
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  if (c.max_n) j["max_n"] = *c.max_n;
  const auto& pd = c.phase_diagram;
  j["phase_diagram"] = {{"delta_min", pd.delta_min},
                        {"delta_max", pd.delta_max},
                        {"points", pd.points},
                        {"resolution", pd.resolution}};
  j["spectrum"] = {{"pdf_half_width", c.spectrum.pdf_half_width},
                   {"write_pdfs", c.spectrum.write_pdfs}};
  j["ld"] = {{"s_min", c.ld.s_min},
             {"s_max", c.ld.s_max},
             {"points", c.ld.points},
             {"refine_rounds", c.ld.refine_rounds},
             {"refine_factor", c.ld.refine_factor},
             {"prominence", c.ld.prominence},
             {"height_tol", c.ld.height_tol}};
  const auto& t = c.trajectories;
  j["trajectories"] = {{"dt", t.dt},
                       {"t_final", t.t_final},
                       {"count", t.count},
                       {"record_stride", t.record_stride},
                       {"threshold_fraction", t.threshold_fraction},
                       {"min_dwell", t.min_dwell},
                       {"smoothing_window", t.smoothing_window},
                       {"saved_traces", t.saved_traces},
                       {"min_switches", t.min_switches}};
  j["instanton"] = {{"points", c.instanton.points},
                    {"endpoint_offset", c.instanton.endpoint_offset},
                    {"max_cycles", c.instanton.max_cycles},
                    {"delta_list", c.instanton.delta_list}};
  return j;
}

}  // namespace metaswitch
