#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metaswitch/model.hpp"

namespace metaswitch {

enum class Task { PhaseDiagram, Spectrum, Metastable, LD, Trajectories, Instanton, Compare, All };

std::string to_string(Task t);
/// Accepts the CLI verbs ("phase-diagram", "ld", ...). Throws ConfigError otherwise.
Task parse_task(const std::string& verb);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhaseDiagramOptions {
  double delta_min = 2.0;
  double delta_max = 5.0;
  int points = 301;
  double resolution = 1e-3;
};

struct SpectrumTaskOptions {
  double pdf_half_width = 0.01;
  bool write_pdfs = true;
};

struct LDTaskOptions {
  double s_min = -1.0;
  double s_max = 1.0;
  int points = 201;
  int refine_rounds = 1;
  int refine_factor = 5;
  double prominence = 10.0;
  double height_tol = 0.01;
};

struct TrajectoryTaskOptions {
  double dt = 0.0;            // <= 0: 0.02 / (gamma N)
  double t_final = 2000.0;    // per trajectory
  int count = 4;              // trajectories per (N, delta)
  int record_stride = 0;      // <= 0: record every 0.1 / gamma
  double threshold_fraction = 0.4;
  double min_dwell = 5.0;
  double smoothing_window = 1.0;
  int saved_traces = 1;       // trajectory_<id>.csv files per (N, delta)
  int min_switches = 20;      // completed dwells needed per size to enter a fit
};

struct InstantonTaskOptions {
  int points = 200;
  double endpoint_offset = 1e-3;
  int max_cycles = 400;
  std::vector<double> delta_list;  // empty: sweep.delta_list
};

struct RunConfig {
  ModelParams model;  // n_atoms is replaced by each sweep entry
  std::vector<int> n_list;
  std::vector<double> delta_list;
  Task task = Task::All;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  int jobs = 1;
  std::optional<int> max_n;

  PhaseDiagramOptions phase_diagram;
  SpectrumTaskOptions spectrum;
  LDTaskOptions ld;
  TrajectoryTaskOptions trajectories;
  InstantonTaskOptions instanton;

  /// Sizes in n_list not exceeding max_n.
  std::vector<int> sizes() const;

  /// Throws ConfigError on empty lists, nonpositive sizes, bad option values.
  void validate() const;
};

/// Parses a config document; unknown keys anywhere raise ConfigError.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// The resolved configuration (all defaults filled in), as recorded in the manifest.
nlohmann::json config_to_json(const RunConfig& c);

}  // namespace metaswitch
