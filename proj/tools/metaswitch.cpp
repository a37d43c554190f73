#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metaswitch/config.hpp"
#include "metaswitch/runner.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kTaskFailure = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bistability and metastability of a driven dissipative Rydberg ensemble"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> max_n;
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "master seed (overrides seed)");
  app.add_option("--jobs", jobs, "worker threads (overrides jobs)");
  app.add_option("--max-n", max_n, "skip sweep sizes above this N");

  const char* verbs[][2] = {
      {"phase-diagram", "mean-field regimes along the detuning axis"},
      {"spectrum", "Liouvillian gaps over the (N, delta) sweep"},
      {"metastable", "metastable manifold, occupation ratio and n_e distributions"},
      {"ld", "photon-count SCGF and rate function"},
      {"trajectories", "quantum-jump trajectories and switching statistics"},
      {"instanton", "optimal switching paths and quasipotentials"},
      {"compare", "barrier estimates from spectra, trajectories and instantons"},
      {"all", "every task above"},
  };
  for (const auto& v : verbs) app.add_subcommand(v[0], v[1]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  metaswitch::RunConfig config;
  try {
    config = metaswitch::load_config(config_path);
    config.task = metaswitch::parse_task(app.get_subcommands().front()->get_name());
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (seed) config.seed = *seed;
    if (jobs) config.jobs = *jobs;
    if (max_n) config.max_n = *max_n;
    config.validate();
  } catch (const metaswitch::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    const metaswitch::RunReport report = metaswitch::run(config);
    for (const auto& t : report.tasks) {
      std::cerr << metaswitch::to_string(t.task) << ": " << (t.ok ? "ok" : "FAILED") << " ("
                << t.seconds << " s)";
      if (!t.ok) std::cerr << " " << t.error;
      std::cerr << '\n';
      for (const auto& w : t.warnings) std::cerr << "  warning: " << w << '\n';
    }
    return report.ok() ? 0 : kTaskFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kTaskFailure;
  }
}
