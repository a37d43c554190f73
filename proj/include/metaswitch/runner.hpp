#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "metaswitch/config.hpp"

namespace metaswitch {

struct TaskOutcome {
  Task task = Task::All;
  bool ok = true;
  std::string error;
  double seconds = 0.0;
  std::vector<std::string> warnings;  // items skipped inside an otherwise successful task
};

struct RunReport {
  std::vector<TaskOutcome> tasks;
  std::vector<std::filesystem::path> files;  // relative to the output directory, manifest last

  bool ok() const;
};

/// Executes config.task (All runs every task in order, sharing intermediate results), writes
/// the artifacts and manifest.json under config.output_dir. A failing task is recorded and the
/// remaining tasks still run.
RunReport run(const RunConfig& config);

}  // namespace metaswitch
