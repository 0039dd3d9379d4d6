#pragma once

#include <string>
#include <vector>

#include "platoonflow/scenarios.hpp"

namespace pf {

// One completed run directory (manifest.json with summary block + CSVs).
struct RunInfo {
  std::string dir;
  uint64_t index = 0;
  std::string label;
  ScenarioConfig cfg;
  uint64_t exits = 0, teleports = 0, gridlock_teleports = 0;
  double throughput_vph = 0.0;
  double travel_mean_s = 0.0;
  double density_peak = 0.0;
  double density_mean = 0.0;
  double duration_s = 0.0;
  std::string stability;
};

// Load every completed run below results_dir (directories holding a
// manifest.json with a summary). Incomplete runs are skipped.
std::vector<RunInfo> scan_runs(const std::string& results_dir);

extern const char* kFigureNames[10];

// Write <figure>.csv and <figure>.svg into results_dir. Returns false and
// fills *err for unknown figures or missing inputs.
bool write_figure(const std::string& results_dir, const std::string& figure,
                  std::string* err);

}  // namespace pf
