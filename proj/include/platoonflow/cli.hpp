#pragma once

#include <string>

#include "platoonflow/scenarios.hpp"

namespace pf {

extern const char kToolVersion[];

// Exit codes: 0 success, 1 configuration/input error, 2 simulation
// inconsistency (collision or conservation abort), 3 validation failure.

// Simulate one run into dir (created if needed). Writes metrics.csv,
// events.csv, and manifest.json (config snapshot, seed, timing, summary);
// the manifest is written last and marks completion.
int run_one(const ScenarioConfig& cfg, uint64_t index, const std::string& label,
            const std::string& dir, std::string* err);

int cli_main(int argc, const char* const* argv);

}  // namespace pf
