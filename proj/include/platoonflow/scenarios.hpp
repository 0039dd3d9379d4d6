#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "platoonflow/sim.hpp"

namespace pf {

// Bad scenario/sweep input. Message names the offending field or file row.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  std::string layout = "single_light";  // single_light, reference_intersection,
                                        // arterial, grid, berlin, calibration
  Backend backend = Backend::Krauss;
  Policy policy = Policy::Cdg;
  double penetration = -1.0;        // in [0,1]: mixed fleet, overrides policy
  std::string mix_mode = "random";  // or "alternating"

  double green_s = 15.0;
  double green_minor_s = -1.0;  // < 0: layout default pairing
  double yellow_s = 3.0;
  double clearance_s = 3.0;
  double prot_left_s = 0.0;
  double offset_s = 0.0;  // per-node multiplier, layout-defined progression

  // Turn probabilities in percent, per approach lane: the right lane draws
  // right turns, the left (top) lane draws left turns.
  double turn_right_pct = 0.0;
  double turn_left_pct = 0.0;
  double minor_turn_right_pct = -1.0;  // < 0: layout default
  double minor_turn_left_pct = -1.0;

  int queue_len = 60;     // single_light: vehicles in the starting queue
  int queue_pattern = 0;  // calibration: 0 short, 1 medium, 2 long queues
  double rate_vph = 0.0;  // > 0: rate-limited inflow instead of oversaturated
  double duration_s = -1.0;  // < 0: layout default
  int lane_changes = -1;     // tri-state: -1 layout default, 0 off, 1 on
  uint32_t seed = 42;

  std::string leader_profile;  // CSV path; empty: built-in profile
  std::string berlin_data = "data/berlin.json";
};

// Strict parse: unknown keys and type mismatches throw ConfigError.
ScenarioConfig scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const ScenarioConfig& cfg);
void validate_config(const ScenarioConfig& cfg);

double default_duration(const ScenarioConfig& cfg);

// Builders. Each returns a world that is fully initialized (world_init done,
// queues placed, spawners and measurement lines armed) and ready to run.
World build_single_light(Policy p, int queue_len,
                         Backend backend = Backend::Controller);
World build_single_light(const ScenarioConfig& cfg);
World build_reference_intersection(const ScenarioConfig& cfg);
World build_arterial(const ScenarioConfig& cfg);
World build_grid(const ScenarioConfig& cfg);
World build_berlin(const ScenarioConfig& cfg);
World build_berlin();  // defaults: bundled data file, Krauss, CDG
World build_calibration_world(Backend backend, const ScenarioConfig& cfg);

// Dispatch on cfg.layout.
World build_world(const ScenarioConfig& cfg);

// One permutation axis: a config key plus the JSON-encoded values it takes.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values_json;
};

struct SweepSpec {
  std::string name = "sweep";
  ScenarioConfig base;
  std::vector<SweepAxis> axes;
  int repetitions = 1;
};

struct SweepRun {
  uint64_t index = 0;  // seed = base.seed + index
  std::string label;   // "key=value,...,rep=N"
  ScenarioConfig cfg;
};

SweepSpec sweep_from_json_text(const std::string& text);

// Cartesian product of the axes times repetitions, in axis declaration
// order, repetitions innermost. Empty axes are rejected.
std::vector<SweepRun> expand_sweep(const SweepSpec& spec);

}  // namespace pf
