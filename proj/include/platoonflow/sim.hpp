#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoonflow/controller.hpp"
#include "platoonflow/krauss.hpp"
#include "platoonflow/metrics.hpp"
#include "platoonflow/network.hpp"
#include "platoonflow/policies.hpp"

namespace pf {

enum class Backend : uint8_t { Krauss, Controller };

const char* backend_name(Backend b);
bool backend_from_name(const std::string& s, Backend& out);

struct SimClock {
  int64_t step = 0;  // source of truth; t derives from it
  double dt = 0.1;
  double t() const { return step * dt; }
};

// Fatal inconsistency (collision / conservation breach). Message carries the
// diagnostic dump.
struct SimAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::mt19937 seeded_rng(uint32_t seed);

enum class TeleportKind : uint8_t { Jam, Junction, TurnBlock, Gridlock };
const char* teleport_kind_name(TeleportKind k);

struct Event {
  enum Kind : uint8_t { Detector, Teleport } kind = Detector;
  double t = 0.0;
  int vehicle = -1;
  int line = -1;             // detector events: CrossLine id
  TeleportKind tk = TeleportKind::Jam;
  bool removed = false;      // teleports: removed instead of relocated
  double onset = 0.0;        // teleports: when the standstill began
  int strand = -1;
};

// Why a front vehicle may not cross the stop line this step.
enum DenyReason : uint8_t {
  DenyNone = 0,
  DenyRed,
  DenyConflict,    // conflict area occupied
  DenyOncoming,    // left turn gap acceptance
  DenyDownstream,  // no-block heuristic: target lane full
  DenyWrongLane,   // movement not served from this lane
};

struct Vehicle {
  int id = -1;
  bool active = true;
  Policy policy = Policy::Cdg;
  double len = 5.15;
  int strand = -1;
  double pos = 0.0;  // front bumper, from strand start [m]
  double v = 0.0;
  KraussParams kp;
  ControllerState ctl;
  CommPacket out;  // broadcast state as of the previous step
  Turn next_turn = Turn::Straight;
  bool may_cross = false;  // valid for the current step, front of lane only
  uint8_t deny = DenyNone;
  bool was_held = false;     // stopped at a closed stop line (profile anchor)
  bool stop_decided = false;  // committed to stopping for the current signal
  bool gridlocked = false;
  double profile_t0 = -1.0;  // < 0: not tracking the start-up profile
  double wait = 0.0;         // continuous standstill time [s]
  double blocked_at_line = 0.0;  // continuous denial time at the line [s]
  double spawn_t = 0.0;
  int region = -1;
  double region_entry_t = -1.0;
  int64_t moved_step = -1;
};

enum class SpawnMode : uint8_t { Saturated, Rate };

struct Spawner {
  int link = -1;
  SpawnMode mode = SpawnMode::Saturated;
  double rate_vph = 0.0;
  double acc = 0.0;
  int inflow_group = 0;  // 0 none, 1 east, 2 west, 3 minor
  bool use_mix = false;
  MixConfig mix;
  double mix_acc = 1.0;
  Policy policy = Policy::Cdg;
};

struct WorldParams {
  Backend backend = Backend::Krauss;
  double dt = 0.1;
  PolicyParams pp;
  ControllerParams cp;
  double gap_accept_s = 4.0;
  double heuristic_miss_p = 0.05;
  double leader_speed_factor = 0.95;
  double startup_delay_s = 2.0;  // reaction of a queue front after release
  double lookahead_m = 120.0;
  bool lane_changes = false;
  double metrics_window_s = 60.0;
  double teleport_cycles = 3.0;   // standstill budget on links [cycles]
  double teleport_greens = 2.0;   // standstill budget inside the box [greens]
  double gridlock_scan_s = 2.0;
  double relocate_margin = 3.0;   // clearance behind the tail when relocating
  int relocate_hops = 4;
  uint32_t seed = 42;
};

struct World {
  Network net;
  WorldParams params;
  SimClock clock;
  std::mt19937 rng;
  LeaderProfile profile;  // controller leaders after a held stop
  std::vector<Vehicle> vehicles;
  std::vector<std::vector<int>> order;  // per strand, front (max pos) first
  std::vector<CrossLine> lines;
  std::vector<std::vector<int>> strand_lines;
  DensityRegion density;  // empty: no density sampling
  std::vector<Spawner> spawners;
  MetricsCollector metrics;
  std::vector<Event> events;
  uint64_t spawned = 0, exited = 0, removed = 0;
  uint64_t teleports = 0, gridlock_teleports = 0;
  uint64_t emergency_brakes = 0;
  // per-step caches
  std::vector<double> v_prev;  // per vehicle id, speeds at step start
  double next_gridlock_scan = 0.0;

  double t() const { return clock.t(); }
};

// Size caches and metric windows. Call once after net.finalize() and
// params assignment; seeds the RNG.
void world_init(World& w);

// Insert a vehicle at rest or speed on a strand; keeps per-strand order.
// Draws the turn for the end of the current link. Returns the id.
int add_vehicle(World& w, int strand, double pos, double v, Policy p);

int add_cross_line(World& w, int strand, double pos, CrossLine::Kind kind,
                   int region = 0, const std::string& name = "");

// Next policy a spawner would hand out (consumes mix state / RNG draws).
// Exposed so scenario prefills assign exactly like the live spawner.
Policy draw_policy(World& w, Spawner& sp);

// Stop-line crossing permission for a lane-front vehicle, evaluated against
// the previous-step world state. Sets *deny on refusal.
bool entry_decision(World& w, const Vehicle& veh, uint8_t* deny);

// Minimal gap-acceptance lane change (both leader and follower gaps must
// accommodate the policies involved). Performs the move when accepted.
bool try_lane_change(World& w, int vehicle_id, int target_lane);

// Standstill budget before the vehicle teleports, from its location.
double teleport_threshold(const World& w, const Vehicle& veh);

// Nodes on some cycle of the wait-for graph (A waits on B when A's front
// vehicle is denied at green because the lane toward B is full).
std::vector<int> gridlock_cycle_nodes(const World& w);

double sample_density(const World& w);

void step_world(World& w);

struct RunLog {
  std::vector<MetricsRow> rows;
  std::vector<Event> events;
  uint64_t exits = 0;
  uint64_t teleports = 0, gridlock_teleports = 0;
  uint64_t emergency_brakes = 0;
  double density_peak = 0.0;
  double travel_mean = 0.0;
  bool has_travel = false;
  double duration = 0.0;
};

RunLog run(World& w, double duration);

}  // namespace pf
