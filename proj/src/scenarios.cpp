#include "platoonflow/scenarios.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace pf {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

double jnum(const ojson& v, const std::string& key) {
  if (!v.is_number()) bad(fmt::format("field '{}': expected a number", key));
  return v.get<double>();
}

std::string jstr(const ojson& v, const std::string& key) {
  if (!v.is_string()) bad(fmt::format("field '{}': expected a string", key));
  return v.get<std::string>();
}

int jtri(const ojson& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
  if (v.is_number_integer()) {
    const int64_t n = v.get<int64_t>();
    if (n >= -1 && n <= 1) return (int)n;
  }
  bad(fmt::format("field '{}': expected a bool or -1/0/1", key));
}

void set_field(ScenarioConfig& c, const std::string& key, const ojson& v) {
  if (key == "layout") {
    c.layout = jstr(v, key);
  } else if (key == "backend") {
    if (!backend_from_name(jstr(v, key), c.backend))
      bad(fmt::format("field 'backend': '{}' is not one of krauss, controller",
                      v.get<std::string>()));
  } else if (key == "policy") {
    if (!policy_from_name(jstr(v, key), c.policy))
      bad(fmt::format(
          "field 'policy': '{}' is not one of CDG, CTG_REF, CTG_HCM, "
          "CTG_HBS, SWITCH1, SWITCH2",
          v.get<std::string>()));
  } else if (key == "penetration") {
    c.penetration = jnum(v, key);
  } else if (key == "mix_mode") {
    c.mix_mode = jstr(v, key);
  } else if (key == "green_s") {
    c.green_s = jnum(v, key);
  } else if (key == "green_minor_s") {
    c.green_minor_s = jnum(v, key);
  } else if (key == "yellow_s") {
    c.yellow_s = jnum(v, key);
  } else if (key == "clearance_s") {
    c.clearance_s = jnum(v, key);
  } else if (key == "prot_left_s") {
    c.prot_left_s = jnum(v, key);
  } else if (key == "offset_s") {
    c.offset_s = jnum(v, key);
  } else if (key == "turn_right_pct") {
    c.turn_right_pct = jnum(v, key);
  } else if (key == "turn_left_pct") {
    c.turn_left_pct = jnum(v, key);
  } else if (key == "minor_turn_right_pct") {
    c.minor_turn_right_pct = jnum(v, key);
  } else if (key == "minor_turn_left_pct") {
    c.minor_turn_left_pct = jnum(v, key);
  } else if (key == "queue_len") {
    c.queue_len = (int)std::llround(jnum(v, key));
  } else if (key == "queue_pattern") {
    c.queue_pattern = (int)std::llround(jnum(v, key));
  } else if (key == "rate_vph") {
    c.rate_vph = jnum(v, key);
  } else if (key == "duration_s") {
    c.duration_s = jnum(v, key);
  } else if (key == "lane_changes") {
    c.lane_changes = jtri(v, key);
  } else if (key == "seed") {
    const double s = jnum(v, key);
    if (s < 0 || s > 4294967295.0 || s != std::floor(s))
      bad("field 'seed': expected an integer in [0, 2^32)");
    c.seed = (uint32_t)s;
  } else if (key == "leader_profile") {
    c.leader_profile = jstr(v, key);
  } else if (key == "berlin_data") {
    c.berlin_data = jstr(v, key);
  } else {
    bad(fmt::format("unknown field '{}'", key));
  }
}

ScenarioConfig parse_config(const ojson& j) {
  if (!j.is_object()) bad("scenario: expected a JSON object");
  ScenarioConfig c;
  bool saw_backend = false;
  for (const auto& item : j.items()) {
    set_field(c, item.key(), item.value());
    if (item.key() == "backend") saw_backend = true;
  }
  // Isolated start-up studies run on the controller unless told otherwise;
  // network scenarios default to the car-following backend.
  if (!saw_backend && c.layout == "single_light") c.backend = Backend::Controller;
  validate_config(c);
  return c;
}

const char* kLayouts[] = {"single_light", "reference_intersection", "arterial",
                          "grid",         "berlin",                 "calibration"};

bool known_layout(const std::string& s) {
  for (const char* l : kLayouts)
    if (s == l) return true;
  return false;
}

MixConfig mix_config(const ScenarioConfig& cfg) {
  MixConfig mc;
  mc.penetration = cfg.penetration;
  mc.mode = cfg.mix_mode == "alternating" ? MixMode::Alternating : MixMode::Random;
  return mc;
}

WorldParams params_from(const ScenarioConfig& cfg) {
  WorldParams wp;
  wp.backend = cfg.backend;
  wp.seed = cfg.seed;
  return wp;
}

void load_profile(World& w, const ScenarioConfig& cfg) {
  w.profile = cfg.leader_profile.empty()
                  ? LeaderProfile::standard()
                  : LeaderProfile::from_csv(cfg.leader_profile);
}

// Pushes a spawner for the inlet and returns it for prefilling. The
// reference stays valid until the next spawner is armed.
Spawner& arm_spawner(World& w, int link, int group, const ScenarioConfig& cfg) {
  Spawner sp;
  sp.link = link;
  sp.mode = cfg.rate_vph > 0 ? SpawnMode::Rate : SpawnMode::Saturated;
  sp.rate_vph = cfg.rate_vph;
  sp.inflow_group = group;
  if (cfg.penetration >= 0.0) {
    sp.use_mix = true;
    sp.mix = mix_config(cfg);
  } else {
    sp.policy = cfg.policy;
  }
  w.spawners.push_back(sp);
  return w.spawners.back();
}

// Standing queue from the stop line back, policies taken from the spawner's
// own stream so prefill and live spawns form one sequence.
void prefill_queue(World& w, Spawner& sp, int per_lane) {
  if (sp.mode == SpawnMode::Rate) return;
  const Link& l = w.net.links[sp.link];
  const double space = w.params.pp.veh_len + w.params.pp.r;
  for (int lane = 0; lane < l.lanes; ++lane) {
    const int s = w.net.lane_strand(sp.link, lane);
    double front = l.len - 0.1;
    for (int k = 0; k < per_lane && front >= w.params.pp.veh_len; ++k) {
      add_vehicle(w, s, front, 0.0, draw_policy(w, sp));
      front -= space;
    }
  }
}

void exit_lines(World& w, int link, double pos) {
  for (int lane = 0; lane < w.net.links[link].lanes; ++lane)
    add_cross_line(w, w.net.lane_strand(link, lane), pos,
                   CrossLine::ThroughputExit);
}

void region_entry_lines(World& w, int link, double pos, int region = 0) {
  for (int lane = 0; lane < w.net.links[link].lanes; ++lane)
    add_cross_line(w, w.net.lane_strand(link, lane), pos, CrossLine::RegionEntry,
                   region);
}

void region_exit_lines(World& w, int link, double pos, int region = 0) {
  for (int lane = 0; lane < w.net.links[link].lanes; ++lane)
    add_cross_line(w, w.net.lane_strand(link, lane), pos, CrossLine::RegionExit,
                   region);
}

void density_link(World& w, int link, double a, double b) {
  const Link& l = w.net.links[link];
  a = std::max(0.0, a);
  b = std::min(l.len, b);
  if (b <= a) return;
  for (int lane = 0; lane < l.lanes; ++lane)
    w.density.segs.push_back({w.net.lane_strand(link, lane), a, b});
}

void density_node_internals(World& w, int node) {
  for (int e : w.net.nodes[node].internal_ids)
    w.density.segs.push_back(
        {w.net.internals[e].strand, 0.0, w.net.internals[e].len});
}

double minor_green_default(const ScenarioConfig& cfg) {
  if (cfg.green_minor_s >= 0) return cfg.green_minor_s;
  if (cfg.layout == "arterial") {
    // coordinated major street: paired short minor greens
    if (cfg.green_s <= 27.5) return 10.0;
    if (cfg.green_s <= 32.5) return 7.0;
    return 5.0;
  }
  return cfg.green_s;  // equal split everywhere else
}

SignalProgram prog_from(const ScenarioConfig& cfg) {
  return SignalProgram::two_phase(cfg.green_s, minor_green_default(cfg),
                                  cfg.yellow_s, cfg.clearance_s,
                                  cfg.prot_left_s);
}

bool lane_changes_on(const ScenarioConfig& cfg, bool layout_default) {
  if (cfg.lane_changes < 0) return layout_default;
  return cfg.lane_changes != 0;
}

int inflow_group(int heading) {
  if (heading == West) return 1;  // coming from the east side
  if (heading == East) return 2;  // coming from the west side
  return 3;
}

}  // namespace

ScenarioConfig scenario_from_json_text(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    bad(fmt::format("scenario: invalid JSON: {}", e.what()));
  }
  return parse_config(j);
}

std::string scenario_to_json_text(const ScenarioConfig& c) {
  ojson j;
  j["layout"] = c.layout;
  j["backend"] = backend_name(c.backend);
  j["policy"] = policy_name(c.policy);
  j["penetration"] = c.penetration;
  j["mix_mode"] = c.mix_mode;
  j["green_s"] = c.green_s;
  j["green_minor_s"] = c.green_minor_s;
  j["yellow_s"] = c.yellow_s;
  j["clearance_s"] = c.clearance_s;
  j["prot_left_s"] = c.prot_left_s;
  j["offset_s"] = c.offset_s;
  j["turn_right_pct"] = c.turn_right_pct;
  j["turn_left_pct"] = c.turn_left_pct;
  j["minor_turn_right_pct"] = c.minor_turn_right_pct;
  j["minor_turn_left_pct"] = c.minor_turn_left_pct;
  j["queue_len"] = c.queue_len;
  j["queue_pattern"] = c.queue_pattern;
  j["rate_vph"] = c.rate_vph;
  j["duration_s"] = c.duration_s;
  j["lane_changes"] = c.lane_changes;
  j["seed"] = c.seed;
  j["leader_profile"] = c.leader_profile;
  j["berlin_data"] = c.berlin_data;
  return j.dump(2) + "\n";
}

void validate_config(const ScenarioConfig& c) {
  if (!known_layout(c.layout))
    bad(fmt::format("field 'layout': unknown layout '{}'", c.layout));
  if (c.penetration > 1.0)
    bad("field 'penetration': must be in [0, 1] (or negative for a pure fleet)");
  if (c.mix_mode != "random" && c.mix_mode != "alternating")
    bad(fmt::format("field 'mix_mode': '{}' is not random or alternating",
                    c.mix_mode));
  if (c.green_s <= 0) bad("field 'green_s': must be positive");
  if (c.yellow_s < 0 || c.clearance_s < 0 || c.prot_left_s < 0)
    bad("signal phase durations must be nonnegative");
  auto pct = [](double x, const char* name) {
    if (x > 100.0 || (x < 0 && x != -1.0 && std::string(name).rfind("minor", 0) != 0))
      bad(fmt::format("field '{}': percent out of range", name));
  };
  if (c.turn_right_pct < 0 || c.turn_left_pct < 0)
    bad("turn percentages must be nonnegative");
  pct(c.turn_right_pct, "turn_right_pct");
  pct(c.turn_left_pct, "turn_left_pct");
  pct(c.minor_turn_right_pct, "minor_turn_right_pct");
  pct(c.minor_turn_left_pct, "minor_turn_left_pct");
  if (c.turn_right_pct + c.turn_left_pct > 100.0)
    bad("turn percentages exceed 100 combined");
  if (c.minor_turn_right_pct >= 0 && c.minor_turn_left_pct >= 0 &&
      c.minor_turn_right_pct + c.minor_turn_left_pct > 100.0)
    bad("minor turn percentages exceed 100 combined");
  if (c.queue_len < 1) bad("field 'queue_len': must be >= 1");
  if (c.queue_pattern < 0 || c.queue_pattern > 2)
    bad("field 'queue_pattern': must be 0, 1, or 2");
  if (c.rate_vph < 0) bad("field 'rate_vph': must be nonnegative");
  if (c.duration_s == 0) bad("field 'duration_s': must be nonzero");
}

double default_duration(const ScenarioConfig& cfg) {
  if (cfg.duration_s > 0) return cfg.duration_s;
  if (cfg.layout == "single_light") return 120.0;
  if (cfg.layout == "reference_intersection") {
    const double cycle = cfg.green_s + minor_green_default(cfg) +
                         2.0 * (cfg.yellow_s + cfg.clearance_s) +
                         cfg.prot_left_s;
    return 5.0 * cycle;
  }
  if (cfg.layout == "arterial") return 1800.0;
  if (cfg.layout == "grid") return 5000.0;
  if (cfg.layout == "berlin") return 5400.0;
  if (cfg.layout == "calibration") return 300.0;
  return 600.0;
}

World build_single_light(Policy p, int queue_len, Backend backend) {
  ScenarioConfig cfg;
  cfg.layout = "single_light";
  cfg.policy = p;
  cfg.queue_len = queue_len;
  cfg.backend = backend;
  return build_single_light(cfg);
}

World build_single_light(const ScenarioConfig& cfg) {
  World w;
  w.params = params_from(cfg);
  // isolated start-up study: the released queue may use the full limit
  w.params.leader_speed_factor = 1.0;
  const double vmax = w.params.pp.v_max;

  const int n0 = w.net.add_node(0.0, 0.0);
  const int in = w.net.add_link(-1, n0, 500.0, 1, vmax, RoadClass::Major, true, East);
  const int out = w.net.add_link(n0, -1, 300.0, 1, vmax, RoadClass::Major, true, East);
  (void)out;
  Node& nd = w.net.nodes[n0];
  nd.signalized = true;
  // one long red tail after the studied green so a run sees one discharge
  nd.prog = SignalProgram::from_durations(
      {cfg.green_s, cfg.yellow_s, cfg.clearance_s, 0.0, 7200.0, 0.0, 0.0});
  nd.offset = 0.0;
  w.net.wire_intersection(n0);
  w.net.finalize();
  world_init(w);
  load_profile(w, cfg);

  const double stop = w.net.links[in].len;
  add_cross_line(w, w.net.lane_strand(in, 0), stop, CrossLine::Plain, 0,
                 "stopline");

  std::vector<Policy> fleet(cfg.queue_len, cfg.policy);
  if (cfg.penetration >= 0.0)
    fleet = assign_policies((size_t)cfg.queue_len, mix_config(cfg), w.rng);
  const int strand = w.net.lane_strand(in, 0);
  const double space = w.params.pp.veh_len + w.params.pp.r;
  double front = stop - 0.1;
  for (int k = 0; k < cfg.queue_len && front >= w.params.pp.veh_len; ++k) {
    add_vehicle(w, strand, front, 0.0, fleet[k]);
    front -= space;
  }
  return w;
}

World build_reference_intersection(const ScenarioConfig& cfg) {
  World w;
  w.params = params_from(cfg);
  w.params.lane_changes = lane_changes_on(cfg, false);
  const double vmax = w.params.pp.v_max;
  const double L = 300.0;

  const int c = w.net.add_node(0.0, 0.0);
  std::array<int, 4> in{}, out{};
  for (int h = 0; h < 4; ++h) {
    const bool major = (h == East || h == West);
    const RoadClass cls = major ? RoadClass::Major : RoadClass::Minor;
    in[h] = w.net.add_link(-1, c, L, 2, vmax, cls, major, h);
    out[h] = w.net.add_link(c, -1, L, 2, vmax, cls, major, h);
    w.net.links[in[h]].p_right = cfg.turn_right_pct / 100.0;
    w.net.links[in[h]].p_left = cfg.turn_left_pct / 100.0;
  }
  Node& nd = w.net.nodes[c];
  nd.signalized = true;
  nd.prog = prog_from(cfg);
  nd.offset = cfg.offset_s;
  w.net.wire_intersection(c);
  w.net.finalize();
  world_init(w);
  load_profile(w, cfg);

  // measurement circle: 40 m radius around the node center, i.e. 32 m of
  // road beyond each stop line
  const double span = 32.0;
  for (int h = 0; h < 4; ++h) {
    exit_lines(w, out[h], span);
    region_exit_lines(w, out[h], span);
    region_entry_lines(w, in[h], L - span);
    density_link(w, in[h], L - span, L);
    density_link(w, out[h], 0.0, span);
  }
  density_node_internals(w, c);

  for (int h = 0; h < 4; ++h) {
    Spawner& sp = arm_spawner(w, in[h], inflow_group(h), cfg);
    prefill_queue(w, sp, 34);
  }
  return w;
}

World build_arterial(const ScenarioConfig& cfg) {
  World w;
  w.params = params_from(cfg);
  w.params.lane_changes = lane_changes_on(cfg, false);
  const double vmax = w.params.pp.v_max;
  const int N = 5;
  const double spacing = 192.5;
  const double inner = spacing - 2.0 * w.net.stop_offset;
  const double L = 300.0;
  const double min_r = cfg.minor_turn_right_pct < 0 ? 40.0 : cfg.minor_turn_right_pct;
  const double min_l = cfg.minor_turn_left_pct < 0 ? 20.0 : cfg.minor_turn_left_pct;

  std::array<int, 5> node{};
  for (int k = 0; k < N; ++k) node[k] = w.net.add_node(k * spacing, 0.0);

  auto mark_major = [&](int link) {
    w.net.links[link].p_right = cfg.turn_right_pct / 100.0;
    w.net.links[link].p_left = cfg.turn_left_pct / 100.0;
  };
  auto mark_minor = [&](int link) {
    w.net.links[link].p_right = min_r / 100.0;
    w.net.links[link].p_left = min_l / 100.0;
  };

  // major chain, both directions
  const int in_e = w.net.add_link(-1, node[0], L, 2, vmax, RoadClass::Major, true, East);
  const int in_w = w.net.add_link(-1, node[N - 1], L, 2, vmax, RoadClass::Major, true, West);
  const int out_e = w.net.add_link(node[N - 1], -1, L, 2, vmax, RoadClass::Major, true, East);
  const int out_w = w.net.add_link(node[0], -1, L, 2, vmax, RoadClass::Major, true, West);
  mark_major(in_e);
  mark_major(in_w);
  std::vector<int> minors_in, minors_out;
  for (int k = 0; k + 1 < N; ++k) {
    const int e = w.net.add_link(node[k], node[k + 1], inner, 2, vmax,
                                 RoadClass::Major, true, East);
    const int ww = w.net.add_link(node[k + 1], node[k], inner, 2, vmax,
                                  RoadClass::Major, true, West);
    mark_major(e);
    mark_major(ww);
  }
  for (int k = 0; k < N; ++k) {
    const int n_in = w.net.add_link(-1, node[k], L, 2, vmax, RoadClass::Minor, false, North);
    const int n_out = w.net.add_link(node[k], -1, L, 2, vmax, RoadClass::Minor, false, North);
    const int s_in = w.net.add_link(-1, node[k], L, 2, vmax, RoadClass::Minor, false, South);
    const int s_out = w.net.add_link(node[k], -1, L, 2, vmax, RoadClass::Minor, false, South);
    mark_minor(n_in);
    mark_minor(s_in);
    minors_in.push_back(n_in);
    minors_in.push_back(s_in);
    minors_out.push_back(n_out);
    minors_out.push_back(s_out);
  }
  for (int k = 0; k < N; ++k) {
    Node& nd = w.net.nodes[node[k]];
    nd.signalized = true;
    nd.prog = prog_from(cfg);
    nd.offset = k * cfg.offset_s;
    w.net.wire_intersection(node[k]);
  }
  w.net.finalize();
  world_init(w);
  load_profile(w, cfg);

  // measurement boundary: 20 m past the outer node centers, 12 m into the
  // boundary links, so external queues stay uncounted
  const double bnd = 12.0;
  std::vector<int> inlets = {in_e, in_w};
  std::vector<int> outlets = {out_e, out_w};
  inlets.insert(inlets.end(), minors_in.begin(), minors_in.end());
  outlets.insert(outlets.end(), minors_out.begin(), minors_out.end());
  for (int lk : outlets) {
    exit_lines(w, lk, bnd);
    region_exit_lines(w, lk, bnd);
    density_link(w, lk, 0.0, bnd);
  }
  for (int lk : inlets) {
    region_entry_lines(w, lk, w.net.links[lk].len - bnd);
    density_link(w, lk, w.net.links[lk].len - bnd, w.net.links[lk].len);
  }
  for (const Link& l : w.net.links)
    if (l.from_node >= 0 && l.to_node >= 0) density_link(w, l.id, 0.0, l.len);
  for (int k = 0; k < N; ++k) density_node_internals(w, node[k]);

  for (int lk : inlets) {
    Spawner& sp = arm_spawner(w, lk, inflow_group(w.net.links[lk].heading), cfg);
    prefill_queue(w, sp, 15);
  }
  return w;
}

World build_grid(const ScenarioConfig& cfg) {
  World w;
  w.params = params_from(cfg);
  w.params.lane_changes = lane_changes_on(cfg, false);
  const double vmax = w.params.pp.v_max;
  const int N = 5;
  const double sx = 192.5, sy = 276.5;
  const double L = 300.0;

  int node[5][5];
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) node[i][j] = w.net.add_node(i * sx, j * sy);

  auto mark = [&](int link) {
    w.net.links[link].p_right = cfg.turn_right_pct / 100.0;
    w.net.links[link].p_left = cfg.turn_left_pct / 100.0;
  };

  std::vector<int> inlets, outlets;
  auto inlet = [&](int to, int heading, bool major) {
    const int lk = w.net.add_link(-1, to, L, 2, vmax, RoadClass::Major, major, heading);
    mark(lk);
    inlets.push_back(lk);
  };
  auto outlet = [&](int from, int heading, bool major) {
    outlets.push_back(
        w.net.add_link(from, -1, L, 2, vmax, RoadClass::Major, major, heading));
  };

  for (int j = 0; j < N; ++j) {
    inlet(node[0][j], East, true);
    inlet(node[N - 1][j], West, true);
    outlet(node[N - 1][j], East, true);
    outlet(node[0][j], West, true);
    for (int i = 0; i + 1 < N; ++i) {
      mark(w.net.add_link(node[i][j], node[i + 1][j], sx - 2 * w.net.stop_offset,
                          2, vmax, RoadClass::Major, true, East));
      mark(w.net.add_link(node[i + 1][j], node[i][j], sx - 2 * w.net.stop_offset,
                          2, vmax, RoadClass::Major, true, West));
    }
  }
  for (int i = 0; i < N; ++i) {
    inlet(node[i][0], North, false);
    inlet(node[i][N - 1], South, false);
    outlet(node[i][N - 1], North, false);
    outlet(node[i][0], South, false);
    for (int j = 0; j + 1 < N; ++j) {
      mark(w.net.add_link(node[i][j], node[i][j + 1], sy - 2 * w.net.stop_offset,
                          2, vmax, RoadClass::Major, false, North));
      mark(w.net.add_link(node[i][j + 1], node[i][j], sy - 2 * w.net.stop_offset,
                          2, vmax, RoadClass::Major, false, South));
    }
  }
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) {
      Node& nd = w.net.nodes[node[i][j]];
      nd.signalized = true;
      nd.prog = prog_from(cfg);
      nd.offset = (i + j) * cfg.offset_s;
      w.net.wire_intersection(node[i][j]);
    }
  w.net.finalize();
  world_init(w);
  load_profile(w, cfg);

  const double bnd = 12.0;
  for (int lk : outlets) {
    exit_lines(w, lk, bnd);
    region_exit_lines(w, lk, bnd);
    density_link(w, lk, 0.0, bnd);
  }
  for (int lk : inlets) {
    region_entry_lines(w, lk, w.net.links[lk].len - bnd);
    density_link(w, lk, w.net.links[lk].len - bnd, w.net.links[lk].len);
  }
  for (const Link& l : w.net.links)
    if (l.from_node >= 0 && l.to_node >= 0) density_link(w, l.id, 0.0, l.len);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < N; ++i) density_node_internals(w, node[i][j]);

  for (int lk : inlets) {
    Spawner& sp = arm_spawner(w, lk, inflow_group(w.net.links[lk].heading), cfg);
    prefill_queue(w, sp, 15);
  }
  return w;
}

namespace {

struct BerlinNode {
  std::string name;
  std::array<double, 7> phases{};
  double offset = 0.0;
  double dist_next = 0.0;
  std::array<double, 3> major_turns{1.0, 0.0, 0.0};  // straight, right, left
  std::array<double, 3> minor_turns{0.0, 0.0, 0.0};
  bool minor_road = false;
};

struct BerlinData {
  double vmax = 13.889;
  std::vector<BerlinNode> nodes;
};

std::array<double, 3> jtriple(const ojson& v, int row, const std::string& key) {
  if (!v.is_array() || v.size() != 3)
    bad(fmt::format("berlin data node {}: field '{}' must be 3 numbers", row, key));
  std::array<double, 3> t{};
  for (int k = 0; k < 3; ++k) {
    if (!v[k].is_number())
      bad(fmt::format("berlin data node {}: field '{}' must be 3 numbers", row, key));
    t[k] = v[k].get<double>();
    if (t[k] < 0 || t[k] > 1)
      bad(fmt::format("berlin data node {}: field '{}' entries must be in [0,1]",
                      row, key));
  }
  return t;
}

BerlinData load_berlin(const std::string& path) {
  std::ifstream f(path);
  if (!f) bad(fmt::format("berlin data: cannot open '{}'", path));
  ojson j;
  try {
    j = ojson::parse(f);
  } catch (const std::exception& e) {
    bad(fmt::format("berlin data '{}': invalid JSON: {}", path, e.what()));
  }
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array())
    bad("berlin data: expected an object with a 'nodes' array");
  BerlinData d;
  if (j.contains("vmax_kmh")) d.vmax = jnum(j["vmax_kmh"], "vmax_kmh") / 3.6;
  const auto& arr = j["nodes"];
  if (arr.size() < 2) bad("berlin data: need at least 2 nodes");
  for (size_t i = 0; i < arr.size(); ++i) {
    const ojson& n = arr[i];
    const int row = (int)i;
    if (!n.is_object())
      bad(fmt::format("berlin data node {}: expected an object", row));
    BerlinNode bn;
    for (const auto& item : n.items()) {
      const std::string& key = item.key();
      const ojson& v = item.value();
      if (key == "name") {
        bn.name = jstr(v, key);
      } else if (key == "phases") {
        if (!v.is_array() || v.size() != 7)
          bad(fmt::format("berlin data node {}: field 'phases' must list 7 durations",
                          row));
        for (int k = 0; k < 7; ++k) {
          if (!v[k].is_number() || v[k].get<double>() < 0)
            bad(fmt::format(
                "berlin data node {}: field 'phases' must list 7 nonnegative "
                "durations",
                row));
          bn.phases[(size_t)k] = v[k].get<double>();
        }
      } else if (key == "offset_s") {
        bn.offset = jnum(v, key);
      } else if (key == "dist_next_m") {
        bn.dist_next = jnum(v, key);
      } else if (key == "major_turns") {
        bn.major_turns = jtriple(v, row, key);
      } else if (key == "minor_turns") {
        bn.minor_turns = jtriple(v, row, key);
      } else if (key == "minor_road") {
        if (!v.is_boolean())
          bad(fmt::format("berlin data node {}: field 'minor_road' must be a bool",
                          row));
        bn.minor_road = v.get<bool>();
      } else {
        bad(fmt::format("berlin data node {}: unknown field '{}'", row, key));
      }
    }
    if (bn.name.empty())
      bad(fmt::format("berlin data node {}: field 'name' missing", row));
    if (bn.phases[0] <= 0)
      bad(fmt::format("berlin data node {} ('{}'): major green must be positive",
                      row, bn.name));
    if (i + 1 < arr.size() && bn.dist_next < 30.0)
      bad(fmt::format("berlin data node {} ('{}'): field 'dist_next_m' too short",
                      row, bn.name));
    if (bn.minor_road) {
      const double s = bn.minor_turns[0] + bn.minor_turns[1] + bn.minor_turns[2];
      if (std::abs(s - 1.0) > 1e-6)
        bad(fmt::format(
            "berlin data node {} ('{}'): field 'minor_turns' must sum to 1", row,
            bn.name));
    }
    const double sm = bn.major_turns[0] + bn.major_turns[1] + bn.major_turns[2];
    if (std::abs(sm - 1.0) > 1e-6)
      bad(fmt::format("berlin data node {} ('{}'): field 'major_turns' must sum to 1",
                      row, bn.name));
    d.nodes.push_back(std::move(bn));
  }
  return d;
}

// Split a (straight, right, left) share triple over the two lanes: the right
// lane carries rights plus half the straights, the left lane the rest.
void apply_triple(Link& l, const std::array<double, 3>& t) {
  const double s = t[0], r = t[1], lf = t[2];
  const double lane0 = r + 0.5 * s, lane1 = lf + 0.5 * s;
  l.p_right = lane0 > 0 ? r / lane0 : 0.0;
  l.p_left = lane1 > 0 ? lf / lane1 : 0.0;
  const double tot = s + r + lf;
  l.right_lane_load = tot > 0 ? lane0 / tot : 0.5;
}

}  // namespace

World build_berlin(const ScenarioConfig& cfg) {
  const BerlinData d = load_berlin(cfg.berlin_data);
  World w;
  w.params = params_from(cfg);
  w.params.lane_changes = lane_changes_on(cfg, true);
  const double vmax = d.vmax;
  const double L = 300.0;
  const int N = (int)d.nodes.size();

  std::vector<int> node(N);
  double x = 0.0;
  for (int k = 0; k < N; ++k) {
    node[k] = w.net.add_node(x, 0.0);
    x += d.nodes[(size_t)k].dist_next;
  }

  std::vector<int> inlets, outlets, minors_in;
  const int in_e = w.net.add_link(-1, node[0], L, 2, vmax, RoadClass::Major, true, East);
  const int in_w = w.net.add_link(-1, node[N - 1], L, 2, vmax, RoadClass::Major, true, West);
  outlets.push_back(w.net.add_link(node[N - 1], -1, L, 2, vmax, RoadClass::Major, true, East));
  outlets.push_back(w.net.add_link(node[0], -1, L, 2, vmax, RoadClass::Major, true, West));
  apply_triple(w.net.links[in_e], d.nodes[0].major_turns);
  apply_triple(w.net.links[in_w], d.nodes[(size_t)N - 1].major_turns);
  inlets.push_back(in_e);
  inlets.push_back(in_w);

  for (int k = 0; k + 1 < N; ++k) {
    const double len = d.nodes[(size_t)k].dist_next - 2.0 * w.net.stop_offset;
    const int e = w.net.add_link(node[k], node[k + 1], len, 2, vmax,
                                 RoadClass::Major, true, East);
    const int ww = w.net.add_link(node[k + 1], node[k], len, 2, vmax,
                                  RoadClass::Major, true, West);
    apply_triple(w.net.links[e], d.nodes[(size_t)k + 1].major_turns);
    apply_triple(w.net.links[ww], d.nodes[(size_t)k].major_turns);
  }
  for (int k = 0; k < N; ++k) {
    if (!d.nodes[(size_t)k].minor_road) continue;
    const int n_in = w.net.add_link(-1, node[k], L, 2, vmax, RoadClass::Minor, false, North);
    const int n_out = w.net.add_link(node[k], -1, L, 2, vmax, RoadClass::Minor, false, North);
    const int s_in = w.net.add_link(-1, node[k], L, 2, vmax, RoadClass::Minor, false, South);
    const int s_out = w.net.add_link(node[k], -1, L, 2, vmax, RoadClass::Minor, false, South);
    apply_triple(w.net.links[n_in], d.nodes[(size_t)k].minor_turns);
    apply_triple(w.net.links[s_in], d.nodes[(size_t)k].minor_turns);
    minors_in.push_back(n_in);
    minors_in.push_back(s_in);
    outlets.push_back(n_out);
    outlets.push_back(s_out);
  }
  for (int k = 0; k < N; ++k) {
    Node& nd = w.net.nodes[node[k]];
    nd.signalized = true;
    nd.prog = SignalProgram::from_durations(d.nodes[(size_t)k].phases);
    nd.offset = d.nodes[(size_t)k].offset;
    w.net.wire_intersection(node[k]);
  }
  inlets.insert(inlets.end(), minors_in.begin(), minors_in.end());
  w.net.finalize();
  world_init(w);
  load_profile(w, cfg);

  const double bnd = 12.0;
  for (int lk : outlets) {
    exit_lines(w, lk, bnd);
    region_exit_lines(w, lk, bnd);
    density_link(w, lk, 0.0, bnd);
  }
  for (int lk : inlets) {
    region_entry_lines(w, lk, w.net.links[lk].len - bnd);
    density_link(w, lk, w.net.links[lk].len - bnd, w.net.links[lk].len);
  }
  for (const Link& l : w.net.links)
    if (l.from_node >= 0 && l.to_node >= 0) density_link(w, l.id, 0.0, l.len);
  for (int k = 0; k < N; ++k) density_node_internals(w, node[k]);

  for (int lk : inlets) {
    Spawner& sp = arm_spawner(w, lk, inflow_group(w.net.links[lk].heading), cfg);
    prefill_queue(w, sp, 15);
  }
  return w;
}

World build_berlin() {
  ScenarioConfig cfg;
  cfg.layout = "berlin";
  return build_berlin(cfg);
}

World build_calibration_world(Backend backend, const ScenarioConfig& cfg_in) {
  ScenarioConfig cfg = cfg_in;
  cfg.backend = backend;
  if (cfg.turn_right_pct == 0 && cfg.turn_left_pct == 0) {
    cfg.turn_right_pct = 20.0;
    cfg.turn_left_pct = 10.0;
  }
  World w;
  w.params = params_from(cfg);
  w.params.lane_changes = false;
  const double vmax = w.params.pp.v_max;
  const double spacing = 192.5;
  const double inner = spacing - 2.0 * w.net.stop_offset;
  const double L = 300.0;

  // cross of five signals: a center plus one pass-through neighbor per arm
  const int c = w.net.add_node(0.0, 0.0);
  const int aw = w.net.add_node(-spacing, 0.0);
  const int ae = w.net.add_node(spacing, 0.0);
  const int an = w.net.add_node(0.0, spacing);
  const int as = w.net.add_node(0.0, -spacing);

  const int in_w = w.net.add_link(-1, aw, L, 2, vmax, RoadClass::Major, true, East);
  const int wc = w.net.add_link(aw, c, inner, 2, vmax, RoadClass::Major, true, East);
  const int ce = w.net.add_link(c, ae, inner, 2, vmax, RoadClass::Major, true, East);
  const int out_e = w.net.add_link(ae, -1, L, 2, vmax, RoadClass::Major, true, East);
  const int in_e = w.net.add_link(-1, ae, L, 2, vmax, RoadClass::Major, true, West);
  w.net.add_link(ae, c, inner, 2, vmax, RoadClass::Major, true, West);
  w.net.add_link(c, aw, inner, 2, vmax, RoadClass::Major, true, West);
  const int out_w = w.net.add_link(aw, -1, L, 2, vmax, RoadClass::Major, true, West);
  (void)out_w;
  // north-south stubs at the center carry the turn exits
  const int cn = w.net.add_link(c, an, inner, 2, vmax, RoadClass::Minor, false, North);
  const int n_out = w.net.add_link(an, -1, L, 2, vmax, RoadClass::Minor, false, North);
  const int cs = w.net.add_link(c, as, inner, 2, vmax, RoadClass::Minor, false, South);
  const int s_out = w.net.add_link(as, -1, L, 2, vmax, RoadClass::Minor, false, South);
  (void)n_out;
  (void)s_out;

  // only the measured eastbound approach turns; the oncoming stream goes
  // straight so the left turners face steady opposing traffic
  w.net.links[wc].p_right = cfg.turn_right_pct / 100.0;
  w.net.links[wc].p_left = cfg.turn_left_pct / 100.0;

  for (int nd_id : {c, aw, ae, an, as}) {
    Node& nd = w.net.nodes[nd_id];
    nd.signalized = true;
    nd.prog = prog_from(cfg);
    nd.offset = 0.0;
    w.net.wire_intersection(nd_id);
  }
  w.net.finalize();
  world_init(w);
  load_profile(w, cfg);

  auto named = [&](int link, int lane, double pos, const std::string& name) {
    add_cross_line(w, w.net.lane_strand(link, lane), pos, CrossLine::Plain, 0,
                   name);
  };
  for (int lane = 0; lane < 2; ++lane) {
    const std::string l = fmt::format("_l{}", lane);
    named(in_w, lane, L, "aw_stop" + l);
    named(wc, lane, 12.0, "aw_past" + l);
    named(wc, lane, inner / 2.0, "awc_mid" + l);
    named(wc, lane, inner, "c_stop" + l);
    named(ce, lane, 12.0, "c_past" + l);
    named(ce, lane, inner / 2.0, "cae_mid" + l);
    named(ce, lane, inner, "ae_stop" + l);
    named(out_e, lane, 12.0, "ae_past" + l);
  }
  named(cs, 0, 12.0, "c_right_l0");
  named(cn, 1, 12.0, "c_left_l1");

  exit_lines(w, out_e, 12.0);
  exit_lines(w, cs, 12.0);
  exit_lines(w, cn, 12.0);
  region_entry_lines(w, in_w, L - 12.0);
  region_exit_lines(w, out_e, 12.0);
  density_link(w, wc, 0.0, inner);
  density_link(w, ce, 0.0, inner);
  density_node_internals(w, c);

  const int queue[3] = {10, 20, 35};
  Spawner& spw = arm_spawner(w, in_w, 2, cfg);
  prefill_queue(w, spw, queue[cfg.queue_pattern]);
  Spawner& spe = arm_spawner(w, in_e, 1, cfg);
  prefill_queue(w, spe, 20);
  return w;
}

World build_world(const ScenarioConfig& cfg) {
  validate_config(cfg);
  if (cfg.layout == "single_light") return build_single_light(cfg);
  if (cfg.layout == "reference_intersection") return build_reference_intersection(cfg);
  if (cfg.layout == "arterial") return build_arterial(cfg);
  if (cfg.layout == "grid") return build_grid(cfg);
  if (cfg.layout == "berlin") return build_berlin(cfg);
  if (cfg.layout == "calibration") return build_calibration_world(cfg.backend, cfg);
  bad(fmt::format("unknown layout '{}'", cfg.layout));
}

SweepSpec sweep_from_json_text(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const std::exception& e) {
    bad(fmt::format("sweep: invalid JSON: {}", e.what()));
  }
  if (!j.is_object()) bad("sweep: expected a JSON object");
  SweepSpec spec;
  bool saw_base = false;
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    const ojson& v = item.value();
    if (key == "name") {
      spec.name = jstr(v, key);
    } else if (key == "base") {
      spec.base = parse_config(v);
      saw_base = true;
    } else if (key == "axes") {
      if (!v.is_object()) bad("sweep: 'axes' must be an object");
      for (const auto& ax : v.items()) {
        if (!ax.value().is_array() || ax.value().empty())
          bad(fmt::format("sweep: axis '{}' must be a nonempty array", ax.key()));
        SweepAxis a;
        a.key = ax.key();
        for (const auto& val : ax.value()) a.values_json.push_back(val.dump());
        spec.axes.push_back(std::move(a));
      }
    } else if (key == "repetitions") {
      const double r = jnum(v, key);
      if (r < 1 || r != std::floor(r))
        bad("sweep: 'repetitions' must be a positive integer");
      spec.repetitions = (int)r;
    } else {
      bad(fmt::format("sweep: unknown field '{}'", key));
    }
  }
  if (!saw_base) bad("sweep: missing 'base' scenario");
  return spec;
}

std::vector<SweepRun> expand_sweep(const SweepSpec& spec) {
  if (spec.repetitions < 1) bad("sweep: 'repetitions' must be a positive integer");
  uint64_t total = (uint64_t)spec.repetitions;
  for (const SweepAxis& a : spec.axes) {
    if (a.values_json.empty())
      bad(fmt::format("sweep: axis '{}' must be a nonempty array", a.key));
    total *= a.values_json.size();
  }
  auto plain = [](const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
      return s.substr(1, s.size() - 2);
    return s;
  };
  std::vector<SweepRun> runs;
  runs.reserve(total);
  std::vector<size_t> digit(spec.axes.size(), 0);
  const uint64_t perms = spec.repetitions > 0 ? total / spec.repetitions : 0;
  for (uint64_t p = 0; p < perms; ++p) {
    ScenarioConfig cfg = spec.base;
    std::string label;
    for (size_t a = 0; a < spec.axes.size(); ++a) {
      const std::string& vtext = spec.axes[a].values_json[digit[a]];
      set_field(cfg, spec.axes[a].key, ojson::parse(vtext));
      label += fmt::format("{}{}={}", label.empty() ? "" : ",", spec.axes[a].key,
                           plain(vtext));
    }
    validate_config(cfg);
    for (int r = 0; r < spec.repetitions; ++r) {
      SweepRun run;
      run.index = p * (uint64_t)spec.repetitions + (uint64_t)r;
      run.cfg = cfg;
      run.cfg.seed = spec.base.seed + (uint32_t)run.index;
      run.label = fmt::format("{}{}rep={}", label, label.empty() ? "" : ",", r);
      runs.push_back(std::move(run));
    }
    // odometer: last axis fastest
    for (size_t a = spec.axes.size(); a-- > 0;) {
      if (++digit[a] < spec.axes[a].values_json.size()) break;
      digit[a] = 0;
    }
  }
  return runs;
}

}  // namespace pf
