#include "platoonflow/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace pf {

namespace {

double u01(std::mt19937& g) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(g);
}

double vp(const World& w, int id) {
  return (std::size_t)id < w.v_prev.size() ? w.v_prev[id] : w.vehicles[id].v;
}

bool cdg_family(Policy p) {
  return p == Policy::Cdg || p == Policy::Switch1 || p == Policy::Switch2;
}

double ctg_headway(Policy p, const PolicyParams& pp) {
  switch (p) {
    case Policy::CtgHcm: return pp.h_hcm;
    case Policy::CtgHbs: return pp.h_hbs;
    default: return pp.h_ref;
  }
}

KraussParams krauss_params_for(Policy p, double dt) {
  if (cdg_family(p)) return KraussParams::cdg(dt);
  // The CTG car-following set was calibrated at the reference headway; the
  // HCM/HBS variants reuse it with their own reaction headway.
  switch (p) {
    case Policy::CtgHcm: return KraussParams::ctg(0.92, dt);
    case Policy::CtgHbs: return KraussParams::ctg(1.22, dt);
    default: return KraussParams::ctg(0.9, dt);
  }
}

// Safe speed toward a leader at gap s moving at v_l. The CDG family holds
// the policy's speed-dependent target gap by shifting the band.
double v_safe_policy(const Vehicle& veh, double s, double v_l,
                     const PolicyParams& pp) {
  if (cdg_family(veh.policy)) {
    KraussParams k = veh.kp;
    k.s0 = desired_gap(veh.policy, v_l, pp) - k.s_t;
    return v_safe_cdg(s, v_l, k);
  }
  return v_safe_krauss(s, v_l, veh.kp);
}

// Strand the vehicle's path continues on; -1 when it ends (sink or the lane
// cannot serve the turn).
int next_strand_for(const World& w, int strand, Turn tn) {
  const StrandInfo& s = w.net.strands[strand];
  if (s.internal) {
    const InternalEdge& e = w.net.internals[s.internal_id];
    return w.net.lane_strand(e.to_link, e.to_lane);
  }
  const Link& l = w.net.links[s.link];
  if (l.to_node < 0) return -1;
  const int e = l.turn_edge[s.lane][(int)tn];
  return e >= 0 ? w.net.internals[e].strand : -1;
}

struct LeaderInfo {
  bool found = false;
  int id = -1;
  double gap = 0.0;
  double v = 0.0;
};

LeaderInfo find_leader(const World& w, const Vehicle& veh, int idx) {
  LeaderInfo r;
  const auto& lst = w.order[veh.strand];
  if (idx > 0) {
    const Vehicle& l = w.vehicles[lst[idx - 1]];
    r.found = true;
    r.id = l.id;
    r.gap = l.pos - l.len - veh.pos;
    r.v = vp(w, l.id);
    return r;
  }
  double off = w.net.strands[veh.strand].len - veh.pos;
  int cs = veh.strand;
  for (int hop = 0; hop < 3 && off <= w.params.lookahead_m; ++hop) {
    const int ns = next_strand_for(w, cs, veh.next_turn);
    if (ns < 0) break;
    if (!w.order[ns].empty()) {
      const Vehicle& l = w.vehicles[w.order[ns].back()];
      r.found = true;
      r.id = l.id;
      r.gap = off + l.pos - l.len;
      r.v = vp(w, l.id);
      return r;
    }
    off += w.net.strands[ns].len;
    cs = ns;
    if (!w.net.strands[cs].internal) break;  // next turn choice is unknown
  }
  return r;
}

Turn draw_turn(World& w, const Link& l, int lane) {
  const double u = u01(w.rng);
  const double pr = lane == 0 ? l.p_right : 0.0;
  const double pl = lane == l.lanes - 1 ? l.p_left : 0.0;
  Turn t = Turn::Straight;
  if (u < pr)
    t = Turn::Right;
  else if (u < pr + pl)
    t = Turn::Left;
  if (l.to_node >= 0 && l.turn_edge[lane][(int)t] < 0) {
    for (Turn c : {Turn::Straight, Turn::Right, Turn::Left})
      if (l.turn_edge[lane][(int)c] >= 0) return c;
  }
  return t;
}

void insert_sorted(World& w, int strand, int id) {
  auto& lst = w.order[strand];
  const double p = w.vehicles[id].pos;
  auto it = lst.begin();
  while (it != lst.end() && w.vehicles[*it].pos >= p) ++it;
  lst.insert(it, id);
}

bool is_front(const World& w, const Vehicle& veh) {
  const auto& lst = w.order[veh.strand];
  return !lst.empty() && lst.front() == veh.id;
}

// Distance coverable in t seconds when accelerating at a toward vmax.
double reach_at(double v, double a, double vmax, double t) {
  const double t_acc = std::max(0.0, (vmax - v) / std::max(a, 1e-9));
  return t <= t_acc ? v * t + 0.5 * a * t * t
                    : 0.5 * (v + vmax) * t_acc + vmax * (t - t_acc);
}

// Any oncoming straight/right vehicle that could reach the conflict area
// within the gap-acceptance window, or stands primed at its stop line.
bool oncoming_threat(World& w, const Link& l, const Node& n) {
  const int o = n.in_link[opposite(l.heading)];
  if (o < 0) return false;
  const Link& ol = w.net.links[o];
  const double horizon = w.params.gap_accept_s * ol.vmax + 5.0;
  for (int lane = 0; lane < ol.lanes; ++lane) {
    const int s = w.net.lane_strand(o, lane);
    const double len = w.net.strands[s].len;
    for (int id : w.order[s]) {
      const Vehicle& vo = w.vehicles[id];
      const double dist = len - vo.pos;
      if (dist > horizon) break;
      if (vo.next_turn == Turn::Left) continue;
      const int eo = ol.turn_edge[lane][(int)vo.next_turn];
      if (eo < 0) continue;
      const InternalEdge& e = w.net.internals[eo];
      bool perm = false;
      const SigState st =
          signal_state(n.prog, n.offset, w.t(), e.major_axis, e.turn, &perm);
      const double v = vp(w, id);
      bool can_go = st == SigState::Green;
      if (st == SigState::Yellow) {
        if (v * v > 2.0 * vo.kp.b * std::max(0.0, dist - 0.1))
          can_go = true;
        else if (cdg_family(vo.policy))  // they cross on the schedule too
          can_go = dist <= reach_at(v, vo.kp.a, ol.vmax,
                                    signal_time_left(n.prog, n.offset, w.t()));
      }
      if (!can_go) continue;
      if (v > 0.1 ? dist / v <= w.params.gap_accept_s : dist <= 2.0)
        return true;
    }
  }
  return false;
}

// Permissive lefts wait inside the box, short of the oncoming stream's path.
double yield_point(const InternalEdge& e) {
  return e.turn == Turn::Left ? 0.45 * e.len : -1.0;
}

// Does this internal hold anyone who actually covers the conflict area?
// A left standing before its own yield point does not.
bool internal_blocks(const World& w, const InternalEdge& e) {
  const double yp = yield_point(e);
  for (int id : w.order[e.strand]) {
    const Vehicle& o = w.vehicles[id];
    if (vp(w, o.id) >= 0.5 || o.pos > yp) return true;
  }
  return false;
}

// Seconds until the crossing axis' through movement next shows green.
double next_cross_green(const SignalProgram& prog, double offset, double t,
                        bool my_axis) {
  const double cyc = prog.cycle();
  if (cyc <= 0.0) return 1e18;
  for (double u = 0.0; u < cyc; u += 0.1)
    if (signal_state(prog, offset, t + u, !my_axis, Turn::Straight) ==
        SigState::Green)
      return u;
  return 1e18;
}

// Release check for a left waiting at its yield point.
bool left_may_cross(World& w, const InternalEdge& e, double pos) {
  const Node& n = w.net.nodes[e.node];
  for (int j : n.internal_ids) {
    const InternalEdge& other = w.net.internals[j];
    if ((e.conflict_mask & (1u << other.local)) && internal_blocks(w, other))
      return false;
  }
  if (oncoming_threat(w, w.net.links[e.from_link], n)) return false;
  // the crossing has to fit into the time before cross traffic can arrive
  const double t_go = (e.len - pos) / std::max(e.vmax, 0.1) + 1.0;
  return t_go <= next_cross_green(n.prog, n.offset, w.t(), e.major_axis) + 2.0;
}

}  // namespace

const char* backend_name(Backend b) {
  return b == Backend::Krauss ? "krauss" : "controller";
}

bool backend_from_name(const std::string& s, Backend& out) {
  if (s == "krauss") {
    out = Backend::Krauss;
    return true;
  }
  if (s == "controller") {
    out = Backend::Controller;
    return true;
  }
  return false;
}

const char* teleport_kind_name(TeleportKind k) {
  switch (k) {
    case TeleportKind::Jam: return "jam";
    case TeleportKind::Junction: return "junction_block";
    case TeleportKind::TurnBlock: return "turn_block";
    case TeleportKind::Gridlock: return "gridlock";
  }
  return "?";
}

std::mt19937 seeded_rng(uint32_t seed) { return std::mt19937(seed); }

void world_init(World& w) {
  w.clock.dt = w.params.dt;
  w.rng = seeded_rng(w.params.seed);
  w.order.assign(w.net.strands.size(), {});
  w.strand_lines.assign(w.net.strands.size(), {});
  w.metrics.configure(w.params.metrics_window_s);
  w.next_gridlock_scan = w.params.gridlock_scan_s;
}

int add_vehicle(World& w, int strand, double pos, double v, Policy p) {
  Vehicle veh;
  veh.id = (int)w.vehicles.size();
  veh.policy = p;
  veh.len = w.params.pp.veh_len;
  veh.strand = strand;
  veh.pos = pos;
  veh.v = v;
  veh.spawn_t = w.t();
  veh.kp = krauss_params_for(p, w.clock.dt);
  veh.ctl.reset(sensor_buffer_depth(w.params.cp.sensor_delay, w.clock.dt));
  veh.was_held = v < 0.1;  // standing start counts as a held stop
  w.vehicles.push_back(veh);
  insert_sorted(w, strand, veh.id);
  const StrandInfo& s = w.net.strands[strand];
  if (!s.internal)
    w.vehicles[veh.id].next_turn = draw_turn(w, w.net.links[s.link], s.lane);
  ++w.spawned;
  return veh.id;
}

int add_cross_line(World& w, int strand, double pos, CrossLine::Kind kind,
                   int region, const std::string& name) {
  CrossLine cl;
  cl.id = (int)w.lines.size();
  cl.strand = strand;
  cl.pos = pos;
  cl.kind = kind;
  cl.region = region;
  cl.name = name;
  w.lines.push_back(cl);
  w.strand_lines[strand].push_back(cl.id);
  return cl.id;
}

bool signal_permits(World& w, Vehicle& veh, uint8_t* deny) {
  *deny = DenyNone;
  const StrandInfo& s = w.net.strands[veh.strand];
  if (s.internal) return true;
  const Link& l = w.net.links[s.link];
  if (l.to_node < 0) return true;
  const Node& n = w.net.nodes[l.to_node];
  const int ei = l.turn_edge[s.lane][(int)veh.next_turn];
  if (ei < 0) {
    *deny = DenyWrongLane;
    return false;
  }
  const InternalEdge& e = w.net.internals[ei];
  bool perm = false;
  const SigState st =
      signal_state(n.prog, n.offset, w.t(), e.major_axis, e.turn, &perm);
  if (st == SigState::Green) {
    veh.stop_decided = false;
    return true;
  }
  // yellow or red. The stop call latches: re-deciding every step would flip
  // approaches at speed into "can no longer stop" one after another and the
  // stream would never meet the light.
  if (veh.stop_decided) {
    *deny = DenyRed;
    return false;
  }
  const double dist = s.len - veh.pos;
  // connected platooners know the phase schedule and keep the crossing rate
  // up through yellow whenever they will reach the line in time; project the
  // reachable distance with the acceleration envelope, not the current speed.
  // A misjudged admit is still safe: the stop rule below catches it next step.
  if (st == SigState::Yellow && cdg_family(veh.policy) &&
      dist <= reach_at(veh.v, veh.kp.a, s.vmax,
                       signal_time_left(n.prog, n.offset, w.t())))
    return true;
  if (veh.v > 0.1 &&
      veh.v * veh.v > 2.0 * veh.kp.b * std::max(0.0, dist - 0.1))
    return true;  // past the braking point, roll through
  veh.stop_decided = true;
  *deny = DenyRed;
  return false;
}

bool entry_decision(World& w, Vehicle& veh, uint8_t* deny) {
  if (!signal_permits(w, veh, deny)) return false;
  const StrandInfo& s = w.net.strands[veh.strand];
  if (s.internal) return true;
  const Link& l = w.net.links[s.link];
  if (l.to_node < 0) return true;
  const Node& n = w.net.nodes[l.to_node];
  const int ei = l.turn_edge[s.lane][(int)veh.next_turn];
  const double dist = s.len - veh.pos;
  if (veh.v > 0.1 &&
      veh.v * veh.v > 2.0 * veh.kp.b * std::max(0.0, dist - 0.1))
    return ei >= 0;  // committed vehicles cannot honor holds either
  const InternalEdge& e = w.net.internals[ei];
  bool perm = false;
  const SigState st =
      signal_state(n.prog, n.offset, w.t(), e.major_axis, e.turn, &perm);
  for (int j : n.internal_ids) {
    const InternalEdge& other = w.net.internals[j];
    if (!(e.conflict_mask & (1u << other.local))) continue;
    // a left heading for its yield point only minds cross-axis traffic; the
    // oncoming stream it yields to crosses beyond that point
    if (e.turn == Turn::Left && other.major_axis == e.major_axis) continue;
    if (internal_blocks(w, other)) {
      *deny = DenyConflict;
      return false;
    }
  }
  // lefts pull into the box and wait at the yield point; the bay holds one,
  // the next left blocks its lane at the line for the rest of the cycle
  if (e.turn == Turn::Left && st == SigState::Green && perm &&
      !w.order[e.strand].empty()) {
    *deny = DenyOncoming;
    return false;
  }
  // no-block heuristic: a standing queue on the outbound lane means joining
  // traffic stacks up behind it. Predict the stacked resting position and
  // hold at the line if it would leave the tail inside the box. Flowing
  // (not yet stopped) downstream traffic is assumed to clear, which is the
  // part of the prediction that sometimes fails.
  const int ts = w.net.lane_strand(e.to_link, e.to_lane);
  const double il = w.net.strands[e.strand].len;
  double q_rear = -1.0;  // rear of the standing queue, 0 = box entry
  int movers = 0;
  for (auto it = w.order[ts].rbegin(); it != w.order[ts].rend(); ++it) {
    const Vehicle& o = w.vehicles[*it];
    if (o.pos - o.len > w.params.lookahead_m) break;
    if (w.v_prev[o.id] < 1.0) {
      q_rear = il + o.pos - o.len;
      break;
    }
    ++movers;
  }
  if (q_rear >= 0.0) {
    movers += (int)w.order[e.strand].size();
    const double front =
        q_rear - w.params.pp.r -
        (double)movers * (w.params.pp.veh_len + w.params.pp.r);
    if (front - veh.len < il + veh.kp.s0) {
      const bool miss = w.params.heuristic_miss_p > 0.0 &&
                        u01(w.rng) < w.params.heuristic_miss_p;
      if (!miss) {
        *deny = DenyDownstream;
        return false;
      }
    }
  }
  return true;
}

bool try_lane_change(World& w, int vehicle_id, int target_lane) {
  Vehicle& veh = w.vehicles[vehicle_id];
  const StrandInfo& s = w.net.strands[veh.strand];
  if (s.internal) return false;
  const Link& l = w.net.links[s.link];
  if (target_lane < 0 || target_lane >= l.lanes || target_lane == s.lane)
    return false;
  const int ts = w.net.lane_strand(s.link, target_lane);
  const auto& lst = w.order[ts];
  // first vehicle ahead of and behind the merge position
  int ahead = -1, behind = -1;
  for (int id : lst) {
    if (w.vehicles[id].pos >= veh.pos)
      ahead = id;
    else {
      behind = id;
      break;
    }
  }
  if (ahead >= 0) {
    const Vehicle& a = w.vehicles[ahead];
    if (a.pos - a.len - veh.pos < desired_gap(veh.policy, veh.v, w.params.pp))
      return false;
  }
  if (behind >= 0) {
    const Vehicle& b = w.vehicles[behind];
    if (veh.pos - veh.len - b.pos < desired_gap(b.policy, b.v, w.params.pp))
      return false;
  }
  auto& old_lst = w.order[veh.strand];
  old_lst.erase(std::find(old_lst.begin(), old_lst.end(), vehicle_id));
  veh.strand = ts;
  veh.stop_decided = false;
  insert_sorted(w, ts, vehicle_id);
  return true;
}

double teleport_threshold(const World& w, const Vehicle& veh) {
  const StrandInfo& s = w.net.strands[veh.strand];
  if (s.internal) {
    const InternalEdge& e = w.net.internals[s.internal_id];
    const Node& n = w.net.nodes[e.node];
    const double g = n.prog.green_for(e.major_axis);
    return g > 0.0 ? w.params.teleport_greens * g : 1e18;
  }
  const Link& l = w.net.links[s.link];
  if (l.to_node < 0) return 1e18;
  const double cyc = w.net.nodes[l.to_node].prog.cycle();
  return cyc > 0.0 ? w.params.teleport_cycles * cyc : 1e18;
}

std::vector<int> gridlock_cycle_nodes(const World& w) {
  const int n = (int)w.net.nodes.size();
  std::vector<std::vector<int>> adj(n);
  bool any = false;
  for (const Link& l : w.net.links) {
    if (l.to_node < 0) continue;
    for (int lane = 0; lane < l.lanes; ++lane) {
      const auto& lst = w.order[w.net.lane_strand(l.id, lane)];
      if (lst.empty()) continue;
      const Vehicle& f = w.vehicles[lst.front()];
      if (f.deny != DenyDownstream) continue;
      const int e = l.turn_edge[lane][(int)f.next_turn];
      if (e < 0) continue;
      const int b = w.net.links[w.net.internals[e].to_link].to_node;
      if (b >= 0 && b != l.to_node) {
        adj[l.to_node].push_back(b);
        any = true;
      }
    }
  }
  std::vector<int> out;
  if (!any) return out;
  // Tarjan SCC; nodes inside a component of size >= 2 are mutually waiting.
  std::vector<int> index(n, -1), low(n, 0), stk;
  std::vector<char> on(n, 0);
  std::vector<char> cyc(n, 0);
  int counter = 0;
  struct Frame {
    int v;
    std::size_t ei;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1 || adj[root].empty()) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stk.push_back(root);
    on[root] = 1;
    while (!call.empty()) {
      Frame& fr = call.back();
      if (fr.ei < adj[fr.v].size()) {
        const int u = adj[fr.v][fr.ei++];
        if (index[u] == -1) {
          index[u] = low[u] = counter++;
          stk.push_back(u);
          on[u] = 1;
          call.push_back({u, 0});
        } else if (on[u]) {
          low[fr.v] = std::min(low[fr.v], index[u]);
        }
      } else {
        const int v = fr.v;
        call.pop_back();
        if (!call.empty())
          low[call.back().v] = std::min(low[call.back().v], low[v]);
        if (low[v] == index[v]) {
          std::vector<int> comp;
          int u;
          do {
            u = stk.back();
            stk.pop_back();
            on[u] = 0;
            comp.push_back(u);
          } while (u != v);
          if (comp.size() >= 2)
            for (int c : comp) cyc[c] = 1;
        }
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (cyc[i]) out.push_back(i);
  return out;
}

double sample_density(const World& w) {
  const double total = w.density.total_len();
  if (total <= 0.0) return 0.0;
  double occ = 0.0;
  for (const auto& seg : w.density.segs)
    for (int id : w.order[seg.strand]) {
      const Vehicle& veh = w.vehicles[id];
      const double lo = std::max(seg.a, veh.pos - veh.len);
      const double hi = std::min(seg.b, veh.pos);
      if (hi > lo) occ += hi - lo;
    }
  return occ / total;
}

namespace {

void fire_lines(World& w, Vehicle& veh, int strand, double from, double to,
                double base, double dx_total, double t0) {
  if (dx_total <= 0.0) return;
  for (int lid : w.strand_lines[strand]) {
    const CrossLine& cl = w.lines[lid];
    if (!(cl.pos > from && cl.pos <= to)) continue;
    const double tc = t0 + w.clock.dt * (base + cl.pos - from) / dx_total;
    switch (cl.kind) {
      case CrossLine::ThroughputExit:
        w.metrics.on_exit(tc);
        break;
      case CrossLine::RegionEntry:
        veh.region = cl.region;
        veh.region_entry_t = tc;
        break;
      case CrossLine::RegionExit:
        if (veh.region == cl.region && veh.region_entry_t >= 0.0) {
          w.metrics.on_travel_sample(tc, tc - veh.region_entry_t);
          veh.region = -1;
          veh.region_entry_t = -1.0;
        }
        break;
      default:
        break;
    }
    if (!cl.name.empty()) {
      Event ev;
      ev.kind = Event::Detector;
      ev.t = tc;
      ev.vehicle = veh.id;
      ev.line = cl.id;
      ev.strand = strand;
      w.events.push_back(ev);
    }
  }
}

}  // namespace

Policy draw_policy(World& w, Spawner& sp) {
  if (!sp.use_mix) return sp.policy;
  if (sp.mix.penetration <= 0.0) return sp.mix.ctg_member;
  if (sp.mix.penetration >= 1.0) return sp.mix.cdg_member;
  if (sp.mix.mode == MixMode::Random)
    return u01(w.rng) < sp.mix.penetration ? sp.mix.cdg_member
                                           : sp.mix.ctg_member;
  Policy p = sp.mix.ctg_member;
  if (sp.mix_acc >= 1.0 - 1e-12) {
    p = sp.mix.cdg_member;
    sp.mix_acc -= 1.0;
  }
  sp.mix_acc += sp.mix.penetration;
  return p;
}

namespace {

void spawn_step(World& w, Spawner& sp, double t) {
  const Link& l = w.net.links[sp.link];
  if (sp.mode == SpawnMode::Saturated) {
    for (int lane = 0; lane < l.lanes; ++lane) {
      const int s = w.net.lane_strand(sp.link, lane);
      const auto& lst = w.order[s];
      double front = 20.0;
      if (!lst.empty()) {
        const Vehicle& tail = w.vehicles[lst.back()];
        front = std::min(front,
                         tail.pos - tail.len - w.params.relocate_margin);
      }
      if (front < w.params.pp.veh_len) continue;
      const Policy p = draw_policy(w, sp);
      // demand arrives at speed; only a backed-up queue forces rest inserts
      double v0 = w.net.strands[s].vmax;
      if (!lst.empty()) {
        const Vehicle& tail = w.vehicles[lst.back()];
        Vehicle probe;
        probe.policy = p;
        probe.kp = krauss_params_for(p, w.clock.dt);
        const double gap = tail.pos - tail.len - front;
        v0 = std::max(
            0.0, std::min(v0, v_safe_policy(probe, gap, tail.v, w.params.pp)));
      }
      add_vehicle(w, s, front, v0, p);
      w.metrics.on_inflow(t, sp.inflow_group);
    }
    return;
  }
  sp.acc = std::min(sp.acc + sp.rate_vph / 3600.0 * w.clock.dt, 3.0);
  if (sp.acc < 1.0) return;
  int lane = 0;
  if (l.lanes > 1 && u01(w.rng) >= l.right_lane_load) lane = 1;
  const int s = w.net.lane_strand(sp.link, lane);
  const auto& lst = w.order[s];
  const double vmax = w.params.leader_speed_factor * l.vmax;
  double v0 = vmax;
  const double front = w.params.pp.veh_len;
  if (!lst.empty()) {
    const Vehicle& tail = w.vehicles[lst.back()];
    const double gap = tail.pos - tail.len - front;
    const Policy p = sp.use_mix ? sp.mix.ctg_member : sp.policy;
    if (gap < desired_gap(p, tail.v, w.params.pp)) return;  // keep waiting
    v0 = std::min(vmax, tail.v);
  }
  const Policy p = draw_policy(w, sp);
  add_vehicle(w, s, front, v0, p);
  w.metrics.on_inflow(t, sp.inflow_group);
  sp.acc -= 1.0;
}

void relocate_or_remove(World& w, Vehicle& veh, Event& ev) {
  // Candidate links beyond the blockage, following the route (straight
  // preferred once the chosen turn is consumed).
  std::vector<std::pair<int, int>> cands;  // link, lane
  int link = -1, lane = 0;
  const StrandInfo& s = w.net.strands[veh.strand];
  if (s.internal) {
    const InternalEdge& e = w.net.internals[s.internal_id];
    link = e.to_link;
    lane = e.to_lane;
  } else {
    const Link& l = w.net.links[s.link];
    int e = l.to_node >= 0 ? l.turn_edge[s.lane][(int)veh.next_turn] : -1;
    if (e < 0 && l.to_node >= 0)
      for (Turn c : {Turn::Straight, Turn::Right, Turn::Left})
        if ((e = l.turn_edge[s.lane][(int)c]) >= 0) break;
    if (e >= 0) {
      link = w.net.internals[e].to_link;
      lane = w.net.internals[e].to_lane;
    }
  }
  while (link >= 0 && (int)cands.size() < w.params.relocate_hops) {
    cands.emplace_back(link, lane);
    const Link& l = w.net.links[link];
    if (l.to_node < 0) break;
    int e = -1;
    for (Turn c : {Turn::Straight, Turn::Right, Turn::Left})
      if ((e = l.turn_edge[lane][(int)c]) >= 0) break;
    if (e < 0) break;
    link = w.net.internals[e].to_link;
    lane = w.net.internals[e].to_lane;
  }
  for (auto [lk, ln] : cands) {
    const int ts = w.net.lane_strand(lk, ln);
    const auto& lst = w.order[ts];
    double front = veh.len;
    if (!lst.empty()) {
      const Vehicle& tail = w.vehicles[lst.back()];
      front = tail.pos - tail.len - w.params.relocate_margin;
    }
    if (front < veh.len) continue;
    auto& old_lst = w.order[veh.strand];
    old_lst.erase(std::find(old_lst.begin(), old_lst.end(), veh.id));
    veh.strand = ts;
    veh.pos = front;
    veh.v = 0.0;
    veh.wait = 0.0;
    veh.blocked_at_line = 0.0;
    veh.deny = DenyNone;
    veh.stop_decided = false;
    veh.gridlocked = false;
    veh.region = -1;
    veh.region_entry_t = -1.0;
    veh.profile_t0 = -1.0;
    veh.was_held = false;
    veh.ctl.reset(sensor_buffer_depth(w.params.cp.sensor_delay, w.clock.dt));
    insert_sorted(w, ts, veh.id);
    veh.next_turn = draw_turn(w, w.net.links[lk], ln);
    ev.removed = false;
    return;
  }
  auto& old_lst = w.order[veh.strand];
  old_lst.erase(std::find(old_lst.begin(), old_lst.end(), veh.id));
  veh.active = false;
  ++w.removed;
  ev.removed = true;
}

void do_teleport(World& w, int id) {
  Vehicle& veh = w.vehicles[id];
  const StrandInfo& s = w.net.strands[veh.strand];
  TeleportKind k = TeleportKind::Jam;
  if (veh.gridlocked)
    k = TeleportKind::Gridlock;
  else if (s.internal)
    k = TeleportKind::Junction;
  else if ((veh.deny == DenyDownstream || veh.deny == DenyOncoming ||
            veh.deny == DenyConflict) &&
           veh.next_turn != Turn::Straight)
    k = TeleportKind::TurnBlock;
  Event ev;
  ev.kind = Event::Teleport;
  ev.t = w.t();
  ev.vehicle = id;
  ev.tk = k;
  ev.onset = w.t() - veh.wait;
  ev.strand = veh.strand;
  relocate_or_remove(w, veh, ev);
  ++w.teleports;
  if (k == TeleportKind::Gridlock) ++w.gridlock_teleports;
  w.metrics.on_teleport(w.t());
  w.events.push_back(ev);
}

void audit(World& w) {
  std::size_t listed = 0;
  for (const auto& lst : w.order) listed += lst.size();
  std::size_t active = 0;
  for (const auto& veh : w.vehicles)
    if (veh.active) ++active;
  if (listed != active || w.spawned != w.vehicles.size() ||
      active + w.exited + w.removed != w.spawned)
    throw SimAbort(fmt::format(
        "conservation breach at t={}: spawned={} active={} listed={} "
        "exited={} removed={}",
        w.t(), w.spawned, active, listed, w.exited, w.removed));
}

}  // namespace

void step_world(World& w) {
  const double t = w.t();
  const double dt = w.clock.dt;

  // (0) snapshot previous-step speeds
  w.v_prev.resize(w.vehicles.size());
  for (const auto& veh : w.vehicles) w.v_prev[veh.id] = veh.v;

  // (1)+(2) signal-aware entry decisions and speed updates, per strand,
  // front to back, against previous-step leader states
  for (std::size_t si = 0; si < w.order.size(); ++si) {
    const StrandInfo& s = w.net.strands[si];
    auto& lst = w.order[si];
    for (std::size_t i = 0; i < lst.size(); ++i) {
      Vehicle& veh = w.vehicles[lst[i]];
      const double v_own = w.v_prev[veh.id];
      const double dist_line = s.len - veh.pos;
      const bool front = i == 0;
      bool walled = false;
      veh.may_cross = true;
      veh.deny = DenyNone;
      if (!s.internal && w.net.links[s.link].to_node >= 0) {
        if (dist_line <= 60.0) {
          if (front) {
            veh.may_cross = entry_decision(w, veh, &veh.deny);
            walled = !veh.may_cross;
          } else {
            // boxed in, but the signal still applies: without this a
            // saturated stream never meets a red, each new front being
            // already past its stopping point
            veh.may_cross = false;
            walled = !signal_permits(w, veh, &veh.deny);
          }
        } else {
          veh.may_cross = false;  // far from the line
        }
      }
      // in-box yield wall for a permissive left short of its yield point
      double hold_dist = -1.0;
      if (s.internal && front) {
        const InternalEdge& e = w.net.internals[s.internal_id];
        const double yp = yield_point(e);
        if (yp > 0.0 && veh.pos < yp - 1e-9 && !left_may_cross(w, e, veh.pos))
          hold_dist = yp - veh.pos;
      }

      const LeaderInfo li = find_leader(w, veh, (int)i);
      if (li.found && li.gap < -1e-6)
        throw SimAbort(fmt::format(
            "negative gap at t={}: vehicle {} (strand {} pos {}) behind "
            "vehicle {} gap={}",
            t, veh.id, veh.strand, veh.pos, li.id, li.gap));

      // speed limit, lowered ahead of slower strands (turn arcs)
      double vmax_eff = s.vmax;
      {
        double off = dist_line;
        int cs = (int)si;
        for (int hop = 0; hop < 2 && off < w.params.lookahead_m; ++hop) {
          const int ns = next_strand_for(w, cs, veh.next_turn);
          if (ns < 0) break;
          const StrandInfo& nsi = w.net.strands[ns];
          if (nsi.vmax < vmax_eff)
            vmax_eff = std::min(
                vmax_eff, std::sqrt(nsi.vmax * nsi.vmax +
                                    2.0 * veh.kp.b * std::max(0.0, off)));
          off += nsi.len;
          cs = ns;
          if (!nsi.internal) break;
        }
      }

      if (w.params.backend == Backend::Krauss) {
        // reaction time after a held stop, for the front of the release wave
        if (front && walled && v_own < 0.1) {
          veh.was_held = true;
          veh.profile_t0 = -1.0;
        } else if (veh.was_held && v_own < 0.1 && !walled) {
          veh.profile_t0 = t;
          veh.was_held = false;
        }
        if (!li.found) vmax_eff *= w.params.leader_speed_factor;
        double vs = 1e9;
        if (li.found) vs = v_safe_policy(veh, li.gap, li.v, w.params.pp);
        if (walled) {
          const double gw = dist_line + veh.kp.s0 + veh.kp.s_t - 0.1;
          const double vw = cdg_family(veh.policy)
                                ? v_safe_cdg(gw, 0.0, veh.kp)
                                : v_safe_krauss(gw, 0.0, veh.kp);
          vs = std::min(vs, vw);
        }
        if (hold_dist >= 0.0) {
          const double gh = hold_dist + veh.kp.s0 + veh.kp.s_t - 0.1;
          vs = std::min(vs, cdg_family(veh.policy)
                                ? v_safe_cdg(gh, 0.0, veh.kp)
                                : v_safe_krauss(gh, 0.0, veh.kp));
        }
        if (veh.profile_t0 >= 0.0 &&
            t - veh.profile_t0 < w.params.startup_delay_s - 1e-9)
          vs = 0.0;
        veh.v = krauss_step(v_own, vs, veh.kp, vmax_eff, dt, u01(w.rng));
      } else {
        const ControllerParams& cp = w.params.cp;
        double e_del = 0.0, e_old = 0.0;
        const bool have_del = veh.ctl.delayed_error(e_del, e_old);
        veh.ctl.push_error(
            li.found ? li.gap - desired_gap(veh.policy, v_own, w.params.pp)
                     : 0.0);
        // start-up profile anchor: held at a closed line, then released
        if (front && walled && v_own < 0.1) {
          veh.was_held = true;
          veh.profile_t0 = -1.0;
        } else if (!li.found && veh.was_held && v_own < 0.1 && !walled) {
          veh.profile_t0 = t;
          veh.was_held = false;
        }
        double u_cmd;
        if (li.found) {
          const double fb =
              have_del ? feedback_accel(cp, e_del, (e_del - e_old) / dt) : 0.0;
          double ff = 0.0;
          const Vehicle& lead = w.vehicles[li.id];
          const bool fresh = lead.out.t >= t - cp.ff_staleness;
          if (cdg_family(veh.policy)) {
            if (fresh)
              ff = feedforward_accel_cdg(veh.ctl.a, cp.tau_plant, lead.out.a,
                                         lead.out.u, lead.out.tau,
                                         cp.ff_horizon);
          } else {
            const double tc =
                std::max(ctg_headway(veh.policy, w.params.pp),
                         cp.ctg_ff_tc_min);
            veh.ctl.ff += (dt / tc) * ((fresh ? lead.out.u : 0.0) - veh.ctl.ff);
            ff = veh.ctl.ff;
          }
          u_cmd = fb + ff;
        } else {
          const double v_cmd =
              veh.profile_t0 >= 0.0
                  ? w.profile.speed(t - veh.profile_t0)
                  : w.params.leader_speed_factor * s.vmax;
          u_cmd = (v_cmd - v_own) / dt;
        }
        auto cap = [&](double v_allow) {
          u_cmd = std::min(u_cmd, (v_allow - v_own) / dt);
        };
        cap(li.found ? vmax_eff : w.params.leader_speed_factor * vmax_eff);
        if (walled)
          cap(std::sqrt(2.0 * cp.b_max * std::max(0.0, dist_line - 0.1)));
        if (hold_dist >= 0.0)
          cap(std::sqrt(2.0 * cp.b_max * std::max(0.0, hold_dist - 0.1)));
        if (li.found)
          cap(std::sqrt(std::max(
              0.0, li.v * li.v + 2.0 * cp.b_max * (li.gap - w.params.pp.r))));
        veh.ctl.u = std::clamp(u_cmd, -cp.b_max, cp.a_max);
        double a_new = plant_step(veh.ctl.a, u_cmd, cp, dt);
        if (v_own <= 1e-9 && a_new < 0.0) a_new = 0.0;  // no reversing
        veh.ctl.a = a_new;
        veh.v = std::max(0.0, v_own + a_new * dt);
      }
    }
  }

  // (2b) broadcast controller state; followers read it next step
  if (w.params.backend == Backend::Controller)
    for (auto& veh : w.vehicles)
      if (veh.active)
        veh.out = CommPacket{t, veh.ctl.u, veh.ctl.a, w.params.cp.tau_plant};

  // (3)+(4) position integration, boundary crossings, detectors
  for (std::size_t si = 0; si < w.order.size(); ++si) {
    const StrandInfo& s = w.net.strands[si];
    auto& lst = w.order[si];
    for (std::size_t i = 0; i < lst.size();) {
      Vehicle& veh = w.vehicles[lst[i]];
      if (veh.moved_step == w.clock.step) {
        ++i;
        continue;
      }
      veh.moved_step = w.clock.step;
      const double dx = veh.v * dt;
      const double old_pos = veh.pos;
      double new_raw = old_pos + dx;
      // emergency stop: the deceleration floor lets a follower carry more
      // speed than the stop wave ahead allows; absorb the residue here
      // instead of overlapping. Same-strand leaders have already moved.
      if (i > 0) {
        const Vehicle& ld = w.vehicles[lst[i - 1]];
        const double limit = ld.pos - ld.len - 0.05;
        if (new_raw > limit) {
          new_raw = std::max(old_pos, limit);
          veh.v = (new_raw - old_pos) / dt;
          ++w.emergency_brakes;
        }
      }
      if (new_raw <= s.len + 1e-12) {
        fire_lines(w, veh, (int)si, old_pos, new_raw, 0.0, dx, t);
        veh.pos = new_raw;
        ++i;
        continue;
      }
      int ns = -1;
      bool held = false;
      if (!s.internal) {
        const Link& l = w.net.links[s.link];
        if (l.to_node >= 0) {
          const int e = l.turn_edge[s.lane][(int)veh.next_turn];
          if (e >= 0 && veh.may_cross)
            ns = w.net.internals[e].strand;
          else
            held = true;
        }
      } else {
        ns = next_strand_for(w, (int)si, veh.next_turn);
      }
      if (held) {  // numeric safety net; the wall keeps vehicles off the line
        const double clamp_pos = s.len - 0.01;
        fire_lines(w, veh, (int)si, old_pos, clamp_pos, 0.0, dx, t);
        veh.pos = clamp_pos;
        veh.v = 0.0;
        ++i;
        continue;
      }
      fire_lines(w, veh, (int)si, old_pos, s.len, 0.0, dx, t);
      if (ns < 0) {  // leaves the network
        veh.active = false;
        ++w.exited;
        lst.erase(lst.begin() + i);
        continue;
      }
      double carry = new_raw - s.len;
      // same emergency stop across the boundary; if the target strand's tail
      // sits on the line, stay put this step rather than slot in on top
      if (!w.order[ns].empty()) {
        const Vehicle& tail = w.vehicles[w.order[ns].back()];
        const double limit = tail.pos - tail.len - 0.05;
        if (carry > limit) {
          ++w.emergency_brakes;
          if (limit < 0.0) {
            const double clamp_pos = std::max(old_pos, s.len - 0.01);
            fire_lines(w, veh, (int)si, old_pos, clamp_pos, 0.0, dx, t);
            veh.pos = clamp_pos;
            veh.v = 0.0;
            ++i;
            continue;
          }
          carry = limit;
          veh.v = (s.len - old_pos + carry) / dt;
        }
      }
      fire_lines(w, veh, ns, 0.0, carry, s.len - old_pos, dx, t);
      lst.erase(lst.begin() + i);
      veh.strand = ns;
      veh.pos = carry;
      veh.stop_decided = false;
      insert_sorted(w, ns, veh.id);
      const StrandInfo& nsi = w.net.strands[ns];
      if (!nsi.internal) {
        veh.next_turn = draw_turn(w, w.net.links[nsi.link], nsi.lane);
        veh.blocked_at_line = 0.0;
      }
    }
  }

  // lane changes: vehicles whose movement needs the other lane, and vehicles
  // stuck behind a front that stands held at the line while its lane's turn
  // waits out the cycle (the blocked ones escape if their movement allows)
  if (w.params.lane_changes)
    for (const Link& l : w.net.links) {
      if (l.lanes < 2 || l.to_node < 0) continue;
      for (int lane = 0; lane < l.lanes; ++lane) {
        const auto lst = w.order[w.net.lane_strand(l.id, lane)];  // copy
        const bool lane_held =
            !lst.empty() && w.vehicles[lst.front()].v < 0.1 &&
            (w.vehicles[lst.front()].deny == DenyOncoming ||
             w.vehicles[lst.front()].deny == DenyConflict ||
             w.vehicles[lst.front()].deny == DenyDownstream);
        for (size_t k = 0; k < lst.size(); ++k) {
          const int id = lst[k];
          const Vehicle& veh = w.vehicles[id];
          if (l.turn_edge[lane][(int)veh.next_turn] >= 0) {
            if (!lane_held || k == 0) continue;
            for (int tl = 0; tl < l.lanes; ++tl)
              if (tl != lane && l.turn_edge[tl][(int)veh.next_turn] >= 0) {
                try_lane_change(w, id, tl);
                break;
              }
            continue;
          }
          for (int tl = 0; tl < l.lanes; ++tl)
            if (l.turn_edge[tl][(int)veh.next_turn] >= 0) {
              try_lane_change(w, id, tl);
              break;
            }
        }
      }
    }

  for (auto& sp : w.spawners) spawn_step(w, sp, t);

  // (5) waiting clocks, gridlock flags, teleports
  if (t >= w.next_gridlock_scan - 1e-9) {
    w.next_gridlock_scan += w.params.gridlock_scan_s;
    const auto cyc = gridlock_cycle_nodes(w);
    if (!cyc.empty()) {
      std::vector<char> in_cyc(w.net.nodes.size(), 0);
      for (int c : cyc) in_cyc[c] = 1;
      for (const Link& l : w.net.links) {
        if (l.to_node < 0 || !in_cyc[l.to_node]) continue;
        for (int lane = 0; lane < l.lanes; ++lane) {
          const auto& lst = w.order[w.net.lane_strand(l.id, lane)];
          if (lst.empty()) continue;
          Vehicle& f = w.vehicles[lst.front()];
          if (f.deny != DenyDownstream) continue;
          const int e = l.turn_edge[lane][(int)f.next_turn];
          if (e < 0) continue;
          const int b = w.net.links[w.net.internals[e].to_link].to_node;
          if (b >= 0 && in_cyc[b]) f.gridlocked = true;
        }
      }
    }
  }
  std::vector<int> stuck;
  for (auto& veh : w.vehicles) {
    if (!veh.active) continue;
    if (veh.v < 0.1) {
      veh.wait += dt;
    } else {
      veh.wait = 0.0;
      veh.gridlocked = false;
    }
    const StrandInfo& s = w.net.strands[veh.strand];
    const bool at_line = !s.internal && veh.deny != DenyNone &&
                         s.len - veh.pos < 2.0 && is_front(w, veh);
    if (at_line) {
      veh.blocked_at_line += dt;
      if (veh.deny == DenyWrongLane) {
        const Link& l = w.net.links[s.link];
        const double cyc =
            l.to_node >= 0 ? w.net.nodes[l.to_node].prog.cycle() : 0.0;
        if (cyc > 0.0 && veh.blocked_at_line > cyc) {
          for (Turn c : {Turn::Straight, Turn::Right, Turn::Left})
            if (l.turn_edge[s.lane][(int)c] >= 0) {
              veh.next_turn = c;
              break;
            }
          veh.blocked_at_line = 0.0;
        }
      }
    } else {
      veh.blocked_at_line = 0.0;
    }
    if (veh.wait > teleport_threshold(w, veh)) stuck.push_back(veh.id);
  }
  for (int id : stuck) do_teleport(w, id);

  const double t_end = t + dt;
  if (!w.density.segs.empty())
    w.metrics.on_density_sample(t_end, sample_density(w));
  w.metrics.maybe_close_windows(t_end);

  if (w.clock.step % 100 == 0) audit(w);
  ++w.clock.step;
}

RunLog run(World& w, double duration) {
  const int64_t steps = (int64_t)std::llround(duration / w.clock.dt);
  for (int64_t k = 0; k < steps; ++k) step_world(w);
  audit(w);
  w.metrics.finalize(w.t());
  RunLog log;
  log.rows = w.metrics.rows();
  log.events = w.events;
  log.exits = w.metrics.exits_total();
  log.teleports = w.teleports;
  log.gridlock_teleports = w.gridlock_teleports;
  log.emergency_brakes = w.emergency_brakes;
  log.density_peak = w.metrics.density_peak();
  log.travel_mean = w.metrics.travel_mean_total();
  log.has_travel = log.travel_mean > 0.0;
  log.duration = duration;
  return log;
}

}  // namespace pf
