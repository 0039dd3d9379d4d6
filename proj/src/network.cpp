#include "platoonflow/network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pf {

int Network::add_node(double x, double y) {
  Node n;
  n.id = (int)nodes.size();
  n.x = x;
  n.y = y;
  nodes.push_back(n);
  return n.id;
}

int Network::add_link(int from, int to, double len, int lanes, double vmax,
                      RoadClass cls, bool major_axis, int heading) {
  Link l;
  l.id = (int)links.size();
  l.from_node = from;
  l.to_node = to;
  l.len = len;
  l.lanes = lanes;
  l.vmax = vmax;
  l.cls = cls;
  l.major_axis = major_axis;
  l.heading = heading;
  links.push_back(l);
  if (from >= 0) nodes[from].out_link[heading] = l.id;
  if (to >= 0) nodes[to].in_link[heading] = l.id;
  return l.id;
}

int Network::add_internal(int node, int from_link, int from_lane, Turn turn,
                          int to_link, int to_lane) {
  InternalEdge e;
  e.id = (int)internals.size();
  e.node = node;
  e.from_link = from_link;
  e.from_lane = from_lane;
  e.to_link = to_link;
  e.to_lane = to_lane;
  e.turn = turn;
  const Link& in = links[from_link];
  e.major_axis = in.major_axis;
  if (turn == Turn::Straight) {
    e.len = 2.0 * stop_offset;
    e.vmax = in.vmax;
  } else {
    e.len = 0.5 * std::numbers::pi * turn_radius;
    e.vmax = turn_speed(turn_radius, a_lat, in.vmax);
  }
  e.local = (int)nodes[node].internal_ids.size();
  if (e.local >= 32) throw std::logic_error("too many movements at one node");
  internals.push_back(e);
  nodes[node].internal_ids.push_back(e.id);
  links[from_link].turn_edge[from_lane][(int)turn] = e.id;
  return e.id;
}

void Network::wire_intersection(int node) {
  Node& n = nodes[node];
  n.signalized = true;
  for (int h = 0; h < 4; ++h) {
    const int in = n.in_link[h];
    if (in < 0) continue;
    const Link& L = links[in];
    const int lanes = L.lanes;
    for (int lane = 0; lane < lanes; ++lane) {
      const int out_s = n.out_link[h];
      if (out_s >= 0) {
        const int tl = std::min(lane, links[out_s].lanes - 1);
        add_internal(node, in, lane, Turn::Straight, out_s, tl);
      }
      if (lane == 0) {
        const int out_r = n.out_link[right_of(h)];
        if (out_r >= 0) add_internal(node, in, lane, Turn::Right, out_r, 0);
      }
      if (lane == lanes - 1) {
        const int out_l = n.out_link[left_of(h)];
        if (out_l >= 0)
          add_internal(node, in, lane, Turn::Left, out_l,
                       links[out_l].lanes - 1);
      }
    }
  }
}

bool movements_conflict(const InternalEdge& a, const InternalEdge& b) {
  if (a.from_link == b.from_link) return false;
  // merging into the same receiving lane is a conflict wherever it comes from
  if (a.to_link == b.to_link && a.to_lane == b.to_lane) return true;
  if (a.major_axis != b.major_axis)
    // rights hug their corner and cross nothing on the other axis
    return a.turn != Turn::Right && b.turn != Turn::Right;
  // Same axis, opposite approaches: lefts cross the oncoming through stream.
  const bool a_left = a.turn == Turn::Left;
  const bool b_left = b.turn == Turn::Left;
  if (a_left && b_left) return false;
  return a_left || b_left;
}

void Network::finalize() {
  strands.clear();
  for (auto& l : links) {
    l.strand0 = (int)strands.size();
    for (int lane = 0; lane < l.lanes; ++lane) {
      StrandInfo s;
      s.internal = false;
      s.link = l.id;
      s.lane = lane;
      s.len = l.len;
      s.vmax = l.vmax;
      strands.push_back(s);
    }
  }
  for (auto& e : internals) {
    e.strand = (int)strands.size();
    StrandInfo s;
    s.internal = true;
    s.internal_id = e.id;
    s.len = e.len;
    s.vmax = e.vmax;
    strands.push_back(s);
  }
  for (auto& n : nodes) {
    for (int i : n.internal_ids) {
      InternalEdge& a = internals[i];
      a.conflict_mask = 0;
      for (int j : n.internal_ids) {
        if (i == j) continue;
        if (movements_conflict(a, internals[j]))
          a.conflict_mask |= (1u << internals[j].local);
      }
    }
  }
}

}  // namespace pf
