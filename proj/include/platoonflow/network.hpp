#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "platoonflow/signals.hpp"

namespace pf {

enum class RoadClass : uint8_t { Major, Minor };

// Compass headings; the heading of a link is its direction of travel.
enum Heading : int { North = 0, East = 1, South = 2, West = 3 };
inline int right_of(int h) { return (h + 1) % 4; }
inline int left_of(int h) { return (h + 3) % 4; }
inline int opposite(int h) { return (h + 2) % 4; }

struct Link {
  int id = -1;
  int from_node = -1;  // -1: source
  int to_node = -1;    // -1: sink
  double len = 0.0;
  int lanes = 1;       // lane 0 right, lane 1 left
  double vmax = 13.889;
  RoadClass cls = RoadClass::Major;
  bool major_axis = true;  // approach axis at to_node
  int heading = North;     // direction of travel
  double p_right = 0.0;    // turn prob of a right-lane vehicle at to_node
  double p_left = 0.0;     // turn prob of a left-lane vehicle at to_node
  double right_lane_load = 0.5;  // spawn share of lane 0
  int strand0 = -1;
  std::array<std::array<int, 3>, 2> turn_edge{{{-1, -1, -1}, {-1, -1, -1}}};
};

struct InternalEdge {
  int id = -1;
  int strand = -1;
  int node = -1;
  int from_link = -1, from_lane = 0;
  int to_link = -1, to_lane = 0;
  Turn turn = Turn::Straight;
  double len = 16.0;
  double vmax = 13.889;
  bool major_axis = true;
  uint32_t conflict_mask = 0;  // bits are node-local internal indices
  int local = 0;
};

struct Node {
  int id = -1;
  double x = 0.0, y = 0.0;
  bool signalized = false;
  SignalProgram prog;
  double offset = 0.0;
  std::array<int, 4> in_link{-1, -1, -1, -1};   // by heading of travel
  std::array<int, 4> out_link{-1, -1, -1, -1};  // by heading of travel
  std::vector<int> internal_ids;
};

struct StrandInfo {
  bool internal = false;
  int link = -1, lane = 0;
  int internal_id = -1;
  double len = 0.0;
  double vmax = 13.889;
};

// Movements from different approaches conflict when their paths can cross:
// everything across axes, and a left against the oncoming straight or right.
bool movements_conflict(const InternalEdge& a, const InternalEdge& b);

struct Network {
  std::vector<Link> links;
  std::vector<Node> nodes;
  std::vector<InternalEdge> internals;
  std::vector<StrandInfo> strands;

  double stop_offset = 8.0;  // node center to stop line [m]
  double turn_radius = 20.0;
  double a_lat = 2.5;

  int add_node(double x, double y);
  int add_link(int from, int to, double len, int lanes, double vmax,
               RoadClass cls, bool major_axis, int heading);
  int add_internal(int node, int from_link, int from_lane, Turn turn,
                   int to_link, int to_lane);
  // Create the internal edges of a signalized node from its in/out links.
  void wire_intersection(int node);
  // Assign strand ids and conflict masks. Call once after construction.
  void finalize();

  int lane_strand(int link, int lane) const {
    return links[link].strand0 + lane;
  }
  int internal_strand(int internal_id) const {
    return internals[internal_id].strand;
  }
};

}  // namespace pf
