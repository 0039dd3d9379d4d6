#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace pf {

enum class Turn : uint8_t { Straight = 0, Right = 1, Left = 2 };

const char* turn_name(Turn t);

// Phase kinds of the fixed seven-slot program. Slots with zero duration are
// skipped.
enum class PhaseKind : uint8_t {
  GreenMajor,
  YellowMajor,
  ClearMajor,
  ProtLeftMajor,
  GreenMinor,
  YellowMinor,
  ClearMinor,
};

struct Phase {
  PhaseKind kind;
  double dur;
};

struct SignalProgram {
  std::vector<Phase> phases;

  double cycle() const;
  // green-major / yellow / clearance / protected-left / green-minor /
  // yellow / clearance
  static SignalProgram from_durations(const std::array<double, 7>& d);
  static SignalProgram two_phase(double green_major, double green_minor,
                                 double yellow = 3.0, double clearance = 3.0,
                                 double prot_left = 0.0);
  double green_for(bool major_axis) const;
};

enum class SigState : uint8_t { Green, Yellow, Red };

// State of a movement at time t under a program shifted by offset. Program
// time is (t - offset) mod cycle, wrapped into [0, cycle). Lefts during the
// through green are green with *permissive = true (must yield); during the
// protected slot green with *permissive = false.
SigState signal_state(const SignalProgram& prog, double offset, double t,
                      bool major_axis, Turn turn, bool* permissive = nullptr);

// Seconds until the active program slot ends (0 for an empty program).
double signal_time_left(const SignalProgram& prog, double offset, double t);

// Curve speed from lateral acceleration comfort, floored to 0.1 m/s
// granularity, never above the lane limit.
double turn_speed(double radius, double a_lat, double limit);

}  // namespace pf
