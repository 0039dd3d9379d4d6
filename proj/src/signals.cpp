#include "platoonflow/signals.hpp"

#include <cmath>

namespace pf {

const char* turn_name(Turn t) {
  switch (t) {
    case Turn::Straight: return "straight";
    case Turn::Right: return "right";
    case Turn::Left: return "left";
  }
  return "?";
}

double SignalProgram::cycle() const {
  double c = 0.0;
  for (const auto& p : phases) c += p.dur;
  return c;
}

SignalProgram SignalProgram::from_durations(const std::array<double, 7>& d) {
  static constexpr PhaseKind kOrder[7] = {
      PhaseKind::GreenMajor,    PhaseKind::YellowMajor, PhaseKind::ClearMajor,
      PhaseKind::ProtLeftMajor, PhaseKind::GreenMinor,  PhaseKind::YellowMinor,
      PhaseKind::ClearMinor};
  SignalProgram prog;
  for (int i = 0; i < 7; ++i)
    if (d[i] > 0.0) prog.phases.push_back({kOrder[i], d[i]});
  return prog;
}

SignalProgram SignalProgram::two_phase(double green_major, double green_minor,
                                       double yellow, double clearance,
                                       double prot_left) {
  return from_durations({green_major, yellow, clearance, prot_left,
                         green_minor, yellow, clearance});
}

double SignalProgram::green_for(bool major_axis) const {
  for (const auto& p : phases) {
    if (major_axis && p.kind == PhaseKind::GreenMajor) return p.dur;
    if (!major_axis && p.kind == PhaseKind::GreenMinor) return p.dur;
  }
  return 0.0;
}

SigState signal_state(const SignalProgram& prog, double offset, double t,
                      bool major_axis, Turn turn, bool* permissive) {
  if (permissive) *permissive = false;
  const double cyc = prog.cycle();
  if (cyc <= 0.0 || prog.phases.empty()) return SigState::Green;
  double local = std::fmod(t - offset, cyc);
  if (local < 0.0) local += cyc;

  PhaseKind kind = prog.phases.back().kind;
  double acc = 0.0;
  for (const auto& p : prog.phases) {
    acc += p.dur;
    if (local < acc) {
      kind = p.kind;
      break;
    }
  }

  switch (kind) {
    case PhaseKind::GreenMajor:
      if (!major_axis) return SigState::Red;
      if (turn == Turn::Left && permissive) *permissive = true;
      return SigState::Green;
    case PhaseKind::YellowMajor:
      return major_axis ? SigState::Yellow : SigState::Red;
    case PhaseKind::ProtLeftMajor:
      return (major_axis && turn == Turn::Left) ? SigState::Green
                                                : SigState::Red;
    case PhaseKind::GreenMinor:
      if (major_axis) return SigState::Red;
      if (turn == Turn::Left && permissive) *permissive = true;
      return SigState::Green;
    case PhaseKind::YellowMinor:
      return major_axis ? SigState::Red : SigState::Yellow;
    case PhaseKind::ClearMajor:
    case PhaseKind::ClearMinor:
      return SigState::Red;
  }
  return SigState::Red;
}

double signal_time_left(const SignalProgram& prog, double offset, double t) {
  const double cyc = prog.cycle();
  if (cyc <= 0.0 || prog.phases.empty()) return 0.0;
  double local = std::fmod(t - offset, cyc);
  if (local < 0.0) local += cyc;
  double acc = 0.0;
  for (const auto& p : prog.phases) {
    acc += p.dur;
    if (local < acc) return acc - local;
  }
  return cyc - local;
}

double turn_speed(double radius, double a_lat, double limit) {
  double v = std::sqrt(a_lat * radius);
  v = std::floor(v * 10.0) / 10.0;
  return std::min(v, limit);
}

}  // namespace pf
