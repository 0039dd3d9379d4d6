#pragma once

#include <array>
#include <string>
#include <vector>

namespace pf {

// Sub-microscopic longitudinal controller: PD feedback on a delayed sensed
// gap error plus an acceleration feedforward, driving a first-order-lag
// drivetrain with saturation.
struct ControllerParams {
  double kp = 0.45;          // [1/s^2]
  double kd = 1.2;           // [1/s]
  double tau_plant = 0.3;    // drivetrain lag [s]
  double a_max = 2.0;        // [m/s^2]
  double b_max = 4.7;        // [m/s^2]
  double sensor_delay = 0.150;  // [s]
  double ff_horizon = 0.5;   // CDG predictive feedforward lookahead [s]
  double ff_staleness = 0.5; // max age of a usable predecessor packet [s]
  double ctg_ff_tc_min = 0.3;  // lower bound on the CTG feedforward filter [s]
};

// State broadcast by a vehicle for its follower's feedforward.
struct CommPacket {
  double t = -1e18;  // transmission time [s]
  double u = 0.0;    // commanded acceleration [m/s^2]
  double a = 0.0;    // realized acceleration [m/s^2]
  double tau = 0.3;  // sender drivetrain lag [s]
};

int sensor_buffer_depth(double sensor_delay, double dt);

// Per-vehicle controller memory.
struct ControllerState {
  std::array<double, 16> err_ring{};
  int depth = 2;
  int head = 0;
  int fill = 0;
  double a = 0.0;   // plant acceleration
  double u = 0.0;   // last command
  double ff = 0.0;  // CTG feedforward filter state
  CommPacket pred;  // latest packet from predecessor
  bool has_pred_packet = false;

  void reset(int buffer_depth);
  void push_error(double e);
  // Delayed error and the entry one step older; false until the buffer holds
  // two delayed samples.
  bool delayed_error(double& e, double& e_older) const;
};

double feedback_accel(const ControllerParams& cp, double err_delayed,
                      double err_rate);

// Predictive CDG feedforward: extrapolate the predecessor's acceleration
// toward its command through its own lag over the horizon, then pick the
// command that drives the own plant to that value at the horizon.
double feedforward_accel_cdg(double a_own, double tau_own, double a_pred,
                             double u_pred, double tau_pred, double horizon);

// Saturated first-order lag update of the drivetrain.
double plant_step(double a, double u, const ControllerParams& cp, double dt);

// Piecewise-linear speed profile for vehicles without a predecessor.
struct LeaderProfile {
  std::vector<std::pair<double, double>> pts;  // (t [s], v [m/s])

  double speed(double t) const;
  static LeaderProfile from_csv(const std::string& path);
  static LeaderProfile standard();
};

}  // namespace pf
