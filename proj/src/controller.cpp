#include "platoonflow/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pf {

int sensor_buffer_depth(double sensor_delay, double dt) {
  return std::max(1, (int)std::lround(sensor_delay / dt));
}

void ControllerState::reset(int buffer_depth) {
  depth = std::clamp(buffer_depth, 1, (int)err_ring.size() - 1);
  head = 0;
  fill = 0;
  a = 0.0;
  u = 0.0;
  ff = 0.0;
  has_pred_packet = false;
}

void ControllerState::push_error(double e) {
  err_ring[head] = e;
  head = (head + 1) % (depth + 1);
  fill = std::min(fill + 1, depth + 1);
}

bool ControllerState::delayed_error(double& e, double& e_older) const {
  if (fill <= depth) return false;
  // head points at the slot about to be overwritten = oldest entry.
  const int oldest = head;
  const int next = (head + 1) % (depth + 1);
  e_older = err_ring[oldest];
  e = err_ring[next];
  return true;
}

double feedback_accel(const ControllerParams& cp, double err_delayed,
                      double err_rate) {
  return cp.kp * err_delayed + cp.kd * err_rate;
}

double feedforward_accel_cdg(double a_own, double tau_own, double a_pred,
                             double u_pred, double tau_pred, double horizon) {
  const double target =
      u_pred + (a_pred - u_pred) * std::exp(-horizon / tau_pred);
  const double k = std::exp(-horizon / tau_own);
  return (target - a_own * k) / (1.0 - k);
}

double plant_step(double a, double u, const ControllerParams& cp, double dt) {
  u = std::clamp(u, -cp.b_max, cp.a_max);
  a += (dt / cp.tau_plant) * (u - a);
  return std::clamp(a, -cp.b_max, cp.a_max);
}

double LeaderProfile::speed(double t) const {
  if (pts.empty()) return 0.0;
  if (t <= pts.front().first) return pts.front().second;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (t <= pts[i].first) {
      const auto& [t0, v0] = pts[i - 1];
      const auto& [t1, v1] = pts[i];
      if (t1 <= t0) return v1;
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  }
  return pts.back().second;
}

LeaderProfile LeaderProfile::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open leader profile: " + path);
  LeaderProfile pr;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t, v;
    if (ss >> t >> v) pr.pts.emplace_back(t, v);
  }
  if (pr.pts.size() < 2)
    throw std::runtime_error("leader profile needs >= 2 breakpoints: " + path);
  return pr;
}

LeaderProfile LeaderProfile::standard() {
  LeaderProfile pr;
  pr.pts = {{0.0, 0.0},  {1.5, 0.0},  {3.0, 1.2},   {5.0, 3.8},
            {7.0, 6.6},  {9.0, 9.2},  {11.0, 11.2}, {13.0, 12.8},
            {15.0, 13.889}};
  return pr;
}

}  // namespace pf
