#pragma once

namespace pf {

// Car-following parameters of the stochastic Krauss update. The CDG set
// drives the modified safe-velocity rule (band hold around the standstill
// gap), the CTG set drives the standard rule.
struct KraussParams {
  double a = 1.7;     // max acceleration [m/s^2]
  double b = 4.7;     // max deceleration [m/s^2]
  double tau = 0.9;   // reaction headway [s]
  double s0 = 2.95;   // min gap [m]
  double s_t = 0.0;   // band tolerance [m], CDG only; scales with dt
  double sigma = 0.4; // dawdle factor
  double d = 0.95;    // band undershoot speed factor, CDG only

  static KraussParams cdg(double dt = 0.1);
  static KraussParams ctg(double headway = 0.9, double dt = 0.1);
};

// Modified safe velocity (CDG): hold the leader speed inside the band
// (s0 - s_t, s0], drop to d * v_l when the band is undershot, otherwise the
// braking-limited speed with margin s - (s0 + s_t). Never negative.
double v_safe_cdg(double s, double v_l, const KraussParams& p);

// Standard Krauss safe velocity with margin s - s0. Never negative.
double v_safe_krauss(double s, double v_l, const KraussParams& p);

// One speed update: acceleration-bounded desired speed, uniform dawdle
// u01 in [0,1), deceleration floor v - b*dt, floor at zero.
double krauss_step(double v, double v_safe, const KraussParams& p,
                   double v_max_eff, double dt, double u01);

}  // namespace pf
