#include "platoonflow/krauss.hpp"

#include <algorithm>
#include <cmath>

namespace pf {

KraussParams KraussParams::cdg(double dt) {
  KraussParams p;
  p.a = 1.40;
  p.b = 4.70;
  p.tau = 0.02;
  p.s0 = 2.45;
  p.s_t = 0.5 * (dt / 0.1);
  p.sigma = 0.02;
  p.d = 0.95;
  return p;
}

KraussParams KraussParams::ctg(double headway, double dt) {
  (void)dt;
  KraussParams p;
  p.a = 1.70;
  p.b = 4.70;
  p.tau = headway;
  p.s0 = 2.95;
  p.s_t = 0.0;
  p.sigma = 0.4;
  p.d = 0.95;
  return p;
}

double v_safe_cdg(double s, double v_l, const KraussParams& p) {
  if (s > p.s0) {
    const double bt = p.b * p.tau;
    const double rad =
        bt * bt + v_l * v_l + 2.0 * p.b * (s - (p.s0 + p.s_t));
    return std::max(0.0, -bt + std::sqrt(std::max(0.0, rad)));
  }
  if (s > p.s0 - p.s_t) return std::max(0.0, v_l);
  return std::max(0.0, v_l * p.d);
}

double v_safe_krauss(double s, double v_l, const KraussParams& p) {
  const double bt = p.b * p.tau;
  const double rad = bt * bt + v_l * v_l + 2.0 * p.b * (s - p.s0);
  return std::max(0.0, -bt + std::sqrt(std::max(0.0, rad)));
}

double krauss_step(double v, double v_safe, const KraussParams& p,
                   double v_max_eff, double dt, double u01) {
  const double v_des = std::min({v_safe, v + p.a * dt, v_max_eff});
  double v_next = v_des - p.sigma * p.a * dt * u01;
  v_next = std::max(v_next, v - p.b * dt);
  return std::max(0.0, v_next);
}

}  // namespace pf
