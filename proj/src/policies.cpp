#include "platoonflow/policies.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pf {

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::Cdg: return "CDG";
    case Policy::CtgRef: return "CTG_REF";
    case Policy::CtgHcm: return "CTG_HCM";
    case Policy::CtgHbs: return "CTG_HBS";
    case Policy::Switch1: return "SWITCH1";
    case Policy::Switch2: return "SWITCH2";
  }
  return "?";
}

bool policy_from_name(const std::string& s, Policy& out) {
  for (Policy p : {Policy::Cdg, Policy::CtgRef, Policy::CtgHcm, Policy::CtgHbs,
                   Policy::Switch1, Policy::Switch2}) {
    if (s == policy_name(p)) {
      out = p;
      return true;
    }
  }
  return false;
}

double desired_gap(Policy p, double v, const PolicyParams& pp) {
  v = std::max(0.0, v);
  switch (p) {
    case Policy::Cdg:
      return pp.r;
    case Policy::CtgRef:
      return pp.r + pp.h_ref * v;
    case Policy::CtgHcm:
      return pp.r + pp.h_hcm * v;
    case Policy::CtgHbs:
      return pp.r + pp.h_hbs * v;
    case Policy::Switch1:
    case Policy::Switch2: {
      const double endpoint = (p == Policy::Switch1) ? pp.gap_sw1 : pp.gap_sw2;
      if (v <= pp.v_switch) return pp.r;
      const double f =
          std::min(1.0, (v - pp.v_switch) / (pp.v_max - pp.v_switch));
      return pp.r + endpoint * f;
    }
  }
  throw std::logic_error("unknown policy");
}

double net_time_gap_from_gross(double gross_headway_s, double veh_len,
                               double r, double v) {
  return gross_headway_s - (veh_len + r) / v;
}

double asymptotic_flow_improvement_gaps(double gap_a, double gap_b,
                                        double veh_len) {
  return (veh_len + gap_b) / (veh_len + gap_a) - 1.0;
}

double asymptotic_flow_improvement(Policy a, Policy b, double v,
                                   const PolicyParams& pp) {
  return asymptotic_flow_improvement_gaps(desired_gap(a, v, pp),
                                          desired_gap(b, v, pp), pp.veh_len);
}

std::vector<Policy> assign_policies(std::size_t n, const MixConfig& mc,
                                    std::mt19937& rng) {
  std::vector<Policy> out(n, mc.ctg_member);
  if (mc.mode == MixMode::Random) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = (u01(rng) < mc.penetration) ? mc.cdg_member : mc.ctg_member;
  } else {
    // Bresenham spread; the accumulator starts full so the first vehicle is
    // CDG whenever penetration > 0.
    double acc = mc.penetration > 0.0 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (acc >= 1.0 - 1e-12) {
        out[i] = mc.cdg_member;
        acc -= 1.0;
      }
      acc += mc.penetration;
    }
  }
  return out;
}

}  // namespace pf
