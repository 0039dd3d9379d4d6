#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pf {

// Spacing policy of an automated vehicle. Mix fleets are assignments of these
// labels to vehicles, not a policy of their own.
enum class Policy : uint8_t {
  Cdg,      // constant distance gap
  CtgRef,   // constant time gap, reference headway
  CtgHcm,   // constant time gap, HCM-derived headway
  CtgHbs,   // constant time gap, HBS-derived headway
  Switch1,  // CDG below v_switch, ramp to 6 m endpoint gap at v_max
  Switch2,  // CDG below v_switch, ramp to 15 m endpoint gap at v_max
};

const char* policy_name(Policy p);
bool policy_from_name(const std::string& s, Policy& out);

struct PolicyParams {
  double r = 2.95;              // standstill gap [m]
  double h_ref = 0.87;          // [s]
  double h_hcm = 0.92;          // [s]
  double h_hbs = 1.22;          // [s]
  double v_switch = 30.0 / 3.6; // [m/s]
  double v_max = 50.0 / 3.6;    // [m/s]
  double gap_sw1 = 6.0;         // endpoint gap above r at v_max [m]
  double gap_sw2 = 15.0;        // [m]
  double veh_len = 5.15;        // [m]
};

// Desired net gap (bumper to bumper) at speed v. Nondecreasing in v,
// continuous, and equal to r at standstill for every policy.
double desired_gap(Policy p, double v, const PolicyParams& pp = {});

// Net time gap corresponding to a gross headway at cruise speed:
// gross minus the time the vehicle body plus standstill gap occupies.
double net_time_gap_from_gross(double gross_headway_s, double veh_len,
                               double r, double v);

// Flow ratio improvement of policy a over policy b for a saturated stream at
// speed v: flow(p) = v / (len + gap_p(v)).
double asymptotic_flow_improvement(Policy a, Policy b, double v,
                                   const PolicyParams& pp = {});
double asymptotic_flow_improvement_gaps(double gap_a, double gap_b,
                                        double veh_len);

enum class MixMode : uint8_t { Random, Alternating };

struct MixConfig {
  double penetration = 0.5;  // CDG share
  MixMode mode = MixMode::Random;
  Policy cdg_member = Policy::Cdg;
  Policy ctg_member = Policy::CtgRef;
};

// Assign per-vehicle policies for a mixed fleet. Random mode draws one
// uniform per vehicle in index order; alternating mode spreads CDG vehicles
// evenly (exact alternation at penetration 0.5, CDG first).
std::vector<Policy> assign_policies(std::size_t n, const MixConfig& mc,
                                    std::mt19937& rng);

}  // namespace pf
