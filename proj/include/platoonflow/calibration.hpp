#pragma once

#include <array>
#include <string>
#include <vector>

#include "platoonflow/sim.hpp"

namespace pf {

// Time-ordered (detector name, crossing time) pairs of the named detectors
// of one run. The comparison works on these so logs can be persisted and
// reloaded without the worlds that produced them.
struct DetectorLog {
  std::vector<std::pair<std::string, double>> events;
};

DetectorLog detector_log(const World& w, const RunLog& log);

struct DetectorMatch {
  std::string detector;
  int ordinal = 0;       // 0-based crossing index on this detector
  double t_a = -1.0;     // < 0: missing on that side
  double t_b = -1.0;
  double dt = 0.0;       // |t_a - t_b|; meaningless when missing
  bool missing = false;  // count mismatch at this ordinal
};

struct DetectorTimingReport {
  enum Verdict { Valid, Invalid, Overridden };
  double tolerance = 1.0;
  std::vector<DetectorMatch> matches;
  std::vector<int> violations;  // indices into matches
  std::vector<int> excused;     // violation entries covered by the override
  std::string annotation;
  Verdict verdict = Valid;
};

const char* verdict_name(DetectorTimingReport::Verdict v);

// Match crossings per detector by ordinal and flag every |dt| > tol; a
// crossing present on one side only is a violation as well.
DetectorTimingReport compare_detector_timings(const DetectorLog& a,
                                              const DetectorLog& b,
                                              double tol = 1.0);

// Manual verdict change with a mandatory justification. Rejects overriding
// a valid report and out-of-range violation ids.
void apply_override(DetectorTimingReport& report, const std::string& annotation,
                    const std::vector<int>& violation_ids);

std::string timing_report_text(const DetectorTimingReport& r);
std::string timing_report_csv(const DetectorTimingReport& r);

// Scalar summary of one run, the three validated metrics.
struct MetricSample {
  double throughput_vph = 0.0;
  double travel_s = 0.0;
  double density = 0.0;
};

MetricSample metric_sample(const RunLog& log);

// Repetitions of one permutation on both backends.
struct PermutationRuns {
  std::string label;
  std::vector<MetricSample> a, b;
};

struct MetricVerdict {
  std::string label;
  std::array<bool, 3> inside{};     // throughput, travel, density
  std::array<double, 3> mean_b{};
  std::array<double, 3> lo{}, hi{};  // backend A confidence band
};

struct ValidationSummary {
  std::vector<MetricVerdict> rows;
  std::array<double, 3> containment{};  // per-metric fraction inside
  bool all_inside = false;
};

// Backend B's per-permutation means must lie inside backend A's 95%
// confidence band (paper-mode width). Requires >= 6 repetitions per side.
ValidationSummary validate_metrics(const std::vector<PermutationRuns>& grid,
                                   double level = 0.95);

std::string validation_text(const ValidationSummary& s);

}  // namespace pf
