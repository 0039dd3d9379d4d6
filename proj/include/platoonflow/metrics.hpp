#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pf {

// A measurement line on a strand. Fires when a vehicle front crosses pos.
struct CrossLine {
  enum Kind : uint8_t { Plain = 0, ThroughputExit = 1, RegionEntry = 2, RegionExit = 3 };
  int id = -1;
  int strand = -1;
  double pos = 0.0;
  Kind kind = Plain;
  int region = 0;        // region index for entry/exit lines
  std::string name;      // calibration detector label
};

// Lane segments whose occupancy defines the density fraction.
struct DensityRegion {
  struct Seg {
    int strand;
    double a, b;  // a < b along the strand
  };
  std::vector<Seg> segs;
  double total_len() const;
};

struct MetricsRow {
  double t = 0.0;           // window end [s]
  double throughput_vph = 0.0;
  double travel_time_s = 0.0;
  bool has_travel = false;
  double density = 0.0;
  uint64_t teleports_cum = 0;
  double inflow_east_vpm = 0.0;
  double inflow_west_vpm = 0.0;
  double inflow_minor_vpm = 0.0;
};

// Windowed accumulation of the simulation outputs.
class MetricsCollector {
 public:
  void configure(double window_s);
  void on_exit(double t);
  void on_travel_sample(double t, double dur);
  void on_density_sample(double t, double frac);
  void on_teleport(double t);
  void on_inflow(double t, int group);  // 1 east, 2 west, 3 minor
  void maybe_close_windows(double t_now);
  void finalize(double t_now);

  const std::vector<MetricsRow>& rows() const { return rows_; }
  double window() const { return window_; }
  double density_peak() const { return density_peak_; }
  uint64_t exits_total() const { return exits_total_; }
  double travel_mean_total() const;

 private:
  void close_window(double t_end);

  double window_ = 60.0;
  double next_close_ = 60.0;
  uint64_t win_exits_ = 0;
  std::vector<double> win_travel_;
  double win_density_sum_ = 0.0;
  uint64_t win_density_n_ = 0;
  uint64_t teleports_cum_ = 0;
  uint64_t win_in_[4] = {0, 0, 0, 0};
  // one-second density averaging for the peak tracker
  double sec_density_sum_ = 0.0;
  uint64_t sec_density_n_ = 0;
  double sec_next_ = 1.0;
  double density_peak_ = 0.0;
  uint64_t exits_total_ = 0;
  double travel_sum_total_ = 0.0;
  uint64_t travel_n_total_ = 0;
  std::vector<MetricsRow> rows_;
};

double throughput_vph(uint64_t count, double window_s);

enum class Stability : uint8_t { Stable, SemiStable, Unstable };

const char* stability_name(Stability s);

struct StabilityInput {
  std::vector<double> window_throughput;  // consecutive 300 s windows [veh/h]
  double stability_window_s = 300.0;
  uint64_t throughput_count = 0;   // total counted vehicles
  uint64_t teleports = 0;
  uint64_t gridlock_teleports = 0;
};

struct StabilityReport {
  Stability verdict = Stability::SemiStable;
  bool steady_state = false;
  bool collapse = false;
  double teleport_rate = 0.0;
};

// Unstable when teleports exceed 1% of throughput or the windowed throughput
// collapses by more than 30% below its earlier peak without recovery. Stable
// requires a steady state (5 consecutive windows within 5% of their mean),
// no gridlock teleports, and teleport rate <= 1%. Semi-stable otherwise.
StabilityReport classify_stability(const StabilityInput& in);

// Aggregate consecutive windows of a finer series into 300 s buckets.
std::vector<double> rebucket_throughput(const std::vector<MetricsRow>& rows,
                                        double row_window_s,
                                        double bucket_s = 300.0);

}  // namespace pf
