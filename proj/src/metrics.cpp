#include "platoonflow/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace pf {

double DensityRegion::total_len() const {
  double s = 0.0;
  for (const auto& seg : segs) s += seg.b - seg.a;
  return s;
}

void MetricsCollector::configure(double window_s) {
  window_ = window_s;
  next_close_ = window_s;
}

void MetricsCollector::on_exit(double t) {
  maybe_close_windows(t);
  ++win_exits_;
  ++exits_total_;
}

void MetricsCollector::on_travel_sample(double t, double dur) {
  maybe_close_windows(t);
  win_travel_.push_back(dur);
  travel_sum_total_ += dur;
  ++travel_n_total_;
}

void MetricsCollector::on_density_sample(double t, double frac) {
  maybe_close_windows(t);
  win_density_sum_ += frac;
  ++win_density_n_;
  sec_density_sum_ += frac;
  ++sec_density_n_;
  if (t >= sec_next_) {
    density_peak_ =
        std::max(density_peak_, sec_density_sum_ / (double)sec_density_n_);
    sec_density_sum_ = 0.0;
    sec_density_n_ = 0;
    sec_next_ += 1.0;
  }
}

void MetricsCollector::on_teleport(double t) {
  maybe_close_windows(t);
  ++teleports_cum_;
}

void MetricsCollector::on_inflow(double t, int group) {
  maybe_close_windows(t);
  if (group >= 1 && group <= 3) ++win_in_[group];
}

void MetricsCollector::maybe_close_windows(double t_now) {
  while (t_now > next_close_ + 1e-9) close_window(next_close_);
}

void MetricsCollector::finalize(double t_now) {
  maybe_close_windows(t_now + window_);
}

void MetricsCollector::close_window(double t_end) {
  MetricsRow row;
  row.t = t_end;
  row.throughput_vph = throughput_vph(win_exits_, window_);
  if (!win_travel_.empty()) {
    double s = 0.0;
    for (double x : win_travel_) s += x;
    row.travel_time_s = s / (double)win_travel_.size();
    row.has_travel = true;
  }
  row.density = win_density_n_ ? win_density_sum_ / (double)win_density_n_ : 0.0;
  row.teleports_cum = teleports_cum_;
  const double per_min = 60.0 / window_;
  row.inflow_east_vpm = win_in_[1] * per_min;
  row.inflow_west_vpm = win_in_[2] * per_min;
  row.inflow_minor_vpm = win_in_[3] * per_min;
  rows_.push_back(row);

  win_exits_ = 0;
  win_travel_.clear();
  win_density_sum_ = 0.0;
  win_density_n_ = 0;
  win_in_[1] = win_in_[2] = win_in_[3] = 0;
  next_close_ += window_;
}

double MetricsCollector::travel_mean_total() const {
  return travel_n_total_ ? travel_sum_total_ / (double)travel_n_total_ : 0.0;
}

double throughput_vph(uint64_t count, double window_s) {
  return window_s > 0.0 ? (double)count * 3600.0 / window_s : 0.0;
}

const char* stability_name(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::SemiStable: return "semi_stable";
    case Stability::Unstable: return "unstable";
  }
  return "?";
}

StabilityReport classify_stability(const StabilityInput& in) {
  StabilityReport rep;
  rep.teleport_rate =
      in.throughput_count ? (double)in.teleports / (double)in.throughput_count
                          : (in.teleports ? 1.0 : 0.0);

  const auto& w = in.window_throughput;
  // Collapse: some window falls >30% below the peak of the preceding windows
  // and the series never recovers above 70% of that peak.
  double peak = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (peak > 0.0 && w[i] < 0.7 * peak) {
      bool recovered = false;
      for (std::size_t j = i; j < w.size(); ++j)
        if (w[j] >= 0.7 * peak) {
          recovered = true;
          break;
        }
      if (!recovered) {
        rep.collapse = true;
        break;
      }
    }
    peak = std::max(peak, w[i]);
  }

  for (std::size_t i = 0; i + 5 <= w.size() && !rep.steady_state; ++i) {
    double m = 0.0;
    for (std::size_t j = i; j < i + 5; ++j) m += w[j];
    m /= 5.0;
    if (m <= 0.0) continue;
    bool ok = true;
    for (std::size_t j = i; j < i + 5; ++j)
      if (std::fabs(w[j] - m) / m >= 0.05) {
        ok = false;
        break;
      }
    rep.steady_state = ok;
  }

  if (rep.teleport_rate > 0.01 || rep.collapse) {
    rep.verdict = Stability::Unstable;
  } else if (rep.steady_state && in.gridlock_teleports == 0) {
    rep.verdict = Stability::Stable;
  } else {
    rep.verdict = Stability::SemiStable;
  }
  return rep;
}

std::vector<double> rebucket_throughput(const std::vector<MetricsRow>& rows,
                                        double row_window_s, double bucket_s) {
  std::vector<double> out;
  const int per = std::max(1, (int)std::lround(bucket_s / row_window_s));
  for (std::size_t i = 0; i + per <= rows.size(); i += per) {
    double s = 0.0;
    for (int j = 0; j < per; ++j) s += rows[i + j].throughput_vph;
    out.push_back(s / per);
  }
  return out;
}

}  // namespace pf
