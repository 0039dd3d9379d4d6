#include "platoonflow/calibration.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "platoonflow/stats.hpp"

namespace pf {

DetectorLog detector_log(const World& w, const RunLog& log) {
  DetectorLog out;
  for (const Event& e : log.events) {
    if (e.kind != Event::Detector) continue;
    const std::string& name = w.lines[(size_t)e.line].name;
    if (!name.empty()) out.events.emplace_back(name, e.t);
  }
  return out;
}

const char* verdict_name(DetectorTimingReport::Verdict v) {
  switch (v) {
    case DetectorTimingReport::Valid: return "valid";
    case DetectorTimingReport::Invalid: return "invalid";
    case DetectorTimingReport::Overridden: return "overridden";
  }
  return "?";
}

DetectorTimingReport compare_detector_timings(const DetectorLog& a,
                                              const DetectorLog& b,
                                              double tol) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by;
  for (const auto& [name, t] : a.events) by[name].first.push_back(t);
  for (const auto& [name, t] : b.events) by[name].second.push_back(t);

  DetectorTimingReport r;
  r.tolerance = tol;
  for (auto& [name, series] : by) {
    auto& [ta, tb] = series;
    std::sort(ta.begin(), ta.end());
    std::sort(tb.begin(), tb.end());
    const size_t n = std::max(ta.size(), tb.size());
    for (size_t i = 0; i < n; ++i) {
      DetectorMatch m;
      m.detector = name;
      m.ordinal = (int)i;
      if (i < ta.size()) m.t_a = ta[i];
      if (i < tb.size()) m.t_b = tb[i];
      m.missing = i >= ta.size() || i >= tb.size();
      if (!m.missing) m.dt = std::abs(m.t_a - m.t_b);
      if (m.missing || m.dt > tol)
        r.violations.push_back((int)r.matches.size());
      r.matches.push_back(std::move(m));
    }
  }
  r.verdict = r.violations.empty() ? DetectorTimingReport::Valid
                                   : DetectorTimingReport::Invalid;
  return r;
}

void apply_override(DetectorTimingReport& report, const std::string& annotation,
                    const std::vector<int>& violation_ids) {
  if (report.verdict == DetectorTimingReport::Valid)
    throw std::invalid_argument("override rejected: report is already valid");
  if (annotation.empty())
    throw std::invalid_argument("override rejected: annotation required");
  for (int id : violation_ids) {
    if (id < 0 || (size_t)id >= report.violations.size())
      throw std::invalid_argument(
          fmt::format("override rejected: violation id {} out of range", id));
    const int match = report.violations[(size_t)id];
    if (std::find(report.excused.begin(), report.excused.end(), match) ==
        report.excused.end())
      report.excused.push_back(match);
  }
  report.annotation = annotation;
  report.verdict = DetectorTimingReport::Overridden;
}

std::string timing_report_text(const DetectorTimingReport& r) {
  std::string s = fmt::format(
      "detector timing comparison\n  tolerance: {} s\n  matches: {}\n  "
      "violations: {}\n  verdict: {}\n",
      r.tolerance, r.matches.size(), r.violations.size(),
      verdict_name(r.verdict));
  for (int vi : r.violations) {
    const DetectorMatch& m = r.matches[(size_t)vi];
    const bool excused = std::find(r.excused.begin(), r.excused.end(), vi) !=
                         r.excused.end();
    if (m.missing)
      s += fmt::format("  {} #{}: present on {} side only{}\n", m.detector,
                       m.ordinal, m.t_a >= 0 ? "A" : "B",
                       excused ? " [excused]" : "");
    else
      s += fmt::format("  {} #{}: tA={:.3f} tB={:.3f} |dt|={:.3f}{}\n",
                       m.detector, m.ordinal, m.t_a, m.t_b, m.dt,
                       excused ? " [excused]" : "");
  }
  if (!r.annotation.empty()) s += fmt::format("  override: {}\n", r.annotation);
  return s;
}

std::string timing_report_csv(const DetectorTimingReport& r) {
  std::string s = "detector,ordinal,t_a,t_b,dt,violation\n";
  for (size_t i = 0; i < r.matches.size(); ++i) {
    const DetectorMatch& m = r.matches[i];
    const bool viol = std::find(r.violations.begin(), r.violations.end(),
                                (int)i) != r.violations.end();
    s += fmt::format("{},{},{},{},{},{}\n", m.detector, m.ordinal, m.t_a, m.t_b,
                     m.missing ? -1.0 : m.dt, viol ? 1 : 0);
  }
  return s;
}

MetricSample metric_sample(const RunLog& log) {
  MetricSample s;
  s.throughput_vph =
      log.duration > 0 ? (double)log.exits * 3600.0 / log.duration : 0.0;
  s.travel_s = log.travel_mean;
  double dsum = 0.0;
  size_t dn = 0;
  for (const MetricsRow& row : log.rows) {
    dsum += row.density;
    ++dn;
  }
  s.density = dn ? dsum / (double)dn : 0.0;
  return s;
}

ValidationSummary validate_metrics(const std::vector<PermutationRuns>& grid,
                                   double level) {
  ValidationSummary out;
  std::array<size_t, 3> inside_n{0, 0, 0};
  for (const PermutationRuns& perm : grid) {
    if (perm.a.size() < 6 || perm.b.size() < 6)
      throw std::invalid_argument(fmt::format(
          "validation needs >= 6 repetitions per backend, permutation '{}' "
          "has {}/{}",
          perm.label, perm.a.size(), perm.b.size()));
    MetricVerdict row;
    row.label = perm.label;
    for (int m = 0; m < 3; ++m) {
      auto pick = [m](const MetricSample& s) {
        return m == 0 ? s.throughput_vph : m == 1 ? s.travel_s : s.density;
      };
      std::vector<double> xa, xb;
      for (const MetricSample& s : perm.a) xa.push_back(pick(s));
      for (const MetricSample& s : perm.b) xb.push_back(pick(s));
      const ConfidenceBand band = confidence_band(xa, level, BandMode::Paper);
      row.mean_b[(size_t)m] = mean_of(xb);
      row.lo[(size_t)m] = band.lo();
      row.hi[(size_t)m] = band.hi();
      row.inside[(size_t)m] = band.contains(row.mean_b[(size_t)m]);
      if (row.inside[(size_t)m]) ++inside_n[(size_t)m];
    }
    out.rows.push_back(std::move(row));
  }
  const size_t n = out.rows.size();
  out.all_inside = n > 0;
  for (int m = 0; m < 3; ++m) {
    out.containment[(size_t)m] = n ? (double)inside_n[(size_t)m] / (double)n : 0.0;
    if (inside_n[(size_t)m] != n) out.all_inside = false;
  }
  return out;
}

std::string validation_text(const ValidationSummary& s) {
  static const char* kMetric[3] = {"throughput", "travel_time", "density"};
  std::string out = fmt::format("metric validation over {} permutations\n",
                                s.rows.size());
  for (int m = 0; m < 3; ++m)
    out += fmt::format("  {}: {:.1f}% inside\n", kMetric[m],
                       100.0 * s.containment[(size_t)m]);
  out += fmt::format("  overall: {}\n", s.all_inside ? "valid" : "invalid");
  for (const MetricVerdict& row : s.rows) {
    for (int m = 0; m < 3; ++m) {
      if (row.inside[(size_t)m]) continue;
      out += fmt::format("  {} {}: mean B {:.3f} outside [{:.3f}, {:.3f}]\n",
                         row.label, kMetric[m], row.mean_b[(size_t)m],
                         row.lo[(size_t)m], row.hi[(size_t)m]);
    }
  }
  return out;
}

}  // namespace pf
