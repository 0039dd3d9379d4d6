#include "platoonflow/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "json.hpp"
#include "platoonflow/csvio.hpp"

namespace pf {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* kFigureNames[10] = {"fig5",  "fig6",  "fig9",  "table1", "fig17",
                                "fig18", "fig19", "fig20", "fig21",  "fig26"};

namespace {

const char* kPalette[10] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                            "#bcbd22", "#17becf"};

std::string fleet_label(const ScenarioConfig& cfg) {
  if (cfg.penetration >= 0.0)
    return fmt::format("MIX{}", (int)std::lround(cfg.penetration * 100.0));
  return policy_name(cfg.policy);
}

// ---- SVG helpers ----------------------------------------------------------

void nice_ticks(double lo, double hi, std::vector<double>& out) {
  out.clear();
  const double span = hi - lo;
  if (span <= 0) {
    out.push_back(lo);
    return;
  }
  double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (span / (step * m) <= 6.0) {
      step *= m;
      break;
    }
  }
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9; t += step)
    out.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
}

std::string fnum(double x) {
  std::string s = fmt::format("{:.6g}", x);
  return s;
}

struct Plot {
  double W = 880, H = 520, ml = 78, mr = 190, mt = 44, mb = 62;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  std::string title, xlabel, ylabel;
  std::vector<std::string> xcats;  // categorical x axis when nonempty
  std::string body;
  std::vector<std::pair<std::string, std::string>> legend;  // label, color

  double px(double x) const {
    return ml + (x - x0) / (x1 - x0 == 0 ? 1 : x1 - x0) * (W - ml - mr);
  }
  double py(double y) const {
    return H - mb - (y - y0) / (y1 - y0 == 0 ? 1 : y1 - y0) * (H - mt - mb);
  }
  void fit_y(double lo, double hi) {
    if (hi <= lo) hi = lo + 1;
    const double pad = (hi - lo) * 0.08;
    y0 = lo == 0 ? 0 : lo - pad;
    y1 = hi + pad;
  }
  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& color) {
    if (pts.empty()) return;
    std::string d;
    for (const auto& [x, y] : pts) d += fmt::format("{:.2f},{:.2f} ", px(x), py(y));
    body += fmt::format(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
        d, color);
  }
  void vbar(double xc, double wpx, double ytop, const std::string& color) {
    const double xp = px(xc) - wpx / 2.0;
    const double yp = py(ytop);
    body += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
        "fill=\"{}\"/>\n",
        xp, yp, wpx, py(y0) - yp, color);
  }
  void cell(double xc, double yc, double wpx, double hpx,
            const std::string& color, const std::string& label) {
    body += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
        "fill=\"{}\" stroke=\"#444\"/>\n",
        xc - wpx / 2, yc - hpx / 2, wpx, hpx, color);
    if (!label.empty())
      body += fmt::format(
          "<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\" text-anchor=\"middle\" "
          "fill=\"#111\">{}</text>\n",
          xc, yc + 3.5, label);
  }
  std::string render() const {
    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
        "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\">\n"
        "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        W, H, W, H, W, H);
    s += fmt::format(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{}</text>\n",
        ml, title);
    // frame
    s += fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
        "stroke=\"#333\"/>\n",
        ml, mt, W - ml - mr, H - mt - mb);
    // ticks
    if (xcats.empty()) {
      std::vector<double> tx;
      nice_ticks(x0, x1, tx);
      for (double t : tx)
        s += fmt::format(
            "<line x1=\"{0:.1f}\" y1=\"{1}\" x2=\"{0:.1f}\" y2=\"{2}\" "
            "stroke=\"#333\"/>\n<text x=\"{0:.1f}\" y=\"{3}\" font-size=\"11\" "
            "text-anchor=\"middle\">{4}</text>\n",
            px(t), H - mb, H - mb + 5, H - mb + 18, fnum(t));
    } else {
      for (size_t i = 0; i < xcats.size(); ++i)
        s += fmt::format(
            "<text x=\"{:.1f}\" y=\"{}\" font-size=\"11\" "
            "text-anchor=\"middle\">{}</text>\n",
            px((double)i), H - mb + 18, xcats[i]);
    }
    std::vector<double> ty;
    nice_ticks(y0, y1, ty);
    for (double t : ty)
      s += fmt::format(
          "<line x1=\"{1}\" y1=\"{0:.1f}\" x2=\"{2}\" y2=\"{0:.1f}\" "
          "stroke=\"#333\"/>\n<text x=\"{3}\" y=\"{4:.1f}\" font-size=\"11\" "
          "text-anchor=\"end\">{5}</text>\n",
          py(t), ml - 5, ml, ml - 8, py(t) + 4, fnum(t));
    s += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        ml + (W - ml - mr) / 2, H - 16, xlabel);
    s += fmt::format(
        "<text x=\"18\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" "
        "transform=\"rotate(-90 18 {})\">{}</text>\n",
        mt + (H - mt - mb) / 2, mt + (H - mt - mb) / 2, ylabel);
    s += body;
    double ly = mt + 8;
    for (const auto& [label, color] : legend) {
      s += fmt::format(
          "<rect x=\"{}\" y=\"{:.1f}\" width=\"14\" height=\"4\" fill=\"{}\"/>\n"
          "<text x=\"{}\" y=\"{:.1f}\" font-size=\"11\">{}</text>\n",
          W - mr + 12, ly, color, W - mr + 32, ly + 6, label);
      ly += 18;
    }
    s += "</svg>\n";
    return s;
  }
};

// ---- run artifacts --------------------------------------------------------

std::vector<double> detector_times(const RunInfo& r, const std::string& name) {
  std::vector<double> out;
  const fs::path p = fs::path(r.dir) / "events.csv";
  if (!fs::exists(p)) return out;
  const auto records = csv_parse(read_text_file(p.string()));
  for (size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.size() >= 5 && rec[0] == "detector" && rec[4] == name)
      out.push_back(std::strtod(rec[1].c_str(), nullptr));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<MetricsRow> run_rows(const RunInfo& r) {
  const fs::path p = fs::path(r.dir) / "metrics.csv";
  if (!fs::exists(p)) return {};
  return metrics_from_csv(read_text_file(p.string()));
}

struct Agg {
  double sum = 0.0;
  size_t n = 0;
  void add(double x) {
    sum += x;
    ++n;
  }
  double mean() const { return n ? sum / (double)n : 0.0; }
};

// ---- figures --------------------------------------------------------------

bool fig5(const std::vector<RunInfo>& runs, std::string& csv, std::string& svg,
          std::string* err) {
  std::map<std::string, std::vector<double>> series;  // label -> event times
  for (const RunInfo& r : runs) {
    if (r.cfg.layout != "single_light") continue;
    auto& dst = series[fleet_label(r.cfg)];
    if (dst.empty()) dst = detector_times(r, "stopline");
  }
  if (series.empty()) {
    *err = "fig5 needs single_light runs with a stopline detector";
    return false;
  }
  csv = "label,t,count\n";
  Plot p;
  p.title = "Stop line counter after green onset";
  p.xlabel = "time [s]";
  p.ylabel = "vehicles passed";
  double tmax = 60.0, cmax = 1.0;
  int ci = 0;
  for (auto& [label, times] : series) {
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    int count = 0;
    for (double t : times) {
      pts.emplace_back(t, count);
      ++count;
      pts.emplace_back(t, count);
      csv += fmt::format("{},{},{}\n", csv_escape(label), t, count);
      tmax = std::max(tmax, t + 2.0);
      cmax = std::max(cmax, (double)count);
    }
    p.legend.emplace_back(label, kPalette[ci % 10]);
    ++ci;
  }
  p.x0 = 0;
  p.x1 = tmax;
  p.fit_y(0, cmax);
  ci = 0;
  for (auto& [label, times] : series) {
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    int count = 0;
    for (double t : times) {
      pts.emplace_back(t, count);
      ++count;
      pts.emplace_back(t, count);
    }
    pts.emplace_back(tmax, (double)count);
    p.polyline(pts, kPalette[ci % 10]);
    ++ci;
  }
  svg = p.render();
  return true;
}

bool fig6(const std::vector<RunInfo>& runs, std::string& csv, std::string& svg,
          std::string* err) {
  // vehicles passing during green (+ yellow) per green length and fleet
  std::map<std::string, std::map<double, Agg>> grid;
  for (const RunInfo& r : runs) {
    if (r.cfg.layout != "single_light") continue;
    const double cutoff = r.cfg.green_s + r.cfg.yellow_s;
    const auto times = detector_times(r, "stopline");
    const double n =
        (double)std::count_if(times.begin(), times.end(),
                              [&](double t) { return t <= cutoff + 1e-9; });
    grid[fleet_label(r.cfg)][r.cfg.green_s].add(n);
  }
  if (grid.empty()) {
    *err = "fig6 needs single_light runs";
    return false;
  }
  csv = "label,green_s,count\n";
  Plot p;
  p.title = "Vehicles passing one green phase";
  p.xlabel = "green phase [s]";
  p.ylabel = "vehicles";
  double gmax = 0, cmax = 1, gmin = 1e9;
  int ci = 0;
  for (auto& [label, by_green] : grid) {
    std::vector<std::pair<double, double>> pts;
    for (auto& [g, agg] : by_green) {
      pts.emplace_back(g, agg.mean());
      csv += fmt::format("{},{},{}\n", csv_escape(label), g, agg.mean());
      gmax = std::max(gmax, g);
      gmin = std::min(gmin, g);
      cmax = std::max(cmax, agg.mean());
    }
    p.legend.emplace_back(label, kPalette[ci % 10]);
    ++ci;
  }
  p.x0 = std::min(gmin, gmax);
  p.x1 = gmax + 1;
  p.fit_y(0, cmax);
  ci = 0;
  for (auto& [label, by_green] : grid) {
    std::vector<std::pair<double, double>> pts;
    for (auto& [g, agg] : by_green) pts.emplace_back(g, agg.mean());
    p.polyline(pts, kPalette[ci % 10]);
    ++ci;
  }
  svg = p.render();
  return true;
}

bool fig9(const std::vector<RunInfo>& runs, std::string& csv, std::string& svg,
          std::string* err) {
  // throughput per (right, left) permutation and penetration at one green
  std::map<std::pair<double, double>, std::map<double, Agg>> grid;
  std::set<double> pens;
  for (const RunInfo& r : runs) {
    if (r.cfg.layout != "reference_intersection") continue;
    const double pen = r.cfg.penetration >= 0
                           ? r.cfg.penetration
                           : (r.cfg.policy == Policy::Cdg ? 1.0 : 0.0);
    grid[{r.cfg.turn_right_pct, r.cfg.turn_left_pct}][pen].add(r.throughput_vph);
    pens.insert(pen);
  }
  if (grid.empty()) {
    *err = "fig9 needs reference_intersection runs";
    return false;
  }
  csv = "turn_right_pct,turn_left_pct,penetration,throughput_vph\n";
  Plot p;
  p.title = "Intersection throughput by turn ratios and penetration";
  p.xlabel = "right/left turn ratio [%]";
  p.ylabel = "throughput [veh/h]";
  double ymax = 0;
  size_t k = 0;
  for (auto& [turns, by_pen] : grid) {
    p.xcats.push_back(fmt::format("{:g}/{:g}", turns.first, turns.second));
    for (auto& [pen, agg] : by_pen) {
      csv += fmt::format("{},{},{},{}\n", turns.first, turns.second, pen,
                         agg.mean());
      ymax = std::max(ymax, agg.mean());
    }
    ++k;
  }
  p.x0 = -0.5;
  p.x1 = (double)p.xcats.size() - 0.5;
  p.fit_y(0, ymax);
  const double bar_units = 0.8 / (double)pens.size();
  const double px_per_unit = (p.W - p.ml - p.mr) / (p.x1 - p.x0);
  int ci = 0;
  for (double pen : pens) {
    p.legend.emplace_back(fmt::format("penetration {:g}%", pen * 100),
                          kPalette[ci % 10]);
    ++ci;
  }
  k = 0;
  for (auto& [turns, by_pen] : grid) {
    ci = 0;
    for (double pen : pens) {
      auto it = by_pen.find(pen);
      if (it != by_pen.end()) {
        const double xc =
            (double)k +
            ((double)ci - ((double)pens.size() - 1) / 2.0) * bar_units;
        p.vbar(xc, bar_units * px_per_unit * 0.9, it->second.mean(),
               kPalette[ci % 10]);
      }
      ++ci;
    }
    ++k;
  }
  svg = p.render();
  return true;
}

bool table1(const std::vector<RunInfo>& runs, std::string& csv, std::string& svg,
            std::string* err) {
  // improvement over the zero-penetration fleet, plus the penetration
  // improvement ratio Mix/CDG
  struct Key {
    double r, l, g;
    bool operator<(const Key& o) const {
      return std::tie(r, l, g) < std::tie(o.r, o.l, o.g);
    }
  };
  std::map<Key, std::map<int, Agg>> thr;  // pen percent -> throughput
  for (const RunInfo& ri : runs) {
    if (ri.cfg.layout != "reference_intersection") continue;
    const double pen = ri.cfg.penetration >= 0
                           ? ri.cfg.penetration
                           : (ri.cfg.policy == Policy::Cdg ? 1.0 : 0.0);
    thr[{ri.cfg.turn_right_pct, ri.cfg.turn_left_pct, ri.cfg.green_s}]
       [(int)std::lround(pen * 100)]
           .add(ri.throughput_vph);
  }
  if (thr.empty()) {
    *err = "table1 needs reference_intersection runs";
    return false;
  }
  csv = "turn_right_pct,turn_left_pct,green_s,improvement_cdg_pct,"
        "improvement_mix_pct,pir\n";
  std::vector<std::string> lines;
  for (auto& [key, by_pen] : thr) {
    auto c100 = by_pen.find(100);
    auto c50 = by_pen.find(50);
    auto c0 = by_pen.find(0);
    if (c100 == by_pen.end() || c0 == by_pen.end() || c0->second.mean() <= 0)
      continue;
    const double imp_cdg = (c100->second.mean() / c0->second.mean() - 1) * 100;
    const double imp_mix =
        c50 != by_pen.end() ? (c50->second.mean() / c0->second.mean() - 1) * 100
                            : 0.0;
    const double pir = imp_cdg != 0 && c50 != by_pen.end() ? imp_mix / imp_cdg : 0.0;
    csv += fmt::format("{},{},{},{},{},{}\n", key.r, key.l, key.g, imp_cdg,
                       imp_mix, pir);
    lines.push_back(fmt::format(
        "turns {:g}/{:g}  green {:g}s:  CDG +{:.0f}%  Mix +{:.0f}%  PIR {:.2f}",
        key.r, key.l, key.g, imp_cdg, imp_mix, pir));
  }
  if (lines.empty()) {
    *err = "table1 needs penetration 0 and 1 runs per permutation";
    return false;
  }
  std::string body;
  double y = 56;
  for (const std::string& ln : lines) {
    body += fmt::format(
        "<text x=\"32\" y=\"{}\" font-size=\"13\" font-family=\"monospace\">{}"
        "</text>\n",
        y, ln);
    y += 20;
  }
  svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"{}\">\n"
      "<rect width=\"720\" height=\"{}\" fill=\"white\"/>\n"
      "<text x=\"32\" y=\"28\" font-size=\"15\" font-weight=\"bold\">Throughput "
      "improvement at the reference intersection</text>\n{}</svg>\n",
      y + 16, y + 16, body);
  return true;
}

bool network_bars(const std::vector<RunInfo>& runs, const std::string& layout,
                  bool with_turns, const std::string& title, std::string& csv,
                  std::string& svg, std::string* err) {
  // mean metrics by (green, offset) and fleet
  struct Key {
    double g, o;
    bool operator<(const Key& k) const {
      return std::tie(g, o) < std::tie(k.g, k.o);
    }
  };
  std::map<Key, std::map<std::string, std::array<Agg, 3>>> grid;
  std::set<std::string> fleets;
  for (const RunInfo& r : runs) {
    if (r.cfg.layout != layout) continue;
    const bool turns = r.cfg.turn_right_pct > 0 || r.cfg.turn_left_pct > 0;
    if (turns != with_turns) continue;
    auto& cell = grid[{r.cfg.green_s, r.cfg.offset_s}][fleet_label(r.cfg)];
    cell[0].add(r.throughput_vph);
    cell[1].add(r.travel_mean_s);
    cell[2].add(r.density_mean);
    fleets.insert(fleet_label(r.cfg));
  }
  if (grid.empty()) {
    *err = fmt::format("{} needs {} runs with turns {}", title, layout,
                       with_turns ? "on" : "off");
    return false;
  }
  csv = "green_s,offset_s,label,throughput_vph,travel_s,density\n";
  for (auto& [key, by_fleet] : grid)
    for (auto& [label, cell] : by_fleet)
      csv += fmt::format("{},{},{},{},{},{}\n", key.g, key.o, csv_escape(label),
                         cell[0].mean(), cell[1].mean(), cell[2].mean());

  Plot p;
  p.title = title;
  p.xlabel = "green [s] / offset [s]";
  p.ylabel = "throughput [veh/h]";
  double ymax = 0;
  for (auto& [key, by_fleet] : grid) {
    p.xcats.push_back(fmt::format("{:g}/{:g}", key.g, key.o));
    for (auto& [label, cell] : by_fleet) ymax = std::max(ymax, cell[0].mean());
  }
  p.x0 = -0.5;
  p.x1 = (double)p.xcats.size() - 0.5;
  p.fit_y(0, ymax);
  const double slot = 1.0;  // category width in x units
  const double group_frac = 0.8;
  const double bar_units = slot * group_frac / (double)fleets.size();
  const double px_per_unit = (p.W - p.ml - p.mr) / (p.x1 - p.x0);
  int ci = 0;
  for (const std::string& f : fleets) {
    p.legend.emplace_back(f, kPalette[ci % 10]);
    ++ci;
  }
  size_t k = 0;
  for (auto& [key, by_fleet] : grid) {
    ci = 0;
    for (const std::string& f : fleets) {
      auto it = by_fleet.find(f);
      if (it != by_fleet.end()) {
        const double xc = (double)k + ((double)ci -
                                       ((double)fleets.size() - 1) / 2.0) *
                                          bar_units;
        p.vbar(xc, bar_units * px_per_unit * 0.9, it->second[0].mean(),
               kPalette[ci % 10]);
      }
      ++ci;
    }
    ++k;
  }
  svg = p.render();
  return true;
}

bool fig21(const std::vector<RunInfo>& runs, std::string& csv, std::string& svg,
           std::string* err) {
  // stability matrix over green x offset per fleet; worst verdict across reps
  auto severity = [](const std::string& s) {
    return s == "unstable" ? 2 : s == "semi_stable" ? 1 : 0;
  };
  bool any_turns = false;
  for (const RunInfo& r : runs)
    if (r.cfg.layout == "grid" &&
        (r.cfg.turn_right_pct > 0 || r.cfg.turn_left_pct > 0))
      any_turns = true;
  struct Key {
    double g, o;
    std::string fleet;
    bool operator<(const Key& k) const {
      return std::tie(g, o, fleet) < std::tie(k.g, k.o, k.fleet);
    }
  };
  std::map<Key, int> worst;
  std::set<double> greens, offsets;
  std::set<std::string> fleets;
  for (const RunInfo& r : runs) {
    if (r.cfg.layout != "grid") continue;
    const bool turns = r.cfg.turn_right_pct > 0 || r.cfg.turn_left_pct > 0;
    if (any_turns && !turns) continue;
    const Key key{r.cfg.green_s, r.cfg.offset_s, fleet_label(r.cfg)};
    auto [it, fresh] = worst.emplace(key, 0);
    it->second = std::max(it->second, severity(r.stability));
    greens.insert(key.g);
    offsets.insert(key.o);
    fleets.insert(key.fleet);
  }
  if (worst.empty()) {
    *err = "fig21 needs grid runs";
    return false;
  }
  static const char* kVerdict[3] = {"stable", "semi_stable", "unstable"};
  static const char* kColor[3] = {"#7fbf7f", "#f2d675", "#e06666"};
  csv = "green_s,offset_s,label,stability\n";
  for (auto& [key, sev] : worst)
    csv += fmt::format("{},{},{},{}\n", key.g, key.o, csv_escape(key.fleet),
                       kVerdict[sev]);

  // layout: columns = greens, row groups = offsets, sub-rows = fleets
  const double cw = 92, ch = 26, left = 150, top = 70;
  const double W = left + cw * (double)greens.size() + 40;
  const double H = top + ch * (double)(offsets.size() * fleets.size()) + 60;
  std::string body;
  int col = 0;
  for (double g : greens) {
    body += fmt::format(
        "<text x=\"{:.1f}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">green "
        "{:g}</text>\n",
        left + cw * (col + 0.5), top - 12, g);
    ++col;
  }
  int row = 0;
  for (double o : offsets) {
    for (const std::string& f : fleets) {
      body += fmt::format(
          "<text x=\"{}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">offset "
          "{:g} {}</text>\n",
          left - 8, top + ch * (row + 0.6), o, f);
      col = 0;
      for (double g : greens) {
        auto it = worst.find({g, o, f});
        if (it != worst.end()) {
          body += fmt::format(
              "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{}\" height=\"{}\" "
              "fill=\"{}\" stroke=\"#444\"/>\n",
              left + cw * col + 2, top + ch * row + 2, cw - 4, ch - 4,
              kColor[it->second]);
        }
        ++col;
      }
      ++row;
    }
  }
  svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" "
      "height=\"{:.0f}\" font-family=\"sans-serif\">\n<rect width=\"{:.0f}\" "
      "height=\"{:.0f}\" fill=\"white\"/>\n<text x=\"24\" y=\"28\" "
      "font-size=\"15\" font-weight=\"bold\">Traffic flow stability in the grid"
      "</text>\n{}</svg>\n",
      W, H, W, H, body);
  return true;
}

bool fig26(const std::vector<RunInfo>& runs, std::string& csv, std::string& svg,
           std::string* err) {
  std::map<std::string, std::vector<MetricsRow>> series;
  for (const RunInfo& r : runs) {
    if (r.cfg.layout != "berlin") continue;
    auto& dst = series[fleet_label(r.cfg)];
    if (dst.empty()) dst = run_rows(r);
  }
  if (series.empty()) {
    *err = "fig26 needs berlin runs";
    return false;
  }
  csv = "label,t,throughput_vpm,inflow_east_vpm,inflow_west_vpm,"
        "inflow_minor_vpm\n";
  Plot p;
  p.title = "Berlin corridor throughput over time";
  p.xlabel = "time [min]";
  p.ylabel = "throughput [veh/min]";
  double tmax = 1, ymax = 1;
  int ci = 0;
  for (auto& [label, rows] : series) {
    for (const MetricsRow& r : rows) {
      csv += fmt::format("{},{},{},{},{},{}\n", csv_escape(label), r.t,
                         r.throughput_vph / 60.0, r.inflow_east_vpm,
                         r.inflow_west_vpm, r.inflow_minor_vpm);
      tmax = std::max(tmax, r.t / 60.0);
      ymax = std::max(ymax, r.throughput_vph / 60.0);
    }
    p.legend.emplace_back(label, kPalette[ci % 10]);
    ++ci;
  }
  p.x0 = 0;
  p.x1 = tmax;
  p.fit_y(0, ymax);
  ci = 0;
  for (auto& [label, rows] : series) {
    std::vector<std::pair<double, double>> pts;
    for (const MetricsRow& r : rows)
      pts.emplace_back(r.t / 60.0, r.throughput_vph / 60.0);
    p.polyline(pts, kPalette[ci % 10]);
    ++ci;
  }
  svg = p.render();
  return true;
}

}  // namespace

std::vector<RunInfo> scan_runs(const std::string& results_dir) {
  std::vector<RunInfo> out;
  if (!fs::exists(results_dir)) return out;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(results_dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const fs::path& d : dirs) {
    const fs::path man = d / "manifest.json";
    if (!fs::exists(man)) continue;
    try {
      const ojson jm = ojson::parse(read_text_file(man.string()));
      if (!jm.contains("summary")) continue;
      const ojson& js = jm.at("summary");
      RunInfo r;
      r.dir = d.string();
      r.index = jm.value("index", (uint64_t)0);
      r.label = jm.value("label", std::string());
      r.cfg = scenario_from_json_text(jm.at("config").dump());
      r.exits = js.value("exits", (uint64_t)0);
      r.teleports = js.value("teleports", (uint64_t)0);
      r.gridlock_teleports = js.value("gridlock_teleports", (uint64_t)0);
      r.throughput_vph = js.value("throughput_vph", 0.0);
      r.travel_mean_s = js.value("travel_mean_s", 0.0);
      r.density_peak = js.value("density_peak", 0.0);
      r.density_mean = js.value("density_mean", 0.0);
      r.duration_s = js.value("duration_s", 0.0);
      r.stability = js.value("stability", std::string());
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      continue;  // incomplete or foreign directory
    }
  }
  std::sort(out.begin(), out.end(),
            [](const RunInfo& a, const RunInfo& b) { return a.index < b.index; });
  return out;
}

bool write_figure(const std::string& results_dir, const std::string& figure,
                  std::string* err) {
  bool known = false;
  for (const char* f : kFigureNames)
    if (figure == f) known = true;
  if (!known) {
    std::string names;
    for (const char* f : kFigureNames) names += std::string(" ") + f;
    *err = fmt::format("unknown figure '{}'; valid names:{}", figure, names);
    return false;
  }
  const std::vector<RunInfo> runs = scan_runs(results_dir);
  if (runs.empty()) {
    *err = fmt::format("no completed runs under '{}'", results_dir);
    return false;
  }
  std::string csv, svg;
  bool ok = false;
  if (figure == "fig5") ok = fig5(runs, csv, svg, err);
  else if (figure == "fig6") ok = fig6(runs, csv, svg, err);
  else if (figure == "fig9") ok = fig9(runs, csv, svg, err);
  else if (figure == "table1") ok = table1(runs, csv, svg, err);
  else if (figure == "fig17")
    ok = network_bars(runs, "arterial", false,
                      "Arterial throughput, no major turns", csv, svg, err);
  else if (figure == "fig18")
    ok = network_bars(runs, "arterial", true,
                      "Arterial throughput with major turns", csv, svg, err);
  else if (figure == "fig19")
    ok = network_bars(runs, "grid", false, "Grid throughput, no turns", csv,
                      svg, err);
  else if (figure == "fig20")
    ok = network_bars(runs, "grid", true, "Grid throughput with turns", csv,
                      svg, err);
  else if (figure == "fig21") ok = fig21(runs, csv, svg, err);
  else if (figure == "fig26") ok = fig26(runs, csv, svg, err);
  if (!ok) return false;
  write_text_file((fs::path(results_dir) / (figure + ".csv")).string(), csv);
  write_text_file((fs::path(results_dir) / (figure + ".svg")).string(), svg);
  return true;
}

}  // namespace pf
