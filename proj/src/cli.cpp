#include "platoonflow/cli.hpp"

#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "platoonflow/calibration.hpp"
#include "platoonflow/csvio.hpp"
#include "platoonflow/report.hpp"

namespace pf {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char kToolVersion[] = "0.1.0";

namespace {

int64_t now_unix() {
  return (int64_t)std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool env_seed(uint32_t* out, std::string* err) {
  const char* e = std::getenv("PLATOONFLOW_SEED");
  if (!e || !*e) return false;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(e, &end, 10);
  if (!end || *end != '\0' || v > 0xffffffffULL) {
    *err = fmt::format("PLATOONFLOW_SEED='{}' is not a 32-bit unsigned integer", e);
    return false;
  }
  *out = (uint32_t)v;
  return true;
}

std::string default_out(const std::string& input_path) {
  return fs::path(input_path).stem().string() + "_out";
}

double density_mean_of(const RunLog& log) {
  double sum = 0.0;
  size_t n = 0;
  for (const MetricsRow& r : log.rows) {
    sum += r.density;
    ++n;
  }
  return n ? sum / (double)n : 0.0;
}

std::string stability_of(const RunLog& log, double window_s) {
  StabilityInput in;
  in.window_throughput = rebucket_throughput(log.rows, window_s);
  in.throughput_count = log.exits;
  in.teleports = log.teleports;
  in.gridlock_teleports = log.gridlock_teleports;
  return stability_name(classify_stability(in).verdict);
}

ojson summary_json(const RunLog& log) {
  ojson js;
  js["exits"] = log.exits;
  js["throughput_vph"] =
      log.duration > 0 ? (double)log.exits * 3600.0 / log.duration : 0.0;
  js["travel_mean_s"] = log.travel_mean;
  js["has_travel"] = log.has_travel;
  js["density_peak"] = log.density_peak;
  js["density_mean"] = density_mean_of(log);
  js["teleports"] = log.teleports;
  js["gridlock_teleports"] = log.gridlock_teleports;
  js["stability"] = stability_of(log, 60.0);
  js["duration_s"] = log.duration;
  return js;
}

}  // namespace

int run_one(const ScenarioConfig& cfg, uint64_t index, const std::string& label,
            const std::string& dir, std::string* err) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    *err = fmt::format("cannot create '{}': {}", dir, ec.message());
    return 1;
  }
  const int64_t started = now_unix();
  World w;
  try {
    w = build_world(cfg);
  } catch (const ConfigError& e) {
    *err = e.what();
    return 1;
  }
  const double dur = default_duration(cfg);
  RunLog log;
  try {
    log = run(w, dur);
  } catch (const SimAbort& e) {
    *err = e.what();
    try {
      write_text_file((fs::path(dir) / "error.txt").string(), e.what());
    } catch (const std::exception&) {
    }
    return 2;
  }
  try {
    write_text_file((fs::path(dir) / "metrics.csv").string(),
                    metrics_csv(log.rows));
    write_text_file((fs::path(dir) / "events.csv").string(),
                    events_csv(w.lines, log.events));
    ojson jm;
    jm["tool"] = "platoonflow";
    jm["version"] = kToolVersion;
    jm["index"] = index;
    jm["label"] = label;
    jm["seed"] = cfg.seed;
    jm["duration_s"] = dur;
    jm["started_unix"] = started;
    jm["finished_unix"] = now_unix();
    jm["outputs"] = ojson::array({"metrics.csv", "events.csv"});
    jm["config"] = ojson::parse(scenario_to_json_text(cfg));
    jm["summary"] = summary_json(log);
    write_text_file((fs::path(dir) / "manifest.json").string(),
                    jm.dump(2) + "\n");
  } catch (const std::exception& e) {
    *err = e.what();
    return 1;
  }
  return 0;
}

namespace {

int cmd_run(const std::string& path, bool seed_set, uint32_t seed,
            std::string out_dir) {
  ScenarioConfig cfg;
  try {
    cfg = scenario_from_json_text(read_text_file(path));
  } catch (const std::exception& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 1;
  }
  if (seed_set) cfg.seed = seed;
  std::string err;
  uint32_t es = 0;
  if (env_seed(&es, &err)) {
    cfg.seed = es;
  } else if (!err.empty()) {
    fmt::print(stderr, "config error: {}\n", err);
    return 1;
  }
  if (out_dir.empty()) out_dir = default_out(path);
  const int rc = run_one(cfg, 0, "", out_dir, &err);
  if (rc != 0) {
    fmt::print(stderr, "{}: {}\n", rc == 2 ? "simulation abort" : "config error",
               err);
    return rc;
  }
  fmt::print("run complete: {}\n", out_dir);
  return 0;
}

// Resumable check: a run directory counts as done when its manifest exists
// and snapshots the same config.
bool already_done(const fs::path& dir, const ScenarioConfig& cfg) {
  const fs::path man = dir / "manifest.json";
  if (!fs::exists(man)) return false;
  try {
    const ojson jm = ojson::parse(read_text_file(man.string()));
    return jm.contains("summary") &&
           jm.at("config").dump() == ojson::parse(scenario_to_json_text(cfg)).dump();
  } catch (const std::exception&) {
    return false;
  }
}

void write_results_csv(const std::string& out_dir) {
  const std::vector<RunInfo> runs = scan_runs(out_dir);
  std::string s =
      "index,label,layout,backend,policy,penetration,mix_mode,green_s,"
      "offset_s,turn_right_pct,turn_left_pct,seed,duration_s,exits,"
      "throughput_vph,travel_mean_s,density_peak,density_mean,teleports,"
      "gridlock_teleports,stability\n";
  for (const RunInfo& r : runs) {
    s += fmt::format(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        r.index, csv_escape(r.label), r.cfg.layout, backend_name(r.cfg.backend),
        policy_name(r.cfg.policy), r.cfg.penetration, r.cfg.mix_mode,
        r.cfg.green_s, r.cfg.offset_s, r.cfg.turn_right_pct,
        r.cfg.turn_left_pct, r.cfg.seed, r.duration_s, r.exits,
        r.throughput_vph, r.travel_mean_s, r.density_peak, r.density_mean,
        r.teleports, r.gridlock_teleports, r.stability);
  }
  write_text_file((fs::path(out_dir) / "results.csv").string(), s);
}

int cmd_sweep(const std::string& path, int jobs, std::string out_dir) {
  SweepSpec spec;
  try {
    spec = sweep_from_json_text(read_text_file(path));
  } catch (const std::exception& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 1;
  }
  std::string err;
  uint32_t es = 0;
  if (env_seed(&es, &err)) {
    spec.base.seed = es;
  } else if (!err.empty()) {
    fmt::print(stderr, "config error: {}\n", err);
    return 1;
  }
  std::vector<SweepRun> runs;
  try {
    runs = expand_sweep(spec);
  } catch (const std::exception& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 1;
  }
  if (out_dir.empty()) out_dir = default_out(path);
  fs::create_directories(out_dir);

  struct Slot {
    const SweepRun* run = nullptr;
    fs::path dir;
    int rc = 0;
    std::string err;
    bool skipped = false;
  };
  std::vector<Slot> slots(runs.size());
  size_t pending = 0;
  for (size_t i = 0; i < runs.size(); ++i) {
    slots[i].run = &runs[i];
    slots[i].dir = fs::path(out_dir) / fmt::format("{:06d}", runs[i].index);
    if (already_done(slots[i].dir, runs[i].cfg)) {
      slots[i].skipped = true;
    } else {
      ++pending;
    }
  }
  jobs = std::max(1, std::min(jobs, 64));
  std::atomic<size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = cursor.fetch_add(1);
      if (i >= slots.size()) return;
      Slot& s = slots[i];
      if (s.skipped) continue;
      s.rc = run_one(s.run->cfg, s.run->index, s.run->label, s.dir.string(),
                     &s.err);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  write_results_csv(out_dir);
  int failures = 0;
  for (const Slot& s : slots) {
    if (s.rc != 0) {
      ++failures;
      fmt::print(stderr, "run {:06d} [{}] failed ({}): {}\n", s.run->index,
                 s.run->label, s.rc, s.err);
    }
  }
  fmt::print("sweep '{}': {} runs, {} already done, {} failed; results in {}\n",
             spec.name, runs.size(), runs.size() - pending, failures, out_dir);
  return failures == 0 ? 0 : 2;
}

int cmd_report(const std::string& dir, const std::string& figure) {
  if (!fs::exists(fs::path(dir) / "results.csv")) {
    fmt::print(stderr, "config error: no results.csv in '{}' (run sweep first)\n",
               dir);
    return 1;
  }
  std::string err;
  if (!write_figure(dir, figure, &err)) {
    fmt::print(stderr, "config error: {}\n", err);
    return 1;
  }
  fmt::print("wrote {0}/{1}.csv and {0}/{1}.svg\n", dir, figure);
  return 0;
}

int cmd_validate(const std::string& a_name, const std::string& b_name,
                 int subset, double tol, std::string out_dir) {
  Backend ba, bb;
  if (!backend_from_name(a_name, ba) || !backend_from_name(b_name, bb)) {
    fmt::print(stderr, "config error: backends must be krauss or controller\n");
    return 1;
  }
  if (out_dir.empty()) out_dir = "validate_out";
  fs::create_directories(out_dir);

  uint32_t base_seed = 42;
  std::string err;
  uint32_t es = 0;
  if (env_seed(&es, &err)) {
    base_seed = es;
  } else if (!err.empty()) {
    fmt::print(stderr, "config error: {}\n", err);
    return 1;
  }

  // default calibration grid: greens x queue patterns x policies
  struct Perm {
    double green;
    int queue;
    Policy policy;
  };
  std::vector<Perm> perms;
  for (double g : {15.0, 30.0})
    for (int q : {0, 1, 2})
      for (Policy p : {Policy::Cdg, Policy::CtgRef})
        perms.push_back({g, q, p});
  if (subset < 1 || subset > (int)perms.size()) subset = (int)perms.size();
  perms.resize((size_t)subset);

  bool timing_ok = true;
  size_t within = 0, total_matches = 0;
  std::vector<PermutationRuns> grid;
  for (size_t pi = 0; pi < perms.size(); ++pi) {
    const Perm& pm = perms[pi];
    ScenarioConfig cfg;
    cfg.layout = "calibration";
    cfg.green_s = pm.green;
    cfg.queue_pattern = pm.queue;
    cfg.policy = pm.policy;
    const std::string label = fmt::format("green={:g},queue={},policy={}",
                                          pm.green, pm.queue,
                                          policy_name(pm.policy));
    // Step I: one seed-matched pair, detector timing comparison
    cfg.seed = base_seed + (uint32_t)pi * 16 + 15;
    DetectorLog la, lb;
    try {
      World wa = build_calibration_world(ba, cfg);
      la = detector_log(wa, run(wa, default_duration(cfg)));
      World wb = build_calibration_world(bb, cfg);
      lb = detector_log(wb, run(wb, default_duration(cfg)));
    } catch (const std::exception& e) {
      fmt::print(stderr, "validate: {} failed: {}\n", label, e.what());
      return 2;
    }
    DetectorTimingReport rep = compare_detector_timings(la, lb, tol);
    for (const DetectorMatch& m : rep.matches) {
      ++total_matches;
      if (!m.missing && m.dt <= tol) ++within;
    }
    if (rep.verdict == DetectorTimingReport::Invalid) timing_ok = false;
    const std::string stem = fmt::format("timing_{:02d}", pi);
    write_text_file((fs::path(out_dir) / (stem + ".txt")).string(),
                    fmt::format("permutation: {}\n", label) +
                        timing_report_text(rep));
    write_text_file((fs::path(out_dir) / (stem + ".csv")).string(),
                    timing_report_csv(rep));

    // Step II: six repetitions per backend, metric confidence bands
    PermutationRuns pr;
    pr.label = label;
    try {
      for (int rep_i = 0; rep_i < 6; ++rep_i) {
        cfg.seed = base_seed + (uint32_t)pi * 16 + (uint32_t)rep_i;
        World wa = build_calibration_world(ba, cfg);
        pr.a.push_back(metric_sample(run(wa, default_duration(cfg))));
        World wb = build_calibration_world(bb, cfg);
        pr.b.push_back(metric_sample(run(wb, default_duration(cfg))));
      }
    } catch (const std::exception& e) {
      fmt::print(stderr, "validate: {} failed: {}\n", label, e.what());
      return 2;
    }
    grid.push_back(std::move(pr));
  }
  ValidationSummary vs = validate_metrics(grid);
  const std::string vtext = validation_text(vs);
  write_text_file((fs::path(out_dir) / "validation.txt").string(), vtext);
  const double frac =
      total_matches ? (double)within / (double)total_matches : 0.0;
  fmt::print("{}", vtext);
  fmt::print("detector events within {:.1f} s: {:.1f}% ({}/{})\n", tol,
             100.0 * frac, within, total_matches);
  fmt::print("timing verdict: {}\n", timing_ok ? "valid" : "invalid");
  if (!timing_ok || !vs.all_inside) {
    fmt::print(stderr, "validation failed (see {})\n", out_dir);
    return 3;
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"platoonflow: platooning throughput at signalized intersections"};
  app.set_version_flag("--version", std::string("platoonflow ") + kToolVersion);
  app.require_subcommand(1);

  std::string run_path, run_out;
  uint32_t run_seed = 0;
  CLI::App* c_run = app.add_subcommand("run", "simulate one scenario file");
  c_run->add_option("file", run_path, "scenario JSON file")->required();
  CLI::Option* run_seed_opt =
      c_run->add_option("--seed", run_seed, "override the scenario seed");
  c_run->add_option("--out", run_out, "output directory");

  std::string sweep_path, sweep_out;
  int jobs = 1;
  CLI::App* c_sweep = app.add_subcommand("sweep", "run a permutation sweep");
  c_sweep->add_option("file", sweep_path, "sweep JSON file")->required();
  c_sweep->add_option("--jobs", jobs, "parallel worker count");
  c_sweep->add_option("--out", sweep_out, "output directory");

  std::string rep_dir, rep_fig;
  CLI::App* c_rep = app.add_subcommand("report", "emit a figure from results");
  c_rep->add_option("dir", rep_dir, "sweep output directory")->required();
  c_rep->add_option("--figure", rep_fig, "figure name")->required();

  std::string va = "controller", vb = "krauss", vout;
  int vgrid = 0;
  double vtol = 1.0;
  CLI::App* c_val = app.add_subcommand("validate", "cross-backend validation");
  c_val->add_option("--backend-a", va, "reference backend")->required();
  c_val->add_option("--backend-b", vb, "backend under test")->required();
  c_val->add_option("--grid", vgrid, "use only the first N permutations");
  c_val->add_option("--tol", vtol, "detector timing tolerance [s]");
  c_val->add_option("--out", vout, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (c_run->parsed())
    return cmd_run(run_path, run_seed_opt->count() > 0, run_seed, run_out);
  if (c_sweep->parsed()) return cmd_sweep(sweep_path, jobs, sweep_out);
  if (c_rep->parsed()) return cmd_report(rep_dir, rep_fig);
  if (c_val->parsed()) return cmd_validate(va, vb, vgrid, vtol, vout);
  return 1;
}

}  // namespace pf
