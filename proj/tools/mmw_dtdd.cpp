// mmw-dtdd: run dynamic-TDD scheduling experiments on random relay drops.

#include <dtdd/report.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit : int
{
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kRuntime = 4,
};

struct Common
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> drops;
  std::optional<int> subframes;
  std::optional<int> threads;
  std::string out;
  std::string scheme = "all";
  bool trace = false;
};

void add_common(CLI::App* app, Common& c, bool with_scheme)
{
  app->add_option("--config", c.config, "Scenario file (INI); built-in defaults if omitted");
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--drops", c.drops, "Number of drops")->check(CLI::PositiveNumber);
  app->add_option("--subframes", c.subframes, "Subframes given to the dynamic scheduler")->check(CLI::Range(2, 64));
  app->add_option("--threads", c.threads, "Worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
  app->add_option("--out", c.out, "Output directory");
  if (with_scheme) {
    app->add_option("--scheme", c.scheme, "Schemes to run")->check(CLI::IsMember({"dtdd", "static", "brute", "all"}));
  }
  app->add_flag("--trace", c.trace, "Write the greedy move log");
}

dtdd::ScenarioConfig load(const Common& c)
{
  dtdd::ScenarioConfig cfg = c.config.empty() ? dtdd::ScenarioConfig{} : dtdd::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.drops) cfg.drops = *c.drops;
  if (c.subframes) cfg.dtdd_subframes = *c.subframes;
  if (c.threads) cfg.threads = *c.threads;
  dtdd::validate(cfg);
  return cfg;
}

void print_stats(const char* label, const dtdd::RateStats& s)
{
  if (s.empty()) {
    std::printf("  %-4s (no samples)\n", label);
    return;
  }
  std::printf("  %-4s n=%-5zu mean %9.2f  median %9.2f  edge %9.2f Mbps\n", label, s.count, s.mean / 1e6,
              s.median / 1e6, s.edge / 1e6);
}

void print_report(const dtdd::MetricsReport& r)
{
  std::printf("drops %d/%d ok\n", r.drops_ok, r.drops_requested);
  for (const auto& [drop, err] : r.failures) std::fprintf(stderr, "drop %d failed: %s\n", drop, err.c_str());
  std::printf("UE states: LOS %.3f  NLOS %.3f  outage %.3f\n", r.frac_los, r.frac_nlos, r.frac_outage);
  for (const auto& [scheme, dirs] : r.rates) {
    std::printf("%s\n", std::string(dtdd::to_string(scheme)).c_str());
    print_stats("DL", dirs[0]);
    print_stats("UL", dirs[1]);
  }
  if (r.gains) {
    const auto& g = *r.gains;
    std::printf("gain DTDD/static  DL mean %.3f median %.3f edge %.3f | UL mean %.3f median %.3f edge %.3f\n",
                g[0].mean, g[0].median, g[0].edge, g[1].mean, g[1].median, g[1].edge);
  }
  if (r.mean_inner_calls > 0) {
    std::printf("inner solves per drop: mean %.2f max %d\n", r.mean_inner_calls, r.max_inner_calls);
  }
  if (!r.utility_gaps.empty()) {
    std::printf("brute force: mean visited %.1f, greedy/optimal utility %.6f\n", r.mean_brute_evaluated,
                r.mean_utility_ratio);
  }
  std::printf("half-duplex violations %d, unconverged solves %d, max KKT residual %.3g\n", r.half_duplex_violations,
              r.unconverged_solves, r.max_kkt_residual);
}

int run_and_emit(const dtdd::ScenarioConfig& cfg, const dtdd::ExperimentOptions& opt, const Common& c)
{
  const auto res = dtdd::run_experiment(cfg, opt);
  print_report(res.report);
  if (!c.out.empty()) {
    dtdd::emit_outputs(cfg, res, c.out, {true, opt.trace});
    std::printf("wrote %s\n", c.out.c_str());
  }
  return res.report.drops_ok == 0 ? kRuntime : kOk;
}

int cmd_run(const Common& c)
{
  const auto cfg = load(c);
  dtdd::ExperimentOptions opt = dtdd::ExperimentOptions::from(cfg);
  if (c.scheme != "all") {
    opt.dtdd = c.scheme == "dtdd";
    opt.static_sweep = c.scheme == "static";
    opt.brute = c.scheme == "brute";
  }
  opt.trace = c.trace;
  return run_and_emit(cfg, opt, c);
}

int cmd_brute(const Common& c)
{
  auto cfg = load(c);
  if (!c.subframes && c.config.empty()) cfg.dtdd_subframes = 4;
  const dtdd::ExperimentOptions opt{true, false, true, c.trace};
  const auto res = dtdd::run_experiment(cfg, opt);
  for (const auto& d : res.drops) {
    if (!d.ok) continue;
    std::printf("drop %3d  greedy %.6f  optimal %.6f  gap %.3e  solves %d  visited %llu\n", d.drop, d.dtdd_utility,
                d.brute_utility, d.brute_utility - d.dtdd_utility, d.inner_calls,
                static_cast<unsigned long long>(d.brute_evaluated));
  }
  print_report(res.report);
  if (!c.out.empty()) {
    dtdd::emit_outputs(cfg, res, c.out, {true, opt.trace});
    std::printf("wrote %s\n", c.out.c_str());
  }
  return res.report.drops_ok == 0 ? kRuntime : kOk;
}

int cmd_sweep_static(const Common& c)
{
  const auto cfg = load(c);
  const auto sweep = dtdd::enumerate_static_configs(cfg.pattern_file, cfg.n_rn, cfg.dtdd_subframes);
  std::printf("%zu static configurations with %d usable subframes\n", sweep.configs.size(), cfg.dtdd_subframes);
  for (const auto& s : sweep.configs) std::cout << "  " << s.pattern << '/' << s.mask << "  " << s.schedule << '\n';
  for (const auto& r : sweep.rejected) std::printf("  rejected %s\n", r.c_str());
  return run_and_emit(cfg, {false, true, false, false}, c);
}

int cmd_drop(const Common& c, int index)
{
  const auto cfg = load(c);
  auto rng = dtdd::drop_rng(cfg.seed, static_cast<std::uint64_t>(index));
  const auto topo = dtdd::build_topology(cfg, rng);
  const double per_frame = cfg.frame_subframes();

  dtdd::json j;
  j["drop"] = index;
  j["scenario"] = dtdd::scenario_json(cfg);
  j["topology"] = dtdd::topology_json(topo);
  std::string trace;
  if (c.scheme == "all" || c.scheme == "dtdd") {
    const auto st = dtdd::run_dtdd(topo, cfg);
    std::ostringstream sched;
    sched << st.schedule;
    j["dtdd"] = dtdd::allocation_json(topo, st.allocation, per_frame);
    j["dtdd"]["schedule"] = sched.str();
    j["dtdd"]["inner_calls"] = st.inner_calls;
    if (c.trace) {
      std::ostringstream os;
      dtdd::write_move_trace(st, os);
      trace = os.str();
    }
  }
  if (c.scheme == "all" || c.scheme == "static") {
    const auto sweep = dtdd::enumerate_static_configs(cfg.pattern_file, cfg.n_rn, cfg.dtdd_subframes);
    if (!sweep.configs.empty()) {
      const auto sr = dtdd::best_static(topo, sweep.configs, cfg.channel.rate.w_max_hz, cfg.solver);
      const auto& best = sweep.configs[sr.best];
      j["static_best"] = dtdd::allocation_json(topo, sr.best_allocation(), per_frame);
      j["static_best"]["config"] = best.pattern + "/" + best.mask;
    }
  }
  if (c.scheme == "brute") {
    const auto bf = dtdd::brute_force(topo, cfg.dtdd_subframes, cfg.channel.rate.w_max_hz, cfg.solver);
    std::ostringstream sched;
    sched << bf.schedule;
    j["brute"] = dtdd::allocation_json(topo, bf.allocation, per_frame);
    j["brute"]["schedule"] = sched.str();
    j["brute"]["visited"] = bf.evaluated;
  }

  if (c.out.empty()) {
    std::cout << j.dump(2) << '\n';
    if (!trace.empty()) std::cout << trace;
    return kOk;
  }
  dtdd::ensure_directory(c.out);
  const std::filesystem::path dir(c.out);
  dtdd::write_json_file(j, dir / ("drop_" + std::to_string(index) + ".json"));
  if (!trace.empty()) {
    const auto p = dir / ("drop_" + std::to_string(index) + "_trace.txt");
    auto os = dtdd::open_output(p);
    os << trace;
    dtdd::finish_output(os, p);
  }
  std::printf("wrote %s\n", c.out.c_str());
  return kOk;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Dynamic TDD scheduling for mmWave relay networks"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "Run a Monte-Carlo experiment");
  add_common(run, run_opts, true);

  Common drop_opts;
  int drop_index = 0;
  auto* drop = app.add_subcommand("drop", "Solve one drop and dump its topology and allocations as JSON");
  add_common(drop, drop_opts, true);
  drop->add_option("--index", drop_index, "Drop index")->check(CLI::NonNegativeNumber);

  Common brute_opts;
  auto* brute = app.add_subcommand("brute", "Compare greedy search with exhaustive search");
  add_common(brute, brute_opts, false);

  Common sweep_opts;
  auto* sweep = app.add_subcommand("sweep-static", "Evaluate the static LTE TDD configurations only");
  add_common(sweep, sweep_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*drop) return cmd_drop(drop_opts, drop_index);
    if (*brute) return cmd_brute(brute_opts);
    if (*sweep) return cmd_sweep_static(sweep_opts);
  } catch (const dtdd::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const dtdd::PatternError& e) {
    std::fprintf(stderr, "pattern error: %s\n", e.what());
    return kUsage;
  } catch (const dtdd::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
