#pragma once

// Monte-Carlo driver: independent seeded drops, each scored under the dynamic
// scheduler, the static LTE sweep and (optionally) exhaustive search.

#include <dtdd/baselines.hpp>
#include <dtdd/config.hpp>
#include <dtdd/metrics.hpp>
#include <dtdd/scheduler.hpp>
#include <dtdd/topology.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace dtdd {

enum class Scheme
{
  Dtdd,
  Static,     // pooled over every static configuration
  StaticBest, // utility-maximizing static configuration
  Brute,
};

inline constexpr std::array<Scheme, 4> kSchemes{Scheme::Dtdd, Scheme::Static, Scheme::StaticBest, Scheme::Brute};

inline std::string_view to_string(Scheme s)
{
  switch (s) {
  case Scheme::Dtdd: return "dtdd";
  case Scheme::Static: return "static";
  case Scheme::StaticBest: return "static_best";
  case Scheme::Brute: return "brute";
  }
  return "?";
}

inline std::optional<Scheme> scheme_from_string(std::string_view s)
{
  for (Scheme k : kSchemes) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct FlowSample
{
  int drop = 0;
  NodeId ue = kNoNode;
  Direction direction = Direction::Dl;
  Scheme scheme = Scheme::Dtdd;
  std::string config; // static configuration name, empty otherwise
  double rate_bps = 0.0;
  double sinr_db = 0.0; // access link
  channel::LinkState link_state = channel::LinkState::Nlos;
};

struct DropResult
{
  int drop = 0;
  bool ok = false;
  std::string error;

  int n_ue = 0;
  int n_los = 0;
  int n_nlos = 0;
  int n_outage = 0;
  std::vector<double> sinr_dl; // non-outage UEs
  std::vector<double> sinr_ul;
  std::vector<FlowSample> samples;
  int starved_flows = 0;

  bool has_dtdd = false;
  double dtdd_utility = 0.0;
  double dtdd_initial_utility = 0.0;
  int inner_calls = 0;
  int evaluations = 0;
  int accepted_moves = 0;
  std::vector<double> accepted_utilities;
  std::string dtdd_schedule;
  std::string trace;

  bool has_static = false;
  int static_configs = 0;
  double static_best_utility = 0.0;
  double static_mean_utility = 0.0;
  std::string static_best_name;

  bool has_brute = false;
  double brute_utility = 0.0;
  std::uint64_t brute_evaluated = 0;
  int brute_solver_calls = 0;
  std::string brute_schedule;

  int half_duplex_violations = 0; // over every schedule evaluated in the drop
  int unconverged_solves = 0;
  double max_kkt_residual = 0.0; // over converged solves
};

struct ExperimentOptions
{
  bool dtdd = true;
  bool static_sweep = true;
  bool brute = false;
  bool trace = false;

  static ExperimentOptions from(const ScenarioConfig& cfg)
  {
    return {cfg.run_dtdd, cfg.run_static, cfg.run_brute, false};
  }
};

struct DirectionalGains
{
  double mean = 0.0;
  double median = 0.0;
  double edge = 0.0;
};

struct MetricsReport
{
  int drops_requested = 0;
  int drops_ok = 0;
  std::vector<std::pair<int, std::string>> failures;

  double frac_los = 0.0;
  double frac_nlos = 0.0;
  double frac_outage = 0.0;

  // scheme -> [DL, UL]
  std::map<Scheme, std::array<RateStats, 2>> rates;
  std::map<Scheme, double> mean_utility;
  std::optional<std::array<DirectionalGains, 2>> gains; // DTDD over pooled static

  double mean_inner_calls = 0.0;
  int max_inner_calls = 0;
  double mean_evaluations = 0.0;
  double mean_accepted_moves = 0.0;

  double mean_brute_evaluated = 0.0;
  double mean_utility_ratio = 0.0; // greedy / brute
  std::vector<double> utility_gaps; // brute - greedy, per successful drop

  int half_duplex_violations = 0;
  int unconverged_solves = 0;
  double max_kkt_residual = 0.0;
  int starved_flows = 0;
};

struct ExperimentResult
{
  std::vector<DropResult> drops;
  MetricsReport report;
};

inline int direction_index(Direction d) { return d == Direction::Dl ? 0 : 1; }

namespace detail {

inline std::string schedule_string(const DuplexSchedule& x)
{
  std::ostringstream os;
  os << x;
  return os.str();
}

inline void add_samples(DropResult& out, const Topology& topo, const Allocation& a, Scheme scheme,
                        const std::string& config, double per_frame)
{
  for (const auto& f : topo.flows()) {
    const NodeId parent = topo.parent(f.ue);
    const auto l = f.direction == Direction::Dl ? topo.link_between(parent, f.ue) : topo.link_between(f.ue, parent);
    FlowSample s;
    s.drop = out.drop;
    s.ue = f.ue;
    s.direction = f.direction;
    s.scheme = scheme;
    s.config = config;
    s.rate_bps = a.flow_rates.at(static_cast<std::size_t>(f.id)) / per_frame;
    s.sinr_db = l ? topo.link(*l).budget.sinr_db : -std::numeric_limits<double>::infinity();
    s.link_state = topo.serving_state(f.ue);
    if (s.rate_bps <= 0.0) ++out.starved_flows;
    out.samples.push_back(std::move(s));
  }
}

inline void note_allocation(DropResult& out, const Allocation& a)
{
  if (a.converged) out.max_kkt_residual = std::max(out.max_kkt_residual, a.kkt_residual);
  else ++out.unconverged_solves;
}

} // namespace detail

/// One drop. Exceptions are captured into the result.
inline DropResult run_drop(const ScenarioConfig& cfg, int index, const ExperimentOptions& opt,
                           const std::vector<StaticConfig>& static_configs)
{
  DropResult out;
  out.drop = index;
  try {
    auto rng = drop_rng(cfg.seed, static_cast<std::uint64_t>(index));
    const Topology topo = build_topology(cfg, rng);
    const double w_max = cfg.channel.rate.w_max_hz;
    const double per_frame = static_cast<double>(cfg.frame_subframes());

    for (const auto& nd : topo.nodes()) {
      if (nd.kind != NodeKind::Ue) continue;
      ++out.n_ue;
      switch (topo.serving_state(nd.id)) {
      case channel::LinkState::Los: ++out.n_los; break;
      case channel::LinkState::Nlos: ++out.n_nlos; break;
      case channel::LinkState::Outage: ++out.n_outage; break;
      }
      if (topo.in_outage(nd.id)) continue;
      const NodeId p = topo.parent(nd.id);
      out.sinr_dl.push_back(topo.link(*topo.link_between(p, nd.id)).budget.sinr_db);
      out.sinr_ul.push_back(topo.link(*topo.link_between(nd.id, p)).budget.sinr_db);
    }

    if (opt.dtdd) {
      const SearchState st = run_dtdd(topo, cfg);
      out.has_dtdd = true;
      out.dtdd_utility = st.utility;
      out.dtdd_initial_utility = st.initial_utility;
      out.inner_calls = st.inner_calls;
      out.evaluations = st.evaluations;
      out.accepted_moves = st.accepted_moves;
      out.accepted_utilities = st.accepted_utilities;
      out.dtdd_schedule = detail::schedule_string(st.schedule);
      out.half_duplex_violations += st.half_duplex_violations;
      out.unconverged_solves += st.unconverged;
      out.max_kkt_residual = std::max(out.max_kkt_residual, st.max_kkt_residual);
      if (opt.trace) {
        std::ostringstream os;
        write_move_trace(st, os);
        out.trace = os.str();
      }
      detail::add_samples(out, topo, st.allocation, Scheme::Dtdd, "", per_frame);
    }

    if (opt.static_sweep) {
      const StaticResult sr = best_static(topo, static_configs, w_max, cfg.solver);
      out.has_static = true;
      out.static_configs = static_cast<int>(static_configs.size());
      out.static_best_utility = sr.utilities[sr.best];
      double sum = 0.0;
      for (double u : sr.utilities) sum += u;
      out.static_mean_utility = sum / static_cast<double>(sr.utilities.size());
      const auto& best = static_configs[sr.best];
      out.static_best_name = best.pattern + "/" + best.mask;
      for (std::size_t i = 0; i < static_configs.size(); ++i) {
        const auto& c = static_configs[i];
        out.half_duplex_violations += half_duplex_violations(derive_link_schedule(c.schedule, topo), topo);
        detail::note_allocation(out, sr.allocations[i]);
        detail::add_samples(out, topo, sr.allocations[i], Scheme::Static, c.pattern + "/" + c.mask, per_frame);
      }
      detail::add_samples(out, topo, sr.best_allocation(), Scheme::StaticBest, out.static_best_name, per_frame);
    }

    if (opt.brute) {
      const BruteForceResult bf = brute_force(topo, cfg.dtdd_subframes, w_max, cfg.solver);
      out.has_brute = true;
      out.brute_utility = bf.utility;
      out.brute_evaluated = bf.evaluated;
      out.brute_solver_calls = bf.solver_calls;
      out.brute_schedule = detail::schedule_string(bf.schedule);
      out.half_duplex_violations += bf.half_duplex_violations;
      detail::note_allocation(out, bf.allocation);
      detail::add_samples(out, topo, bf.allocation, Scheme::Brute, "", per_frame);
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out = DropResult{};
    out.drop = index;
    out.error = e.what();
  }
  return out;
}

inline MetricsReport summarize(const std::vector<DropResult>& drops)
{
  MetricsReport r;
  r.drops_requested = static_cast<int>(drops.size());
  std::map<Scheme, std::array<std::vector<double>, 2>> pooled;
  std::map<Scheme, std::pair<double, int>> util;
  double sum_calls = 0.0;
  double sum_evals = 0.0;
  double sum_accepted = 0.0;
  double sum_brute_eval = 0.0;
  double sum_ratio = 0.0;
  int n_dtdd = 0;
  int n_brute = 0;

  for (const auto& d : drops) {
    if (!d.ok) {
      r.failures.emplace_back(d.drop, d.error);
      continue;
    }
    ++r.drops_ok;
    if (d.n_ue > 0) {
      r.frac_los += static_cast<double>(d.n_los) / d.n_ue;
      r.frac_nlos += static_cast<double>(d.n_nlos) / d.n_ue;
      r.frac_outage += static_cast<double>(d.n_outage) / d.n_ue;
    }
    for (const auto& s : d.samples) pooled[s.scheme][static_cast<std::size_t>(direction_index(s.direction))].push_back(s.rate_bps);
    if (d.has_dtdd) {
      ++n_dtdd;
      sum_calls += d.inner_calls;
      sum_evals += d.evaluations;
      sum_accepted += d.accepted_moves;
      r.max_inner_calls = std::max(r.max_inner_calls, d.inner_calls);
      util[Scheme::Dtdd].first += d.dtdd_utility;
      ++util[Scheme::Dtdd].second;
    }
    if (d.has_static) {
      util[Scheme::Static].first += d.static_mean_utility;
      ++util[Scheme::Static].second;
      util[Scheme::StaticBest].first += d.static_best_utility;
      ++util[Scheme::StaticBest].second;
    }
    if (d.has_brute) {
      ++n_brute;
      sum_brute_eval += static_cast<double>(d.brute_evaluated);
      util[Scheme::Brute].first += d.brute_utility;
      ++util[Scheme::Brute].second;
      if (d.has_dtdd) {
        sum_ratio += d.dtdd_utility / d.brute_utility;
        r.utility_gaps.push_back(d.brute_utility - d.dtdd_utility);
      }
    }
    r.half_duplex_violations += d.half_duplex_violations;
    r.unconverged_solves += d.unconverged_solves;
    r.max_kkt_residual = std::max(r.max_kkt_residual, d.max_kkt_residual);
    r.starved_flows += d.starved_flows;
  }

  if (r.drops_ok > 0) {
    r.frac_los /= r.drops_ok;
    r.frac_nlos /= r.drops_ok;
    r.frac_outage /= r.drops_ok;
  }
  for (auto& [scheme, dirs] : pooled) {
    r.rates[scheme] = {compute_metrics(dirs[0]), compute_metrics(dirs[1])};
  }
  for (auto& [scheme, acc] : util) r.mean_utility[scheme] = acc.first / acc.second;
  if (n_dtdd > 0) {
    r.mean_inner_calls = sum_calls / n_dtdd;
    r.mean_evaluations = sum_evals / n_dtdd;
    r.mean_accepted_moves = sum_accepted / n_dtdd;
  }
  if (n_brute > 0) {
    r.mean_brute_evaluated = sum_brute_eval / n_brute;
    if (!r.utility_gaps.empty()) r.mean_utility_ratio = sum_ratio / static_cast<double>(r.utility_gaps.size());
  }
  if (r.rates.count(Scheme::Dtdd) && r.rates.count(Scheme::Static)) {
    std::array<DirectionalGains, 2> g{};
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& dt = r.rates[Scheme::Dtdd][k];
      const auto& st = r.rates[Scheme::Static][k];
      g[k] = {ratio(dt.mean, st.mean), ratio(dt.median, st.median), ratio(dt.edge, st.edge)};
    }
    r.gains = g;
  }
  return r;
}

inline int worker_count(const ScenarioConfig& cfg)
{
  int n = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(n, 1, std::max(1, cfg.drops));
}

/// All drops of a scenario. Drops run on a worker pool; results are stored by
/// drop index so the output does not depend on scheduling.
inline ExperimentResult run_experiment(const ScenarioConfig& cfg, const ExperimentOptions& opt)
{
  validate(cfg);
  std::vector<StaticConfig> configs;
  if (opt.static_sweep) {
    auto sweep = enumerate_static_configs(cfg.pattern_file, cfg.n_rn, cfg.dtdd_subframes);
    if (sweep.configs.empty()) {
      throw std::runtime_error("no static configuration has " + std::to_string(cfg.dtdd_subframes) +
                               " usable subframes");
    }
    configs = std::move(sweep.configs);
  }

  ExperimentResult res;
  res.drops.resize(static_cast<std::size_t>(cfg.drops));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < cfg.drops; i = next++) {
      res.drops[static_cast<std::size_t>(i)] = run_drop(cfg, i, opt, configs);
    }
  };
  const int n_workers = worker_count(cfg);
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
  }
  res.report = summarize(res.drops);
  return res;
}

inline ExperimentResult run_experiment(const ScenarioConfig& cfg)
{
  return run_experiment(cfg, ExperimentOptions::from(cfg));
}

} // namespace dtdd
