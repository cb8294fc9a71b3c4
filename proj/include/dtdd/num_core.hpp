#pragma once

// Inner network-utility problem for a fixed duplex schedule:
//
//   maximize   sum_f log R_f
//   subject to sum_{l in L(n)} W_l^t <= W_max            per TX node, subframe
//              sum_{f in F(l)} R_{f,l}^t <= rho_l W_l^t    per link, subframe
//              R_f <= sum_t R_{f,l}^t                      per flow, path link
//              W_l^t = 0 when the link is inactive in t
//
// With capacity linear in bandwidth the per-subframe flow rates can always be
// rebalanced, so the solver works on the equivalent aggregated form
// sum_{f in F(l)} R_f <= rho_l sum_t W_l^t and reconstructs R_{f,l}^t
// proportionally to W_l^t afterwards. Subframes with identical link activity
// are merged into one block with a multiplicity (an averaged optimum exists
// by concavity), which keeps the Newton systems small.
//
// The solver is a primal-dual interior-point method with dense Newton steps.
// Every Allocation carries the dual multipliers it was certified with.

#include <dtdd/schedule.hpp>
#include <dtdd/topology.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace dtdd {

struct BandwidthVar
{
  LinkId link = -1;
  int t = 0;
};

struct LinkRateVar
{
  FlowId flow = -1;
  LinkId link = -1;
  int t = 0;
};

struct BandwidthRow
{
  NodeId node = kNoNode;
  int t = 0;
  std::vector<std::size_t> vars; // indices into Problem::bandwidth_vars
};

struct CapacityRow
{
  LinkId link = -1;
  int t = 0;
  std::size_t bandwidth_var = 0;
  std::vector<std::size_t> rate_vars; // indices into Problem::link_rate_vars
};

struct FlowRow
{
  FlowId flow = -1;
  LinkId link = -1;
  std::vector<std::size_t> rate_vars;
};

/// Concave program for one link schedule, in the per-subframe form.
struct Problem
{
  int n_subframes = 0;
  double w_max = 0.0; // Hz
  std::vector<double> rho;                    // per link, bits/s/Hz
  std::vector<LinkId> link_tx;                // per link
  std::vector<std::vector<LinkId>> flow_paths;
  std::vector<std::vector<FlowId>> link_flows;
  LinkSchedule schedule;

  std::vector<BandwidthVar> bandwidth_vars;
  std::vector<LinkRateVar> link_rate_vars;
  std::vector<BandwidthRow> bandwidth_rows;
  std::vector<CapacityRow> capacity_rows;
  std::vector<FlowRow> flow_rows;

  std::vector<bool> live;        // per flow: every path link active somewhere
  std::vector<FlowId> starved;   // flows with zero end-to-end capacity

  std::size_t n_flows() const { return flow_paths.size(); }
  std::size_t n_links() const { return rho.size(); }
  std::size_t n_variables() const { return bandwidth_vars.size() + link_rate_vars.size() + n_flows(); }
  std::size_t n_constraints() const { return bandwidth_rows.size() + capacity_rows.size() + flow_rows.size(); }
};

inline Problem build_problem(const Topology& topo, const LinkSchedule& x, double w_max)
{
  if (x.links() != topo.links().size()) {
    throw std::invalid_argument("link schedule does not match topology");
  }
  Problem p;
  p.n_subframes = x.subframes();
  p.w_max = w_max;
  p.schedule = x;
  for (const auto& l : topo.links()) {
    p.rho.push_back(l.budget.spectral_efficiency);
    p.link_tx.push_back(l.tx);
    p.link_flows.push_back(topo.flows_on(l.id));
  }
  for (const auto& f : topo.flows()) {
    p.flow_paths.push_back(f.path);
    bool live = true;
    for (LinkId l : f.path) live = live && x.active_count(l) > 0;
    p.live.push_back(live);
    if (!live) p.starved.push_back(f.id);
  }

  std::map<std::pair<LinkId, int>, std::size_t> wvar;
  for (int t = 0; t < p.n_subframes; ++t) {
    std::map<NodeId, std::vector<std::size_t>> per_node;
    for (const auto& l : topo.links()) {
      if (!x.active(l.id, t)) continue;
      const std::size_t v = p.bandwidth_vars.size();
      p.bandwidth_vars.push_back({l.id, t});
      wvar[{l.id, t}] = v;
      per_node[l.tx].push_back(v);
    }
    for (auto& [node, vars] : per_node) p.bandwidth_rows.push_back({node, t, std::move(vars)});
  }

  std::map<std::tuple<FlowId, LinkId, int>, std::size_t> rvar;
  for (const auto& f : topo.flows()) {
    for (LinkId l : f.path) {
      FlowRow row{f.id, l, {}};
      for (int t = 0; t < p.n_subframes; ++t) {
        if (!x.active(l, t)) continue;
        const std::size_t v = p.link_rate_vars.size();
        p.link_rate_vars.push_back({f.id, l, t});
        rvar[{f.id, l, t}] = v;
        row.rate_vars.push_back(v);
      }
      p.flow_rows.push_back(std::move(row));
    }
  }
  for (const auto& l : topo.links()) {
    for (int t = 0; t < p.n_subframes; ++t) {
      if (!x.active(l.id, t)) continue;
      CapacityRow row{l.id, t, wvar.at({l.id, t}), {}};
      for (FlowId f : topo.flows_on(l.id)) row.rate_vars.push_back(rvar.at({f, l.id, t}));
      p.capacity_rows.push_back(std::move(row));
    }
  }
  return p;
}

/// Plain-text dump: one `var` line per decision variable and one `row` line
/// per linear constraint; see README for the grammar.
inline void dump_problem(const Problem& p, std::ostream& os)
{
  os << "# dtdd inner problem\n";
  os << "subframes " << p.n_subframes << "\n";
  os << "w_max_hz " << p.w_max << "\n";
  os << "flows " << p.n_flows() << "\n";
  os << "starved";
  for (FlowId f : p.starved) os << ' ' << f;
  os << "\n";
  os << "objective maximize sum_f log(R[f])\n";
  for (const auto& v : p.bandwidth_vars) os << "var W[l" << v.link << ",t" << v.t << "] >= 0\n";
  for (const auto& v : p.link_rate_vars) os << "var R[f" << v.flow << ",l" << v.link << ",t" << v.t << "] >= 0\n";
  for (std::size_t f = 0; f < p.n_flows(); ++f) os << "var R[f" << f << "] >= 0\n";
  auto w = [&](std::size_t i) {
    return "W[l" + std::to_string(p.bandwidth_vars[i].link) + ",t" + std::to_string(p.bandwidth_vars[i].t) + "]";
  };
  auto r = [&](std::size_t i) {
    const auto& v = p.link_rate_vars[i];
    return "R[f" + std::to_string(v.flow) + ",l" + std::to_string(v.link) + ",t" + std::to_string(v.t) + "]";
  };
  for (const auto& row : p.bandwidth_rows) {
    os << "row bw n" << row.node << " t" << row.t << " :";
    for (std::size_t k = 0; k < row.vars.size(); ++k) os << (k ? " + " : " ") << w(row.vars[k]);
    os << " <= " << p.w_max << "\n";
  }
  for (const auto& row : p.capacity_rows) {
    os << "row cap l" << row.link << " t" << row.t << " :";
    for (std::size_t k = 0; k < row.rate_vars.size(); ++k) os << (k ? " + " : " ") << r(row.rate_vars[k]);
    os << " - " << p.rho[static_cast<std::size_t>(row.link)] << " " << w(row.bandwidth_var) << " <= 0\n";
  }
  for (const auto& row : p.flow_rows) {
    os << "row flow f" << row.flow << " l" << row.link << " : R[f" << row.flow << "]";
    for (std::size_t v : row.rate_vars) os << " - " << r(v);
    os << " <= 0\n";
  }
}

/// Result of one inner solve, in physical units (Hz, bits/s).
struct Allocation
{
  int n_subframes = 0;
  std::size_t n_links = 0;
  std::size_t n_flows = 0;
  std::vector<double> bandwidth;  // [link][t]
  std::vector<double> link_rates; // [flow][link][t]
  std::vector<double> flow_rates; // [flow]; 0 for starved flows
  double utility = 0.0;

  // Certificate: capacity duals per link (1/(bit/s)) for the aggregated
  // capacity row, bandwidth duals per (node, t) (1/Hz).
  std::vector<double> capacity_dual;
  std::vector<double> bandwidth_dual; // [node][t], sized n_nodes * n_subframes

  std::vector<FlowId> starved;
  bool converged = false;
  int iterations = 0;
  double kkt_residual = std::numeric_limits<double>::infinity();

  double& w(LinkId l, int t) { return bandwidth[static_cast<std::size_t>(l) * n_subframes + t]; }
  double w(LinkId l, int t) const { return bandwidth[static_cast<std::size_t>(l) * n_subframes + t]; }
  double& r(FlowId f, LinkId l, int t)
  {
    return link_rates[(static_cast<std::size_t>(f) * n_links + static_cast<std::size_t>(l)) * n_subframes + t];
  }
  double r(FlowId f, LinkId l, int t) const
  {
    return link_rates[(static_cast<std::size_t>(f) * n_links + static_cast<std::size_t>(l)) * n_subframes + t];
  }
  double& nu(NodeId n, int t) { return bandwidth_dual[static_cast<std::size_t>(n) * n_subframes + t]; }
  double nu(NodeId n, int t) const { return bandwidth_dual[static_cast<std::size_t>(n) * n_subframes + t]; }
};

/// Proportional-fair utility, natural log, rates floored at `rate_floor`.
inline double utility(const std::vector<double>& rates, double rate_floor)
{
  double u = 0.0;
  for (double r : rates) u += std::log(std::max(r, rate_floor));
  return u;
}

namespace detail {

inline std::size_t max_node_id(const Problem& p)
{
  std::size_t m = 0;
  for (LinkId tx : p.link_tx) m = std::max(m, static_cast<std::size_t>(tx));
  return m + 1;
}

inline Allocation empty_allocation(const Problem& p)
{
  Allocation a;
  a.n_subframes = p.n_subframes;
  a.n_links = p.n_links();
  a.n_flows = p.n_flows();
  a.bandwidth.assign(a.n_links * static_cast<std::size_t>(a.n_subframes), 0.0);
  a.link_rates.assign(a.n_flows * a.n_links * static_cast<std::size_t>(a.n_subframes), 0.0);
  a.flow_rates.assign(a.n_flows, 0.0);
  a.capacity_dual.assign(a.n_links, 0.0);
  a.bandwidth_dual.assign(max_node_id(p) * static_cast<std::size_t>(a.n_subframes), 0.0);
  a.starved = p.starved;
  return a;
}

} // namespace detail

/// Checks the allocation against every constraint with relative slack `rel`.
/// Returns a description of the first violation, or nullopt when feasible.
inline std::optional<std::string> check_feasibility(const Problem& p, const Allocation& a, double rel = 1e-9)
{
  if (a.n_links != p.n_links() || a.n_flows != p.n_flows() || a.n_subframes != p.n_subframes) {
    return "allocation shape does not match problem";
  }
  const double wtol = rel * p.w_max;
  for (std::size_t l = 0; l < p.n_links(); ++l) {
    for (int t = 0; t < p.n_subframes; ++t) {
      const double w = a.w(static_cast<LinkId>(l), t);
      if (w < -wtol) return "negative bandwidth on link " + std::to_string(l);
      if (!p.schedule.active(static_cast<LinkId>(l), t) && std::abs(w) > wtol) {
        return "bandwidth on inactive link " + std::to_string(l) + " t" + std::to_string(t);
      }
    }
  }
  for (const auto& row : p.bandwidth_rows) {
    double sum = 0.0;
    for (std::size_t v : row.vars) sum += a.w(p.bandwidth_vars[v].link, row.t);
    if (sum > p.w_max * (1.0 + rel)) return "bandwidth cap exceeded at node " + std::to_string(row.node);
  }
  for (std::size_t l = 0; l < p.n_links(); ++l) {
    for (int t = 0; t < p.n_subframes; ++t) {
      double load = 0.0;
      for (FlowId f : p.link_flows[l]) {
        const double r = a.r(f, static_cast<LinkId>(l), t);
        if (r < -rel * std::max(1.0, std::abs(r))) return "negative link rate";
        load += r;
      }
      const double cap = p.rho[l] * a.w(static_cast<LinkId>(l), t);
      if (load > cap * (1.0 + rel) + rel) {
        return "capacity exceeded on link " + std::to_string(l) + " t" + std::to_string(t);
      }
    }
  }
  for (std::size_t f = 0; f < p.n_flows(); ++f) {
    const double rf = a.flow_rates[f];
    if (rf < 0.0) return "negative flow rate";
    for (LinkId l : p.flow_paths[f]) {
      double carried = 0.0;
      for (int t = 0; t < p.n_subframes; ++t) carried += a.r(static_cast<FlowId>(f), l, t);
      if (rf > carried * (1.0 + rel) + rel) return "flow " + std::to_string(f) + " exceeds path link capacity";
    }
  }
  return std::nullopt;
}

/// Normalized KKT residual of the aggregated program using the multipliers
/// stored in `a`. Infinite when the allocation fails the feasibility check.
/// Starved flows are excluded (they hold no decision variables).
inline double kkt_residual(const Problem& p, const Allocation& a)
{
  if (check_feasibility(p, a)) return std::numeric_limits<double>::infinity();
  double res = 0.0;
  double max_rate = 0.0;
  for (double r : a.flow_rates) max_rate = std::max(max_rate, r);

  std::vector<bool> live_link(p.n_links(), false);
  for (std::size_t f = 0; f < p.n_flows(); ++f) {
    if (!p.live[f]) continue;
    double price = 0.0;
    for (LinkId l : p.flow_paths[f]) {
      price += a.capacity_dual[static_cast<std::size_t>(l)];
      live_link[static_cast<std::size_t>(l)] = true;
    }
    res = std::max(res, std::abs(1.0 - a.flow_rates[f] * price)); // stationarity in R_f
  }
  for (std::size_t l = 0; l < p.n_links(); ++l) {
    const double lam = a.capacity_dual[l];
    if (lam < 0.0) res = std::max(res, -lam * max_rate);
    if (!live_link[l]) continue;
    double cap = 0.0;
    for (int t = 0; t < p.n_subframes; ++t) cap += p.rho[l] * a.w(static_cast<LinkId>(l), t);
    double load = 0.0;
    for (FlowId f : p.link_flows[l]) load += a.flow_rates[static_cast<std::size_t>(f)];
    res = std::max(res, lam * std::max(0.0, cap - load)); // complementary slackness
    for (int t = 0; t < p.n_subframes; ++t) {
      if (!p.schedule.active(static_cast<LinkId>(l), t)) continue;
      const double reduced = a.nu(p.link_tx[l], t) - lam * p.rho[l]; // multiplier of W >= 0
      res = std::max(res, std::max(0.0, -reduced) * p.w_max);
      res = std::max(res, std::max(0.0, reduced) * a.w(static_cast<LinkId>(l), t));
    }
  }
  for (const auto& row : p.bandwidth_rows) {
    const double nu = a.nu(row.node, row.t);
    if (nu < 0.0) res = std::max(res, -nu * p.w_max);
    double sum = 0.0;
    for (std::size_t v : row.vars) sum += a.w(p.bandwidth_vars[v].link, row.t);
    res = std::max(res, nu * std::max(0.0, p.w_max - sum));
  }
  return res;
}

namespace detail {

// Aggregated program in normalized units: bandwidth as a fraction of W_max,
// rates in units of W_max bits/s.
struct Reduced
{
  struct Group
  {
    std::vector<LinkId> links; // active live links
    std::vector<int> subframes;
  };
  struct WVar
  {
    LinkId link;
    std::size_t group;
  };
  struct BwRow
  {
    NodeId node;
    std::size_t group;
    std::vector<std::size_t> vars; // W var indices
  };
  struct CapRow
  {
    LinkId link;
    std::vector<std::size_t> flows; // reduced flow indices
    std::vector<std::size_t> vars;  // W var indices
  };

  std::vector<FlowId> flows; // live flows
  std::vector<Group> groups;
  std::vector<WVar> wvars;
  std::vector<BwRow> bw_rows;
  std::vector<CapRow> cap_rows;
  std::vector<std::vector<std::size_t>> flow_caps; // cap rows per reduced flow
  std::vector<double> rho_m; // rho * multiplicity per W var

  std::size_t n_r() const { return flows.size(); }
  std::size_t n() const { return flows.size() + wvars.size(); }
  std::size_t n_ineq() const { return cap_rows.size() + bw_rows.size() + wvars.size(); }
};

inline Reduced reduce(const Problem& p)
{
  Reduced red;
  std::vector<bool> live_link(p.n_links(), false);
  std::vector<long> flow_index(p.n_flows(), -1);
  for (std::size_t f = 0; f < p.n_flows(); ++f) {
    if (!p.live[f]) continue;
    flow_index[f] = static_cast<long>(red.flows.size());
    red.flows.push_back(static_cast<FlowId>(f));
    for (LinkId l : p.flow_paths[f]) live_link[static_cast<std::size_t>(l)] = true;
  }

  std::map<std::vector<LinkId>, std::vector<int>> by_key; // sorted => permutation invariant
  for (int t = 0; t < p.n_subframes; ++t) {
    std::vector<LinkId> key;
    for (std::size_t l = 0; l < p.n_links(); ++l) {
      if (live_link[l] && p.schedule.active(static_cast<LinkId>(l), t)) key.push_back(static_cast<LinkId>(l));
    }
    if (!key.empty()) by_key[key].push_back(t);
  }
  std::vector<long> cap_of_link(p.n_links(), -1);
  for (std::size_t l = 0; l < p.n_links(); ++l) {
    if (!live_link[l]) continue;
    cap_of_link[l] = static_cast<long>(red.cap_rows.size());
    Reduced::CapRow row{static_cast<LinkId>(l), {}, {}};
    for (FlowId f : p.link_flows[l]) {
      if (flow_index[static_cast<std::size_t>(f)] >= 0) row.flows.push_back(static_cast<std::size_t>(flow_index[static_cast<std::size_t>(f)]));
    }
    red.cap_rows.push_back(std::move(row));
  }
  for (auto& [key, subframes] : by_key) {
    const std::size_t g = red.groups.size();
    red.groups.push_back({key, subframes});
    std::map<NodeId, std::vector<std::size_t>> per_node;
    for (LinkId l : key) {
      const std::size_t v = red.wvars.size();
      red.wvars.push_back({l, g});
      red.rho_m.push_back(p.rho[static_cast<std::size_t>(l)] * static_cast<double>(subframes.size()));
      per_node[p.link_tx[static_cast<std::size_t>(l)]].push_back(v);
      red.cap_rows[static_cast<std::size_t>(cap_of_link[static_cast<std::size_t>(l)])].vars.push_back(v);
    }
    for (auto& [node, vars] : per_node) red.bw_rows.push_back({node, g, std::move(vars)});
  }
  red.flow_caps.assign(red.flows.size(), {});
  for (std::size_t c = 0; c < red.cap_rows.size(); ++c) {
    for (std::size_t f : red.cap_rows[c].flows) red.flow_caps[f].push_back(c);
  }
  return red;
}

// Inequalities G z <= h in normalized units, stored sparsely by row:
// capacity rows, bandwidth rows, then one -w <= 0 row per bandwidth variable.
struct SparseRows
{
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::vector<double> h;
};

inline SparseRows inequalities(const Reduced& red)
{
  SparseRows g;
  const std::size_t nr = red.n_r();
  for (const auto& row : red.cap_rows) {
    std::vector<std::pair<std::size_t, double>> a;
    for (std::size_t f : row.flows) a.emplace_back(f, 1.0);
    for (std::size_t w : row.vars) a.emplace_back(nr + w, -red.rho_m[w]);
    g.rows.push_back(std::move(a));
    g.h.push_back(0.0);
  }
  for (const auto& row : red.bw_rows) {
    std::vector<std::pair<std::size_t, double>> a;
    for (std::size_t w : row.vars) a.emplace_back(nr + w, 1.0);
    g.rows.push_back(std::move(a));
    g.h.push_back(1.0);
  }
  for (std::size_t w = 0; w < red.wvars.size(); ++w) {
    g.rows.push_back({{nr + w, -1.0}});
    g.h.push_back(0.0);
  }
  return g;
}

} // namespace detail

/// Primal-dual interior-point solve of the aggregated program. The centering
/// weight comes from an affine predictor step. Stops once the scaled dual
/// residual and the complementarity gap are two orders below
/// `settings.tolerance`, or when progress stalls at round-off; the best iterate
/// is returned and `converged` reflects the final KKT residual.
inline Allocation solve(const Problem& p, const SolverSettings& settings)
{
  using Eigen::Index;
  using Eigen::VectorXd;
  Allocation a = detail::empty_allocation(p);
  const detail::Reduced red = detail::reduce(p);
  const std::size_t nr = red.n_r();
  const std::size_t n = red.n();

  if (nr == 0) {
    a.utility = utility(a.flow_rates, settings.rate_floor);
    a.converged = true;
    a.kkt_residual = 0.0;
    return a;
  }

  const detail::SparseRows G = detail::inequalities(red);
  const std::size_t m = G.rows.size();

  // strictly feasible start
  VectorXd z(static_cast<Index>(n));
  for (const auto& row : red.bw_rows) {
    for (std::size_t w : row.vars) z[static_cast<Index>(nr + w)] = 0.5 / static_cast<double>(row.vars.size());
  }
  std::vector<double> share(red.cap_rows.size(), 0.0);
  for (std::size_t c = 0; c < red.cap_rows.size(); ++c) {
    for (std::size_t w : red.cap_rows[c].vars) share[c] += red.rho_m[w] * z[static_cast<Index>(nr + w)];
    share[c] /= static_cast<double>(red.cap_rows[c].flows.size());
  }
  for (std::size_t f = 0; f < nr; ++f) {
    double s = std::numeric_limits<double>::infinity();
    for (std::size_t c : red.flow_caps[f]) s = std::min(s, share[c]);
    z[static_cast<Index>(f)] = 0.5 * s;
  }

  auto times = [&](const VectorXd& x) { // G x
    VectorXd out(static_cast<Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      double v = 0.0;
      for (const auto& [j, c] : G.rows[i]) v += c * x[static_cast<Index>(j)];
      out[static_cast<Index>(i)] = v;
    }
    return out;
  };
  auto times_t = [&](const VectorXd& y) { // G^T y
    VectorXd out = VectorXd::Zero(static_cast<Index>(n));
    for (std::size_t i = 0; i < m; ++i) {
      for (const auto& [j, c] : G.rows[i]) out[static_cast<Index>(j)] += c * y[static_cast<Index>(i)];
    }
    return out;
  };

  const VectorXd h = Eigen::Map<const VectorXd>(G.h.data(), static_cast<Index>(m));
  VectorXd s = h - times(z);
  VectorXd lam = s.cwiseInverse(); // mu = 1 on the initial point
  const double target = 1e-2 * settings.tolerance;

  auto dual_residual = [&](const VectorXd& zz, const VectorXd& ll) {
    VectorXd rd = times_t(ll);
    for (std::size_t f = 0; f < nr; ++f) rd[static_cast<Index>(f)] -= 1.0 / zz[static_cast<Index>(f)];
    return rd;
  };
  auto scaled_norm = [&](const VectorXd& rd, const VectorXd& zz) {
    double v = 0.0;
    for (std::size_t f = 0; f < nr; ++f) v = std::max(v, std::abs(rd[static_cast<Index>(f)] * zz[static_cast<Index>(f)]));
    for (std::size_t i = nr; i < n; ++i) v = std::max(v, std::abs(rd[static_cast<Index>(i)]));
    return v;
  };

  Eigen::MatrixXd K(static_cast<Index>(n), static_cast<Index>(n));
  int iterations = 0;
  VectorXd best_z = z;
  VectorXd best_lam = lam;
  double best_merit = std::numeric_limits<double>::infinity();
  int since_best = 0;
  while (iterations < settings.max_iterations) {
    const VectorXd rd = dual_residual(z, lam);
    const VectorXd rp = times(z) + s - h;
    const double mu = s.dot(lam) / static_cast<double>(m);
    const double merit = std::max({mu, scaled_norm(rd, z), rp.lpNorm<Eigen::Infinity>()});
    if (merit < best_merit) {
      best_merit = merit;
      best_z = z;
      best_lam = lam;
      since_best = 0;
    } else if (++since_best >= 8 && best_merit < 1e3 * target) {
      break; // stalled at the round-off floor
    }
    if (merit <= target) break;
    ++iterations;

    // K = hess f + G^T diag(lam / s) G
    K.setZero();
    for (std::size_t f = 0; f < nr; ++f) {
      const double r = z[static_cast<Index>(f)];
      K(static_cast<Index>(f), static_cast<Index>(f)) += 1.0 / (r * r);
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double d = lam[static_cast<Index>(i)] / s[static_cast<Index>(i)];
      for (const auto& [j, cj] : G.rows[i]) {
        for (const auto& [k, ck] : G.rows[i]) K(static_cast<Index>(j), static_cast<Index>(k)) += d * cj * ck;
      }
    }
    // symmetric Jacobi scaling; rates can differ by many orders of magnitude
    const VectorXd dscale = K.diagonal().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd Ks = dscale.asDiagonal() * K * dscale.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(Ks);
    const bool use_llt = llt.info() == Eigen::Success;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
    if (!use_llt) ldlt.compute(Ks);
    auto solve_k = [&](const VectorXd& rhs) -> VectorXd {
      auto inner = [&](const VectorXd& b) -> VectorXd {
        const VectorXd bs = dscale.cwiseProduct(b);
        return dscale.cwiseProduct(use_llt ? VectorXd(llt.solve(bs)) : VectorXd(ldlt.solve(bs)));
      };
      VectorXd x = inner(rhs);
      for (int refine = 0; refine < 2; ++refine) x += inner(rhs - K * x);
      return x;
    };

    // Newton direction for a given complementarity residual rc = lam.*s - target
    auto direction = [&](const VectorXd& rc, VectorXd& dz, VectorXd& ds, VectorXd& dl) {
      const VectorXd t = (lam.cwiseProduct(rp) - rc).cwiseQuotient(s);
      dz = solve_k(-rd - times_t(t));
      ds = -rp - times(dz);
      dl = (-rc - lam.cwiseProduct(ds)).cwiseQuotient(s);
    };
    auto max_step = [&](const VectorXd& dz, const VectorXd& ds, const VectorXd& dl) {
      double step = 1.0;
      for (Index i = 0; i < static_cast<Index>(m); ++i) {
        if (ds[i] < 0.0) step = std::min(step, -s[i] / ds[i]);
        if (dl[i] < 0.0) step = std::min(step, -lam[i] / dl[i]);
      }
      for (std::size_t f = 0; f < nr; ++f) {
        const auto i = static_cast<Index>(f);
        if (dz[i] < 0.0) step = std::min(step, -z[i] / dz[i]);
      }
      return step;
    };

    VectorXd dz_aff, ds_aff, dl_aff;
    direction(lam.cwiseProduct(s), dz_aff, ds_aff, dl_aff);
    const double alpha_aff = max_step(dz_aff, ds_aff, dl_aff);
    const double mu_aff = (s + alpha_aff * ds_aff).dot(lam + alpha_aff * dl_aff) / static_cast<double>(m);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    VectorXd dz, ds, dl;
    const VectorXd rc = lam.cwiseProduct(s) - VectorXd::Constant(static_cast<Index>(m), std::max(sigma * mu, 0.1 * target));
    direction(rc, dz, ds, dl);
    const double alpha = std::min(1.0, 0.99 * max_step(dz, ds, dl));

    const VectorXd z_next = z + alpha * dz;
    const VectorXd s_next = s + alpha * ds;
    const VectorXd l_next = lam + alpha * dl;
    if (!z_next.allFinite() || !s_next.allFinite() || !l_next.allFinite()) break;
    z = z_next;
    s = s_next;
    lam = l_next;
  }

  z = best_z;
  lam = best_lam;

  // expand to physical units
  const double wm = p.w_max;
  for (std::size_t f = 0; f < nr; ++f) a.flow_rates[static_cast<std::size_t>(red.flows[f])] = z[static_cast<Index>(f)] * wm;
  for (std::size_t w = 0; w < red.wvars.size(); ++w) {
    const auto& v = red.wvars[w];
    for (int t : red.groups[v.group].subframes) a.w(v.link, t) = std::max(0.0, z[static_cast<Index>(nr + w)]) * wm;
  }
  for (std::size_t c = 0; c < red.cap_rows.size(); ++c) {
    const auto& row = red.cap_rows[c];
    a.capacity_dual[static_cast<std::size_t>(row.link)] = lam[static_cast<Index>(c)] / wm;
    double total_w = 0.0;
    for (int t = 0; t < p.n_subframes; ++t) total_w += a.w(row.link, t);
    for (std::size_t rf : row.flows) {
      const FlowId f = red.flows[rf];
      for (int t = 0; t < p.n_subframes; ++t) {
        a.r(f, row.link, t) = a.flow_rates[static_cast<std::size_t>(f)] * (a.w(row.link, t) / total_w);
      }
    }
  }
  const std::size_t bw0 = red.cap_rows.size();
  for (std::size_t b = 0; b < red.bw_rows.size(); ++b) {
    const auto& row = red.bw_rows[b];
    const auto& grp = red.groups[row.group];
    const double nu = lam[static_cast<Index>(bw0 + b)] / wm / static_cast<double>(grp.subframes.size());
    for (int t : grp.subframes) a.nu(row.node, t) = nu;
  }
  a.iterations = iterations;
  a.utility = utility(a.flow_rates, settings.rate_floor);
  a.kkt_residual = kkt_residual(p, a);
  a.converged = a.kkt_residual <= settings.tolerance;
  return a;
}

/// Convenience: schedule -> link schedule -> problem -> allocation.
inline Allocation solve_schedule(const Topology& topo, const DuplexSchedule& x, double w_max,
                                 const SolverSettings& settings)
{
  return solve(build_problem(topo, derive_link_schedule(x, topo), w_max), settings);
}

} // namespace dtdd
