#pragma once

// Test helpers: hand-built trees with chosen spectral efficiencies, and a
// brute-force grid oracle for tiny inner allocation problems.

#include <dtdd/num_core.hpp>
#include <dtdd/schedule.hpp>
#include <dtdd/topology.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

namespace dtdd::test {

/// Tree from node kinds and a parent map. Links follow the same DL-then-UL
/// order as generated drops; every link gets spectral efficiency rho(tx, rx).
inline Topology hand_topology(const std::vector<NodeKind>& kinds, const std::vector<NodeId>& parents,
                              const std::function<double(NodeId, NodeId)>& rho)
{
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    nodes.push_back(Node{static_cast<NodeId>(i), kinds[i], {}, {}});
  }
  std::vector<Link> links;
  const auto n = nodes.size();
  std::vector<LinkId> down(n, -1), up(n, -1);
  auto add = [&](NodeId tx, NodeId rx, Direction d) {
    Link l;
    l.id = static_cast<LinkId>(links.size());
    l.tx = tx;
    l.rx = rx;
    l.direction = d;
    l.state = channel::LinkState::Los;
    l.budget.spectral_efficiency = rho(tx, rx);
    links.push_back(l);
    return l.id;
  };
  for (std::size_t i = 1; i < n; ++i) {
    if (parents[i] == kNoNode) continue;
    down[i] = add(parents[i], static_cast<NodeId>(i), Direction::Dl);
    up[i] = add(static_cast<NodeId>(i), parents[i], Direction::Ul);
  }
  std::vector<Flow> flows;
  for (std::size_t i = 1; i < n; ++i) {
    if (kinds[i] != NodeKind::Ue || parents[i] == kNoNode) continue;
    std::vector<LinkId> up_path;
    std::vector<NodeId> hops;
    for (NodeId cur = static_cast<NodeId>(i); cur != 0; cur = parents[static_cast<std::size_t>(cur)]) {
      up_path.push_back(up[static_cast<std::size_t>(cur)]);
      hops.push_back(cur);
    }
    std::vector<LinkId> down_path;
    for (auto it = hops.rbegin(); it != hops.rend(); ++it) down_path.push_back(down[static_cast<std::size_t>(*it)]);
    flows.push_back(Flow{static_cast<FlowId>(flows.size()), static_cast<NodeId>(i), Direction::Dl, down_path});
    flows.push_back(Flow{static_cast<FlowId>(flows.size()), static_cast<NodeId>(i), Direction::Ul, up_path});
  }
  return Topology::from_parts(std::move(nodes), parents, std::move(links), std::move(flows), {}, 400.0);
}

struct GridResult
{
  double utility = -std::numeric_limits<double>::infinity();
  std::vector<double> rates; // per flow, 0 for starved
  int live_flows = 0;
};

/// Exhaustive grid over every (node, subframe) bandwidth simplex with `steps`
/// divisions. Only links carrying a live flow receive bandwidth. Requires each
/// such link to carry exactly one live flow, so a flow's rate is the smallest
/// capacity along its path.
inline GridResult grid_oracle(const Topology& topo, const LinkSchedule& ls, double w_max, int steps)
{
  const int n_sf = ls.subframes();
  std::vector<bool> live(topo.flows().size(), true);
  std::map<LinkId, int> carriers;
  for (const auto& f : topo.flows()) {
    for (LinkId l : f.path) {
      if (ls.active_count(l) == 0) live[static_cast<std::size_t>(f.id)] = false;
    }
  }
  for (const auto& f : topo.flows()) {
    if (!live[static_cast<std::size_t>(f.id)]) continue;
    for (LinkId l : f.path) ++carriers[l];
  }
  for (const auto& [l, c] : carriers) {
    if (c != 1) throw std::invalid_argument("grid oracle needs one live flow per link");
  }

  // simplex rows: useful active links grouped by (tx, t)
  std::vector<std::vector<std::pair<LinkId, int>>> rows;
  std::map<std::pair<NodeId, int>, std::size_t> row_of;
  for (int t = 0; t < n_sf; ++t) {
    for (const auto& l : topo.links()) {
      if (!ls.active(l.id, t) || !carriers.count(l.id)) continue;
      auto key = std::make_pair(l.tx, t);
      if (!row_of.count(key)) {
        row_of[key] = rows.size();
        rows.emplace_back();
      }
      rows[row_of[key]].push_back({l.id, t});
    }
  }

  // all compositions of `steps` into k parts
  auto compositions = [steps](std::size_t k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(k, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
      if (i + 1 == k) {
        cur[i] = left;
        out.push_back(cur);
        return;
      }
      for (int v = 0; v <= left; ++v) {
        cur[i] = v;
        rec(i + 1, left - v);
      }
    };
    rec(0, steps);
    return out;
  };
  std::vector<std::vector<std::vector<int>>> choices;
  for (const auto& r : rows) choices.push_back(compositions(r.size()));

  GridResult best;
  for (bool b : live) best.live_flows += b ? 1 : 0;
  std::vector<std::size_t> pick(rows.size(), 0);
  std::vector<double> cap(topo.links().size());
  while (true) {
    std::fill(cap.begin(), cap.end(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& c = choices[r][pick[r]];
      for (std::size_t k = 0; k < rows[r].size(); ++k) {
        const LinkId l = rows[r][k].first;
        cap[static_cast<std::size_t>(l)] +=
          topo.link(l).budget.spectral_efficiency * w_max * static_cast<double>(c[k]) / steps;
      }
    }
    double u = 0.0;
    std::vector<double> rates(topo.flows().size(), 0.0);
    for (const auto& f : topo.flows()) {
      if (!live[static_cast<std::size_t>(f.id)]) continue;
      double r = std::numeric_limits<double>::infinity();
      for (LinkId l : f.path) r = std::min(r, cap[static_cast<std::size_t>(l)]);
      rates[static_cast<std::size_t>(f.id)] = r;
      u += std::log(std::max(r, 1.0));
    }
    if (u > best.utility) {
      best.utility = u;
      best.rates = rates;
    }
    std::size_t i = 0;
    while (i < rows.size() && ++pick[i] == choices[i].size()) pick[i++] = 0;
    if (i == rows.size()) break;
  }
  return best;
}

/// Utility over live flows only, matching the oracle's objective.
inline double live_utility(const Topology& topo, const LinkSchedule& ls, const Allocation& a)
{
  double u = 0.0;
  for (const auto& f : topo.flows()) {
    bool live = true;
    for (LinkId l : f.path) live = live && ls.active_count(l) > 0;
    if (live) u += std::log(std::max(a.flow_rates[static_cast<std::size_t>(f.id)], 1.0));
  }
  return u;
}

} // namespace dtdd::test
