#pragma once

// Random drops of one BS, relay nodes and UEs on a wrap-around square,
// least-loss UE association, and the resulting two-level routing tree with
// its DL/UL links and flows.

#include <dtdd/channel.hpp>
#include <dtdd/config.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dtdd {

using NodeId = int;
using LinkId = int;
using FlowId = int;

constexpr NodeId kNoNode = -1;

struct Position
{
  double x = 0.0; // m
  double y = 0.0; // m
};

enum class NodeKind
{
  Bs,
  Rn,
  Ue
};

inline std::string_view to_string(NodeKind k)
{
  switch (k) {
  case NodeKind::Bs: return "BS";
  case NodeKind::Rn: return "RN";
  case NodeKind::Ue: return "UE";
  }
  return "?";
}

enum class Direction
{
  Dl,
  Ul
};

inline std::string_view to_string(Direction d) { return d == Direction::Dl ? "DL" : "UL"; }

struct Node
{
  NodeId id = kNoNode;
  NodeKind kind = NodeKind::Ue;
  Position position{};
  channel::RadioConfig radio{};
};

struct Link
{
  LinkId id = -1;
  NodeId tx = kNoNode;
  NodeId rx = kNoNode;
  Direction direction = Direction::Dl;
  channel::LinkState state = channel::LinkState::Nlos;
  channel::LinkBudget budget{};
};

struct Flow
{
  FlowId id = -1;
  NodeId ue = kNoNode;
  Direction direction = Direction::Dl;
  std::vector<LinkId> path; // ordered from source to sink
};

/// Large-scale channel between two nodes, frozen for the drop. Reciprocal.
struct PairChannel
{
  channel::LinkState state = channel::LinkState::Nlos;
  double shadowing_db = 0.0;
  double path_loss_db = std::numeric_limits<double>::infinity(); // inf in outage
};

class TopologyError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline double wrap_distance(Position a, Position b, double side)
{
  auto axis = [side](double u, double v) {
    const double d = std::abs(u - v);
    return std::min(d, side - d);
  };
  return std::hypot(axis(a.x, b.x), axis(a.y, b.y));
}

/// Immutable routing tree. Node ids are dense: the BS is 0, relays follow,
/// then UEs. Infrastructure (BS and RN) nodes therefore occupy ids
/// [0, n_infrastructure()).
class Topology
{
public:
  Topology() = default;

  /// Build from explicit parts; links and flows are validated against the
  /// parent map. `pairs` may be empty (no interference model available).
  static Topology from_parts(std::vector<Node> nodes, std::vector<NodeId> parents, std::vector<Link> links,
                             std::vector<Flow> flows, std::vector<PairChannel> pairs, double area_side)
  {
    Topology t;
    t.nodes_ = std::move(nodes);
    t.parents_ = std::move(parents);
    t.links_ = std::move(links);
    t.flows_ = std::move(flows);
    t.pairs_ = std::move(pairs);
    t.area_side_ = area_side;
    t.index();
    return t;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Flow>& flows() const { return flows_; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const Link& link(LinkId id) const { return links_.at(static_cast<std::size_t>(id)); }
  const Flow& flow(FlowId id) const { return flows_.at(static_cast<std::size_t>(id)); }
  double area_side() const { return area_side_; }

  std::size_t n_nodes() const { return nodes_.size(); }
  int n_infrastructure() const { return n_infra_; }
  int n_relays() const { return n_infra_ - 1; }
  bool is_infrastructure(NodeId id) const { return id >= 0 && id < n_infra_; }

  NodeId parent(NodeId id) const { return parents_.at(static_cast<std::size_t>(id)); }
  const std::vector<NodeId>& children(NodeId id) const { return children_.at(static_cast<std::size_t>(id)); }
  std::vector<NodeId> relay_children(NodeId id) const { return children_of_kind(id, NodeKind::Rn); }
  std::vector<NodeId> ue_children(NodeId id) const { return children_of_kind(id, NodeKind::Ue); }

  /// UEs without a parent are in outage and own no flows.
  bool in_outage(NodeId ue) const { return node(ue).kind == NodeKind::Ue && parent(ue) == kNoNode; }

  std::optional<LinkId> link_between(NodeId tx, NodeId rx) const
  {
    for (const auto& l : links_) {
      if (l.tx == tx && l.rx == rx) return l.id;
    }
    return std::nullopt;
  }

  const std::vector<FlowId>& flows_on(LinkId l) const { return flows_on_.at(static_cast<std::size_t>(l)); }

  bool has_pair_channels() const { return !pairs_.empty(); }
  const PairChannel& pair(NodeId a, NodeId b) const
  {
    return pairs_.at(static_cast<std::size_t>(a) * nodes_.size() + static_cast<std::size_t>(b));
  }
  const std::vector<PairChannel>& pair_channels() const { return pairs_; }
  const std::vector<NodeId>& parents() const { return parents_; }

  /// Link state of a UE's serving link; Outage if unassociated.
  channel::LinkState serving_state(NodeId ue) const
  {
    if (in_outage(ue)) return channel::LinkState::Outage;
    return link(*link_between(parent(ue), ue)).state;
  }

private:
  std::vector<NodeId> children_of_kind(NodeId id, NodeKind kind) const
  {
    std::vector<NodeId> out;
    for (NodeId c : children(id)) {
      if (node(c).kind == kind) out.push_back(c);
    }
    return out;
  }

  void index()
  {
    const auto n = nodes_.size();
    if (parents_.size() != n) throw TopologyError("parent map size mismatch");
    if (!pairs_.empty() && pairs_.size() != n * n) throw TopologyError("pair channel matrix size mismatch");
    n_infra_ = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nodes_[i].id != static_cast<NodeId>(i)) throw TopologyError("node ids must be dense and ordered");
      const bool infra = nodes_[i].kind != NodeKind::Ue;
      if (infra && n_infra_ != static_cast<int>(i)) throw TopologyError("BS/RN nodes must precede UEs");
      if (infra) ++n_infra_;
    }
    if (n == 0 || nodes_[0].kind != NodeKind::Bs) throw TopologyError("node 0 must be the BS");
    for (std::size_t i = 1; i < n; ++i) {
      if (nodes_[i].kind == NodeKind::Bs) throw TopologyError("exactly one BS allowed");
    }
    if (parents_[0] != kNoNode) throw TopologyError("BS cannot have a parent");

    children_.assign(n, {});
    for (std::size_t i = 1; i < n; ++i) {
      const NodeId p = parents_[i];
      if (p == kNoNode) {
        if (nodes_[i].kind != NodeKind::Ue) throw TopologyError("relay without parent");
        continue;
      }
      if (!is_infrastructure(p)) throw TopologyError("parent must be BS or RN");
      children_[static_cast<std::size_t>(p)].push_back(static_cast<NodeId>(i));
    }
    // acyclicity: every node must reach the BS
    for (std::size_t i = 1; i < n; ++i) {
      NodeId cur = static_cast<NodeId>(i);
      std::size_t steps = 0;
      while (cur != 0 && cur != kNoNode) {
        cur = parents_[static_cast<std::size_t>(cur)];
        if (++steps > n) throw TopologyError("parent map contains a cycle");
      }
    }

    flows_on_.assign(links_.size(), {});
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const auto& l = links_[i];
      if (l.id != static_cast<LinkId>(i)) throw TopologyError("link ids must be dense and ordered");
      const bool down = parents_.at(static_cast<std::size_t>(l.rx)) == l.tx;
      const bool up = parents_.at(static_cast<std::size_t>(l.tx)) == l.rx;
      if (!(down && l.direction == Direction::Dl) && !(up && l.direction == Direction::Ul)) {
        throw TopologyError("link " + std::to_string(i) + " is not a tree edge in its direction");
      }
    }
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      const auto& f = flows_[i];
      if (f.id != static_cast<FlowId>(i)) throw TopologyError("flow ids must be dense and ordered");
      if (f.path.empty()) throw TopologyError("flow with empty path");
      NodeId at = f.direction == Direction::Dl ? 0 : f.ue;
      for (LinkId l : f.path) {
        const auto& lk = link(l);
        if (lk.tx != at || lk.direction != f.direction) throw TopologyError("flow path is not connected");
        at = lk.rx;
        flows_on_[static_cast<std::size_t>(l)].push_back(f.id);
      }
      if (at != (f.direction == Direction::Dl ? f.ue : 0)) throw TopologyError("flow path does not end at its sink");
    }
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> parents_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<Link> links_;
  std::vector<Flow> flows_;
  std::vector<std::vector<FlowId>> flows_on_;
  std::vector<PairChannel> pairs_;
  double area_side_ = 0.0;
  int n_infra_ = 0;
};

// ---------------------------------------------------------------------------
// Drop generation

inline const channel::RadioConfig& radio_for(NodeKind k, const ScenarioConfig& cfg)
{
  switch (k) {
  case NodeKind::Bs: return cfg.bs_radio;
  case NodeKind::Rn: return cfg.rn_radio;
  case NodeKind::Ue: return cfg.ue_radio;
  }
  return cfg.ue_radio;
}

template <class Rng>
std::vector<Node> drop_nodes(const ScenarioConfig& cfg, Rng& rng)
{
  std::uniform_real_distribution<double> coord(0.0, cfg.area_side_m);
  auto place = [&] { return Position{coord(rng), coord(rng)}; };

  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(1 + cfg.n_rn + cfg.n_ue));
  nodes.push_back(Node{0, NodeKind::Bs, place(), cfg.bs_radio});
  for (int r = 0; r < cfg.n_rn; ++r) {
    const auto id = static_cast<NodeId>(nodes.size());
    Position p{};
    int attempt = 0;
    do {
      if (attempt++ >= cfg.max_placement_attempts) {
        throw TopologyError("could not place relay " + std::to_string(id) + " more than " +
                            std::to_string(cfg.min_bs_rn_distance_m) + " m from the BS after " +
                            std::to_string(cfg.max_placement_attempts) + " attempts");
      }
      p = place();
    } while (wrap_distance(p, nodes[0].position, cfg.area_side_m) <= cfg.min_bs_rn_distance_m);
    nodes.push_back(Node{id, NodeKind::Rn, p, cfg.rn_radio});
  }
  for (int u = 0; u < cfg.n_ue; ++u) {
    nodes.push_back(Node{static_cast<NodeId>(nodes.size()), NodeKind::Ue, place(), cfg.ue_radio});
  }
  return nodes;
}

/// Samples the frozen state and shadowing of every node pair, row-major over
/// i < j. BS-RN pairs are planned LOS.
template <class Rng>
std::vector<PairChannel> sample_pair_channels(const std::vector<Node>& nodes, const ScenarioConfig& cfg, Rng& rng)
{
  const auto n = nodes.size();
  std::vector<PairChannel> pairs(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    pairs[i * n + i] = PairChannel{channel::LinkState::Los, 0.0, 0.0};
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = wrap_distance(nodes[i].position, nodes[j].position, cfg.area_side_m);
      const bool backhaul = (nodes[i].kind == NodeKind::Bs && nodes[j].kind == NodeKind::Rn) ||
                            (nodes[i].kind == NodeKind::Rn && nodes[j].kind == NodeKind::Bs);
      PairChannel pc;
      pc.state = backhaul ? channel::LinkState::Los : channel::sample_link_state(d, cfg.channel.state, rng);
      if (pc.state != channel::LinkState::Outage) {
        const auto& pl = cfg.channel.path_loss_for(pc.state);
        pc.shadowing_db = channel::sample_shadowing(pl, rng);
        pc.path_loss_db = channel::path_loss_db(d, pl, pc.shadowing_db);
      }
      pairs[i * n + j] = pc;
      pairs[j * n + i] = pc;
    }
  }
  return pairs;
}

/// Effective loss (path loss minus array gain) of a candidate serving node.
inline double effective_loss_db(const Node& server, const Node& ue, const PairChannel& pc)
{
  return pc.path_loss_db - channel::beamforming_gain_db(server.radio.n_antennas, ue.radio.n_antennas);
}

/// Chooses the serving node of `ue` among the BS and relays with a LOS
/// backhaul: least effective loss, outage candidates excluded, ties to the
/// lowest id. Returns kNoNode when every candidate is in outage.
inline NodeId associate(NodeId ue, const std::vector<Node>& nodes, const std::vector<PairChannel>& pairs)
{
  const auto n = nodes.size();
  auto pair = [&](NodeId a, NodeId b) -> const PairChannel& {
    return pairs[static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)];
  };
  NodeId best = kNoNode;
  double best_loss = std::numeric_limits<double>::infinity();
  for (const auto& cand : nodes) {
    if (cand.kind == NodeKind::Ue) continue;
    if (cand.kind == NodeKind::Rn && pair(cand.id, 0).state != channel::LinkState::Los) continue;
    const auto& pc = pair(cand.id, ue);
    if (pc.state == channel::LinkState::Outage) continue;
    const double loss = effective_loss_db(cand, nodes[static_cast<std::size_t>(ue)], pc);
    if (loss < best_loss) { // strict: equal loss keeps the lower id
      best_loss = loss;
      best = cand.id;
    }
  }
  return best;
}

/// Worst-case interference at `victim`: every other node transmitting at
/// full power with 0 dB beam gains at both ends. `exclude` removes the
/// serving transmitter when computing a link budget.
inline double max_avg_interference(const std::vector<Node>& nodes, const std::vector<PairChannel>& pairs,
                                   NodeId victim, NodeId exclude = kNoNode)
{
  const auto n = nodes.size();
  double sum = 0.0;
  for (const auto& src : nodes) {
    if (src.id == victim || src.id == exclude) continue;
    const auto& pc = pairs[static_cast<std::size_t>(src.id) * n + static_cast<std::size_t>(victim)];
    if (pc.state == channel::LinkState::Outage) continue;
    sum += dbm_to_mw(src.radio.tx_power_dbm - pc.path_loss_db);
  }
  return sum;
}

inline double max_avg_interference(const Topology& topo, NodeId victim, NodeId exclude = kNoNode)
{
  if (!topo.has_pair_channels()) return 0.0;
  return max_avg_interference(topo.nodes(), topo.pair_channels(), victim, exclude);
}

/// Links (DL then UL for each non-root node in id order), budgets and flows
/// for a given parent map.
inline Topology assemble_topology(std::vector<Node> nodes, std::vector<NodeId> parents,
                                  std::vector<PairChannel> pairs, const channel::ChannelParams& ch,
                                  double area_side)
{
  const auto n = nodes.size();
  std::vector<Link> links;
  auto make_link = [&](NodeId tx, NodeId rx, Direction dir) {
    const auto& pc = pairs[static_cast<std::size_t>(tx) * n + static_cast<std::size_t>(rx)];
    const auto& txn = nodes[static_cast<std::size_t>(tx)];
    const auto& rxn = nodes[static_cast<std::size_t>(rx)];
    Link l;
    l.id = static_cast<LinkId>(links.size());
    l.tx = tx;
    l.rx = rx;
    l.direction = dir;
    l.state = pc.state;
    l.budget = channel::make_budget(pc.path_loss_db,
                                    channel::beamforming_gain_db(txn.radio.n_antennas, rxn.radio.n_antennas),
                                    txn.radio.tx_power_dbm, max_avg_interference(nodes, pairs, rx, tx),
                                    channel::noise_power_mw(ch.rate.w_max_hz, rxn.radio.noise_figure_db), ch.rate);
    links.push_back(l);
    return l.id;
  };

  std::vector<LinkId> down(n, -1), up(n, -1);
  for (std::size_t i = 1; i < n; ++i) {
    const NodeId p = parents[i];
    if (p == kNoNode) continue;
    down[i] = make_link(p, static_cast<NodeId>(i), Direction::Dl);
    up[i] = make_link(static_cast<NodeId>(i), p, Direction::Ul);
  }

  std::vector<Flow> flows;
  for (std::size_t i = 1; i < n; ++i) {
    if (nodes[i].kind != NodeKind::Ue || parents[i] == kNoNode) continue;
    std::vector<LinkId> up_path;
    for (NodeId cur = static_cast<NodeId>(i); cur != 0; cur = parents[static_cast<std::size_t>(cur)]) {
      up_path.push_back(up[static_cast<std::size_t>(cur)]);
    }
    std::vector<LinkId> down_path;
    for (auto it = up_path.rbegin(); it != up_path.rend(); ++it) {
      down_path.push_back(down[static_cast<std::size_t>(links[static_cast<std::size_t>(*it)].tx)]);
    }
    flows.push_back(Flow{static_cast<FlowId>(flows.size()), static_cast<NodeId>(i), Direction::Dl, down_path});
    flows.push_back(Flow{static_cast<FlowId>(flows.size()), static_cast<NodeId>(i), Direction::Ul, up_path});
  }
  return Topology::from_parts(std::move(nodes), std::move(parents), std::move(links), std::move(flows),
                              std::move(pairs), area_side);
}

template <class Rng>
Topology build_topology(const ScenarioConfig& cfg, Rng& rng)
{
  auto nodes = drop_nodes(cfg, rng);
  auto pairs = sample_pair_channels(nodes, cfg, rng);
  std::vector<NodeId> parents(nodes.size(), kNoNode);
  for (const auto& nd : nodes) {
    if (nd.kind == NodeKind::Rn) parents[static_cast<std::size_t>(nd.id)] = 0;
    if (nd.kind == NodeKind::Ue) parents[static_cast<std::size_t>(nd.id)] = associate(nd.id, nodes, pairs);
  }
  return assemble_topology(std::move(nodes), std::move(parents), std::move(pairs), cfg.channel, cfg.area_side_m);
}

/// Per-drop generator: drop k depends only on (master seed, k).
inline std::mt19937_64 drop_rng(std::uint64_t master_seed, std::uint64_t drop_index)
{
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(drop_index), static_cast<std::uint32_t>(drop_index >> 32)};
  return std::mt19937_64(seq);
}

} // namespace dtdd
