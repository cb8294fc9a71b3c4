#pragma once

// Duplex schedules (TX/RX mode per BS/RN node and subframe) and the link
// activity they induce. UE modes are never stored: a UE always takes the
// complement of its parent.

#include <dtdd/topology.hpp>

#include <algorithm>
#include <compare>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace dtdd {

enum class Mode : std::int8_t
{
  Rx = -1,
  Tx = +1
};

inline Mode opposite(Mode m) { return m == Mode::Tx ? Mode::Rx : Mode::Tx; }
inline int sign(Mode m) { return static_cast<int>(m); }

class DuplexSchedule
{
public:
  DuplexSchedule() = default;
  DuplexSchedule(int n_rows, int n_subframes, Mode fill = Mode::Tx)
    : rows_(n_rows), subframes_(n_subframes),
      modes_(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_subframes), fill)
  {
    if (n_rows < 1 || n_subframes < 1) {
      throw std::invalid_argument("duplex schedule needs at least one row and one subframe");
    }
  }

  /// Rows given as +1/-1 per subframe, BS first.
  static DuplexSchedule from_rows(const std::vector<std::vector<int>>& rows)
  {
    if (rows.empty()) throw std::invalid_argument("empty schedule");
    DuplexSchedule s(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) throw std::invalid_argument("ragged schedule rows");
      for (std::size_t t = 0; t < rows[r].size(); ++t) {
        if (rows[r][t] != 1 && rows[r][t] != -1) throw std::invalid_argument("schedule entries must be +1 or -1");
        s.set(static_cast<int>(r), static_cast<int>(t), rows[r][t] > 0 ? Mode::Tx : Mode::Rx);
      }
    }
    return s;
  }

  int rows() const { return rows_; }
  int subframes() const { return subframes_; }

  Mode at(int row, int t) const { return modes_[index(row, t)]; }
  void set(int row, int t, Mode m) { modes_[index(row, t)] = m; }

  std::vector<int> row(int r) const
  {
    std::vector<int> out(static_cast<std::size_t>(subframes_));
    for (int t = 0; t < subframes_; ++t) out[static_cast<std::size_t>(t)] = sign(at(r, t));
    return out;
  }

  /// Column t as a bit mask, bit r set when row r transmits.
  std::uint32_t column_code(int t) const
  {
    std::uint32_t code = 0;
    for (int r = 0; r < rows_; ++r) {
      if (at(r, t) == Mode::Tx) code |= (1u << r);
    }
    return code;
  }

  /// Column-permutation-invariant key (sorted column codes).
  std::vector<std::uint32_t> canonical_key() const
  {
    std::vector<std::uint32_t> key(static_cast<std::size_t>(subframes_));
    for (int t = 0; t < subframes_; ++t) key[static_cast<std::size_t>(t)] = column_code(t);
    std::sort(key.begin(), key.end());
    return key;
  }

  DuplexSchedule permuted(const std::vector<int>& order) const
  {
    DuplexSchedule out(rows_, subframes_);
    for (int t = 0; t < subframes_; ++t) {
      for (int r = 0; r < rows_; ++r) out.set(r, t, at(r, order.at(static_cast<std::size_t>(t))));
    }
    return out;
  }

  friend bool operator==(const DuplexSchedule&, const DuplexSchedule&) = default;
  friend auto operator<=>(const DuplexSchedule& a, const DuplexSchedule& b)
  {
    return std::tie(a.rows_, a.subframes_, a.modes_) <=> std::tie(b.rows_, b.subframes_, b.modes_);
  }

private:
  std::size_t index(int row, int t) const
  {
    if (row < 0 || row >= rows_ || t < 0 || t >= subframes_) {
      throw std::out_of_range("schedule index (" + std::to_string(row) + ", " + std::to_string(t) + ")");
    }
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(subframes_) + static_cast<std::size_t>(t);
  }

  int rows_ = 0;
  int subframes_ = 0;
  std::vector<Mode> modes_;
};

inline std::ostream& operator<<(std::ostream& os, const DuplexSchedule& s)
{
  for (int r = 0; r < s.rows(); ++r) {
    os << (r == 0 ? "" : " | ");
    for (int t = 0; t < s.subframes(); ++t) os << (s.at(r, t) == Mode::Tx ? '+' : '-');
  }
  return os;
}

/// Mode of any node (UEs derive theirs from the parent).
inline Mode node_mode(const DuplexSchedule& x, const Topology& topo, NodeId n, int t)
{
  if (topo.is_infrastructure(n)) return x.at(n, t);
  const NodeId p = topo.parent(n);
  if (p == kNoNode) return Mode::Rx;
  return opposite(x.at(p, t));
}

inline void check_shape(const DuplexSchedule& x, const Topology& topo)
{
  if (x.rows() != topo.n_infrastructure()) {
    throw std::invalid_argument("schedule has " + std::to_string(x.rows()) + " rows, topology has " +
                                std::to_string(topo.n_infrastructure()) + " BS/RN nodes");
  }
}

/// x_l^t per link and subframe.
class LinkSchedule
{
public:
  LinkSchedule() = default;
  LinkSchedule(std::size_t n_links, int n_subframes)
    : links_(n_links), subframes_(n_subframes), active_(n_links * static_cast<std::size_t>(n_subframes), 0)
  {}

  std::size_t links() const { return links_; }
  int subframes() const { return subframes_; }
  bool active(LinkId l, int t) const { return active_[idx(l, t)] != 0; }
  void set(LinkId l, int t, bool on) { active_[idx(l, t)] = on ? 1 : 0; }

  int active_count(LinkId l) const
  {
    int c = 0;
    for (int t = 0; t < subframes_; ++t) c += active(l, t) ? 1 : 0;
    return c;
  }

private:
  std::size_t idx(LinkId l, int t) const
  {
    return static_cast<std::size_t>(l) * static_cast<std::size_t>(subframes_) + static_cast<std::size_t>(t);
  }

  std::size_t links_ = 0;
  int subframes_ = 0;
  std::vector<std::uint8_t> active_;
};

/// A link is active exactly when its transmitter is in TX and its receiver in RX.
inline LinkSchedule derive_link_schedule(const DuplexSchedule& x, const Topology& topo)
{
  check_shape(x, topo);
  LinkSchedule ls(topo.links().size(), x.subframes());
  for (const auto& l : topo.links()) {
    for (int t = 0; t < x.subframes(); ++t) {
      ls.set(l.id, t, node_mode(x, topo, l.tx, t) == Mode::Tx && node_mode(x, topo, l.rx, t) == Mode::Rx);
    }
  }
  return ls;
}

/// Counts half-duplex violations: a node both receiving from its parent and
/// transmitting to a child (or the reverse in UL) in the same subframe.
inline int half_duplex_violations(const LinkSchedule& ls, const Topology& topo)
{
  int violations = 0;
  for (const auto& l : topo.links()) {
    // l = (p, n) in DL or (n, p) in UL, with n the child endpoint
    const NodeId n = l.direction == Direction::Dl ? l.rx : l.tx;
    for (NodeId c : topo.children(n)) {
      const auto other = l.direction == Direction::Dl ? topo.link_between(n, c) : topo.link_between(c, n);
      if (!other) continue;
      for (int t = 0; t < ls.subframes(); ++t) {
        if (ls.active(l.id, t) && ls.active(*other, t)) ++violations;
      }
    }
  }
  return violations;
}

} // namespace dtdd
