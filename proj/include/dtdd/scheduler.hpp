#pragma once

// Greedy recursive subtree search over duplex schedules. Each candidate is
// scored by the inner allocation problem; a move is kept only when it raises
// the utility by more than a relative epsilon.

#include <dtdd/config.hpp>
#include <dtdd/num_core.hpp>
#include <dtdd/schedule.hpp>
#include <dtdd/topology.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace dtdd {

inline DuplexSchedule initial_schedule(const Topology& topo, int n_subframes,
                                       InitialPattern pattern = InitialPattern::Alternating)
{
  if (n_subframes < 2) throw std::invalid_argument("initial schedule needs at least two subframes");
  DuplexSchedule x(topo.n_infrastructure(), n_subframes);
  for (int t = 0; t < n_subframes; ++t) {
    const bool bs_tx = pattern == InitialPattern::Alternating ? (t % 2 == 0) : (t % 4 != 3);
    const Mode bs = bs_tx ? Mode::Tx : Mode::Rx;
    x.set(0, t, bs);
    for (int r = 1; r < x.rows(); ++r) {
      // deeper relays alternate with their parent
      x.set(r, t, opposite(x.at(topo.parent(r), t)));
    }
  }
  return x;
}

struct ReallocResult
{
  DuplexSchedule schedule;
  bool changed = false;
  int subframe = -1;
};

/// Flip one subframe of `node` to `new_mode`. RNs prefer a subframe where they
/// share the parent's mode; otherwise the scan starts at the node's cursor and
/// wraps. The BS takes the first subframe not already in `new_mode`.
inline ReallocResult realloc(const DuplexSchedule& x, const Topology& topo, NodeId node, Mode new_mode,
                             std::vector<int>* cursors = nullptr)
{
  if (!topo.is_infrastructure(node)) throw std::invalid_argument("realloc applies to BS/RN rows only");
  ReallocResult out{x, false, -1};
  const int n = x.subframes();
  const NodeId parent = topo.parent(node);

  auto flip = [&](int t) {
    out.schedule.set(node, t, new_mode);
    out.changed = true;
    out.subframe = t;
  };

  if (parent == kNoNode) {
    for (int t = 0; t < n; ++t) {
      if (x.at(node, t) != new_mode) {
        flip(t);
        return out;
      }
    }
    return out;
  }
  for (int t = 0; t < n; ++t) {
    if (x.at(node, t) != new_mode && x.at(node, t) == x.at(parent, t)) {
      flip(t);
      return out;
    }
  }
  const int start = cursors ? (*cursors)[static_cast<std::size_t>(node)] % n : 0;
  for (int k = 0; k < n; ++k) {
    const int t = (start + k) % n;
    if (x.at(node, t) != new_mode) {
      flip(t);
      if (cursors) (*cursors)[static_cast<std::size_t>(node)] = (t + 1) % n;
      return out;
    }
  }
  return out;
}

/// Memoized inner solves. Utility depends only on the multiset of columns, so
/// the cache key is the sorted column code list.
class Evaluator
{
public:
  struct Result
  {
    double utility = -std::numeric_limits<double>::infinity();
    bool converged = false;
    bool cached = false;
  };

  Evaluator(const Topology& topo, double w_max, SolverSettings settings)
    : topo_(&topo), w_max_(w_max), settings_(settings)
  {}

  Result evaluate(const DuplexSchedule& x)
  {
    ++lookups_;
    auto key = x.canonical_key();
    if (auto it = cache_.find(key); it != cache_.end()) {
      Result r = it->second;
      r.cached = true;
      return r;
    }
    const LinkSchedule ls = derive_link_schedule(x, *topo_);
    hd_violations_ += half_duplex_violations(ls, *topo_);
    const Allocation a = solve(build_problem(*topo_, ls, w_max_), settings_);
    ++solver_calls_;
    if (!a.converged) ++unconverged_;
    max_kkt_ = a.converged ? std::max(max_kkt_, a.kkt_residual) : max_kkt_;
    Result r{a.converged ? a.utility : -std::numeric_limits<double>::infinity(), a.converged, false};
    cache_.emplace(std::move(key), r);
    return r;
  }

  int solver_calls() const { return solver_calls_; }
  int lookups() const { return lookups_; }
  int unconverged() const { return unconverged_; }
  int half_duplex_violations_seen() const { return hd_violations_; }
  double max_converged_kkt() const { return max_kkt_; }

private:
  const Topology* topo_;
  double w_max_;
  SolverSettings settings_;
  std::map<std::vector<std::uint32_t>, Result> cache_;
  int solver_calls_ = 0;
  int lookups_ = 0;
  int unconverged_ = 0;
  int hd_violations_ = 0;
  double max_kkt_ = 0.0;
};

/// One evaluated candidate. `direction` is +1 / -1 for a realloc move and 0
/// for a subtree entry schedule.
struct MoveRecord
{
  NodeId node = 0;
  int direction = 0;
  double utility = 0.0;
  bool cached = false;
  bool accepted = false;
  std::string schedule;
};

struct SearchState
{
  DuplexSchedule schedule;
  double utility = -std::numeric_limits<double>::infinity();
  double initial_utility = -std::numeric_limits<double>::infinity();
  int inner_calls = 0;    // solver invocations (cache misses)
  int evaluations = 0;    // candidate lookups, cached or not
  int accepted_moves = 0;
  std::vector<double> accepted_utilities;
  std::vector<MoveRecord> moves;
  int half_duplex_violations = 0;
  int unconverged = 0;
  double max_kkt_residual = 0.0;
  Allocation allocation;
};

/// Move trace, one line per evaluated candidate:
///   <index> <node> <dl|ul|entry> <utility> <cached 0|1> <accepted 0|1> <schedule>
inline void write_move_trace(const SearchState& s, std::ostream& os)
{
  os << "# index node move utility cached accepted schedule\n";
  std::ostringstream line;
  line.precision(12);
  for (std::size_t i = 0; i < s.moves.size(); ++i) {
    const auto& m = s.moves[i];
    line.str("");
    line << i << ' ' << m.node << ' ' << (m.direction > 0 ? "dl" : m.direction < 0 ? "ul" : "entry") << ' '
         << m.utility << ' ' << m.cached << ' ' << m.accepted << ' ' << m.schedule << '\n';
    os << line.str();
  }
}

namespace detail {

class Search
{
public:
  Search(const Topology& topo, const SchedulerSettings& settings, Evaluator& eval)
    : topo_(topo), settings_(settings), eval_(eval),
      cursors_(static_cast<std::size_t>(topo.n_infrastructure()), 0)
  {}

  struct Outcome
  {
    DuplexSchedule schedule;
    double utility;
    bool improved;
    std::size_t record;
  };

  bool better(double a, double b) const
  {
    if (!std::isfinite(a)) return false;
    if (!std::isfinite(b)) return true;
    return a > b + settings_.improvement_epsilon * std::abs(b);
  }

  std::pair<double, std::size_t> evaluate(const DuplexSchedule& x, NodeId node, int direction)
  {
    const auto r = eval_.evaluate(x);
    std::ostringstream os;
    os << x;
    moves_.push_back({node, direction, r.utility, r.cached, false, os.str()});
    return {r.utility, moves_.size() - 1};
  }

  void accept(std::size_t record, double u)
  {
    if (record >= moves_.size()) return;
    if (!trace_.empty() && !(u > trace_.back())) return;
    moves_[record].accepted = true;
    trace_.push_back(u);
  }

  Outcome test_subtree(NodeId n, DuplexSchedule x, double u)
  {
    bool improved = false;
    std::size_t best = static_cast<std::size_t>(-1);

    const auto [u_entry, rec_entry] = evaluate(x, n, 0);
    if (better(u_entry, u)) {
      u = u_entry;
      improved = true;
      best = rec_entry;
      accept(best, u);
    }

    const auto relays = topo_.relay_children(n);
    for (NodeId r : relays) {
      auto sub = test_subtree(r, x, u);
      if (sub.improved && better(sub.utility, u)) {
        x = std::move(sub.schedule);
        u = sub.utility;
        improved = true;
        best = sub.record;
        accept(best, u);
      }
    }

    for (Mode x_new : {Mode::Tx, Mode::Rx}) {
      for (int pass = 0; pass < settings_.max_passes; ++pass) {
        auto moved = realloc(x, topo_, n, x_new, &cursors_);
        if (!moved.changed) break;
        DuplexSchedule x_tst = std::move(moved.schedule);
        auto [u_tst, rec] = evaluate(x_tst, n, sign(x_new));

        for (NodeId r : relays) {
          const DuplexSchedule& base = settings_.realloc_base == ReallocBase::AsListed ? x : x_tst;
          auto child = realloc(base, topo_, r, opposite(x_new), &cursors_);
          auto sub = test_subtree(r, std::move(child.schedule), u);
          if (sub.improved && better(sub.utility, u_tst)) {
            u_tst = sub.utility;
            x_tst = std::move(sub.schedule);
            rec = sub.record;
          }
        }

        if (!better(u_tst, u)) break;
        u = u_tst;
        x = std::move(x_tst);
        improved = true;
        best = rec;
        accept(best, u);
      }
    }
    return {std::move(x), u, improved, best};
  }

  std::vector<MoveRecord> moves_;
  std::vector<double> trace_;

private:
  const Topology& topo_;
  const SchedulerSettings& settings_;
  Evaluator& eval_;
  std::vector<int> cursors_;
};

} // namespace detail

/// Full search from the BS. `seed` overrides the configured initial pattern.
inline SearchState run_dtdd(const Topology& topo, int n_subframes, double w_max, const SolverSettings& solver,
                            const SchedulerSettings& settings,
                            const std::optional<DuplexSchedule>& seed = std::nullopt)
{
  SearchState st;
  st.schedule = seed ? *seed : initial_schedule(topo, n_subframes, settings.initial_pattern);
  check_shape(st.schedule, topo);
  if (topo.flows().empty()) {
    st.allocation = detail::empty_allocation(build_problem(topo, derive_link_schedule(st.schedule, topo), w_max));
    st.utility = st.initial_utility = 0.0;
    return st;
  }

  Evaluator eval(topo, w_max, solver);
  detail::Search search(topo, settings, eval);
  const auto [u0, rec0] = search.evaluate(st.schedule, 0, 0);
  st.initial_utility = u0;
  search.accept(rec0, u0);

  auto out = search.test_subtree(0, st.schedule, u0);
  st.schedule = std::move(out.schedule);
  st.utility = out.utility;
  st.moves = std::move(search.moves_);
  st.accepted_utilities = std::move(search.trace_);
  st.accepted_moves = static_cast<int>(st.accepted_utilities.size()) - 1;
  st.inner_calls = eval.solver_calls();
  st.evaluations = eval.lookups();
  st.half_duplex_violations = eval.half_duplex_violations_seen();
  st.unconverged = eval.unconverged();
  st.max_kkt_residual = eval.max_converged_kkt();
  st.allocation = solve_schedule(topo, st.schedule, w_max, solver);
  return st;
}

inline SearchState run_dtdd(const Topology& topo, const ScenarioConfig& cfg,
                            const std::optional<DuplexSchedule>& seed = std::nullopt)
{
  return run_dtdd(topo, cfg.dtdd_subframes, cfg.channel.rate.w_max_hz, cfg.solver, cfg.scheduler, seed);
}

} // namespace dtdd
