#include <dtdd/baselines.hpp>
#include <dtdd/scheduler.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

#include <sstream>

namespace {

using namespace dtdd;

constexpr double kW = 1e9;

std::string str(const DuplexSchedule& x)
{
  std::ostringstream os;
  os << x;
  return os.str();
}

Topology drop(int n_rn, int n_ue, std::uint64_t k, std::uint64_t seed = 31)
{
  ScenarioConfig cfg;
  cfg.n_rn = n_rn;
  cfg.n_ue = n_ue;
  auto rng = drop_rng(seed, k);
  return build_topology(cfg, rng);
}

Topology two_relays()
{
  return test::hand_topology({NodeKind::Bs, NodeKind::Rn, NodeKind::Rn, NodeKind::Ue}, {kNoNode, 0, 0, 1},
                             [](NodeId, NodeId) { return 1.0; });
}

TEST(InitialSchedule, Alternating)
{
  const auto x = initial_schedule(two_relays(), 4);
  EXPECT_EQ(str(x), "+-+- | -+-+ | -+-+");
}

TEST(InitialSchedule, DownlinkBiased)
{
  const auto x = initial_schedule(two_relays(), 8, InitialPattern::DlBiased);
  EXPECT_EQ(str(x), "+++-+++- | ---+---+ | ---+---+");
}

TEST(InitialSchedule, RejectsSingleSubframe) { EXPECT_THROW(initial_schedule(two_relays(), 1), std::invalid_argument); }

TEST(Realloc, BsTakesFirstOtherSubframe)
{
  const auto topo = two_relays();
  const auto x = DuplexSchedule::from_rows({{1, -1, 1, -1}, {-1, 1, -1, 1}, {-1, 1, -1, 1}});
  const auto r = realloc(x, topo, 0, Mode::Tx);
  EXPECT_TRUE(r.changed);
  EXPECT_EQ(r.subframe, 1);
  EXPECT_EQ(str(r.schedule), "+++- | -+-+ | -+-+");
  const auto d = realloc(x, topo, 0, Mode::Rx);
  EXPECT_EQ(d.subframe, 0);
}

TEST(Realloc, RelayPrefersSubframeSharedWithParent)
{
  const auto topo = two_relays();
  // RN1 matches the BS in subframe 2 only
  const auto x = DuplexSchedule::from_rows({{1, -1, 1, -1}, {-1, 1, 1, 1}, {-1, 1, -1, 1}});
  const auto r = realloc(x, topo, 1, Mode::Rx);
  EXPECT_TRUE(r.changed);
  EXPECT_EQ(r.subframe, 2);
  EXPECT_EQ(str(r.schedule), "+-+- | -+-+ | -+-+");
}

TEST(Realloc, RelayCursorWrapsWhenNothingShared)
{
  const auto topo = two_relays();
  const auto x = DuplexSchedule::from_rows({{1, -1, 1, -1}, {-1, 1, -1, 1}, {-1, 1, -1, 1}});
  std::vector<int> cursors(3, 0);
  auto r = realloc(x, topo, 1, Mode::Tx, &cursors);
  EXPECT_EQ(r.subframe, 0);
  EXPECT_EQ(cursors[1], 1);
  r = realloc(r.schedule, topo, 1, Mode::Tx, &cursors);
  EXPECT_EQ(r.subframe, 2);
  EXPECT_EQ(cursors[1], 3);
  EXPECT_EQ(str(r.schedule), "+-+- | ++++ | -+-+");
}

TEST(Realloc, NoOpWhenRowAlreadyInMode)
{
  const auto topo = two_relays();
  const auto x = DuplexSchedule::from_rows({{1, 1}, {-1, -1}, {1, -1}});
  EXPECT_FALSE(realloc(x, topo, 0, Mode::Tx).changed);
  EXPECT_FALSE(realloc(x, topo, 1, Mode::Rx).changed);
  EXPECT_EQ(realloc(x, topo, 0, Mode::Tx).schedule, x);
}

TEST(Realloc, RejectsUeNodes)
{
  const auto topo = two_relays();
  EXPECT_THROW(realloc(DuplexSchedule(3, 2), topo, 3, Mode::Tx), std::invalid_argument);
}

TEST(Evaluator, CachesByColumnMultiset)
{
  const auto topo = drop(2, 10, 0);
  Evaluator ev(topo, kW, SolverSettings{});
  const auto x = initial_schedule(topo, 4);
  const auto a = ev.evaluate(x);
  const auto b = ev.evaluate(x.permuted({3, 1, 0, 2}));
  EXPECT_FALSE(a.cached);
  EXPECT_TRUE(b.cached);
  EXPECT_EQ(a.utility, b.utility);
  EXPECT_EQ(ev.solver_calls(), 1);
  EXPECT_EQ(ev.lookups(), 2);
}

TEST(Greedy, AcceptedTraceStrictlyIncreasing)
{
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto topo = drop(k % 2 ? 4 : 2, 10, k);
    const auto st = run_dtdd(topo, 8, kW, SolverSettings{}, SchedulerSettings{});
    ASSERT_FALSE(st.accepted_utilities.empty());
    EXPECT_EQ(st.accepted_utilities.front(), st.initial_utility);
    for (std::size_t i = 1; i < st.accepted_utilities.size(); ++i) {
      EXPECT_GT(st.accepted_utilities[i], st.accepted_utilities[i - 1]);
    }
    EXPECT_EQ(st.accepted_utilities.back(), st.utility);
    EXPECT_EQ(st.accepted_moves, static_cast<int>(st.accepted_utilities.size()) - 1);
    EXPECT_GE(st.utility, st.initial_utility);
    EXPECT_EQ(st.half_duplex_violations, 0);
  }
}

TEST(Greedy, TerminatesWithinSearchSpace)
{
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto topo = drop(2, 10, k);
    const auto st = run_dtdd(topo, 4, kW, SolverSettings{}, SchedulerSettings{});
    EXPECT_LE(static_cast<std::uint64_t>(st.inner_calls), count_unique(4, 2));
    EXPECT_GE(st.evaluations, st.inner_calls);
    EXPECT_EQ(st.moves.size(), static_cast<std::size_t>(st.evaluations));
  }
}

TEST(Greedy, MatchesExhaustiveWithoutRelays)
{
  // with only the BS row the utility is concave in its TX count
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto topo = drop(0, 6, k);
    for (int n : {4, 8}) {
      const auto st = run_dtdd(topo, n, kW, SolverSettings{}, SchedulerSettings{});
      const auto bf = brute_force(topo, n, kW, SolverSettings{});
      EXPECT_NEAR(st.utility, bf.utility, 1e-9 * std::abs(bf.utility)) << "drop " << k << " n " << n;
    }
  }
}

TEST(Greedy, SingleUeSplitsFrameEvenly)
{
  const auto topo = test::hand_topology({NodeKind::Bs, NodeKind::Ue}, {kNoNode, 0}, [](NodeId, NodeId) { return 3.0; });
  const auto st = run_dtdd(topo, 6, kW, SolverSettings{}, SchedulerSettings{}, DuplexSchedule(1, 6, Mode::Tx));
  int tx = 0;
  for (int t = 0; t < 6; ++t) tx += st.schedule.at(0, t) == Mode::Tx;
  EXPECT_EQ(tx, 3);
  EXPECT_NEAR(st.allocation.flow_rates[0], 3.0 * kW * 3, 1e-3 * kW);
}

TEST(Greedy, NeverWorseThanStaticSeed)
{
  const auto sweep = enumerate_static_configs(std::string{}, 2, 8);
  ASSERT_FALSE(sweep.configs.empty());
  for (std::uint64_t k = 0; k < 4; ++k) {
    const auto topo = drop(2, 10, k);
    for (std::size_t c = 0; c < sweep.configs.size(); c += 4) {
      const auto& seed = sweep.configs[c].schedule;
      const double u0 = solve_schedule(topo, seed, kW, SolverSettings{}).utility;
      const auto st = run_dtdd(topo, 8, kW, SolverSettings{}, SchedulerSettings{}, seed);
      EXPECT_GE(st.utility, u0 - 1e-9 * std::abs(u0));
    }
  }
}

TEST(Greedy, NearOptimalOnTinyRelayNetworks)
{
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto topo = drop(1, 3, k, 8);
    if (topo.flows().empty()) continue;
    const auto st = run_dtdd(topo, 2, kW, SolverSettings{}, SchedulerSettings{});
    const auto bf = brute_force(topo, 2, kW, SolverSettings{});
    EXPECT_GE(st.utility, 0.95 * bf.utility) << "drop " << k;
    EXPECT_LE(st.utility, bf.utility + 1e-9 * std::abs(bf.utility));
  }
}

TEST(Greedy, DeterministicTrace)
{
  const auto topo = drop(2, 10, 3);
  const auto a = run_dtdd(topo, 8, kW, SolverSettings{}, SchedulerSettings{});
  const auto b = run_dtdd(topo, 8, kW, SolverSettings{}, SchedulerSettings{});
  std::ostringstream ta, tb;
  write_move_trace(a, ta);
  write_move_trace(b, tb);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(ta.str().rfind("# index node move", 0), 0u);
}

TEST(Greedy, CandidateBaseVariantAlsoImproves)
{
  SchedulerSettings s;
  s.realloc_base = ReallocBase::Candidate;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto topo = drop(2, 10, k);
    const auto st = run_dtdd(topo, 8, kW, SolverSettings{}, s);
    EXPECT_GE(st.utility, st.initial_utility);
  }
}

TEST(Greedy, EmptyNetwork)
{
  const auto topo = test::hand_topology({NodeKind::Bs, NodeKind::Rn}, {kNoNode, 0}, [](NodeId, NodeId) { return 1.0; });
  const auto st = run_dtdd(topo, 4, kW, SolverSettings{}, SchedulerSettings{});
  EXPECT_EQ(st.utility, 0.0);
  EXPECT_EQ(st.inner_calls, 0);
}

} // namespace
