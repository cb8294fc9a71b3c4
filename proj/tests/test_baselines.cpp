#include <dtdd/baselines.hpp>

#include <gtest/gtest.h>

#include <fstream>
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

Topology drop(int n_rn, std::uint64_t k)
{
  ScenarioConfig cfg;
  cfg.n_rn = n_rn;
  auto rng = drop_rng(17, k);
  return build_topology(cfg, rng);
}

std::string error_of(const std::string& text)
{
  try {
    parse_patterns(text);
  } catch (const PatternError& e) {
    return e.what();
  }
  return "";
}

TEST(Patterns, BuiltInTableParses)
{
  const auto p = parse_patterns(std::string(kDefaultPatterns));
  ASSERT_EQ(p.size(), 7u);
  EXPECT_EQ(p[0].name, "cfg0");
  EXPECT_EQ(p[0].usable(), 8);
  EXPECT_EQ(p[3].usable(), 9);
  for (const auto& pat : p) {
    EXPECT_EQ(pat.subframes.size(), 10u);
    for (const auto& m : pat.masks) EXPECT_FALSE(mask_error(pat, m).has_value()) << pat.name << "/" << m.name;
  }
}

TEST(Patterns, ShippedDataFileMatchesBuiltIn)
{
  std::ifstream in(std::string(DTDD_DATA_DIR) + "/lte_tdd_patterns.txt");
  ASSERT_TRUE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), std::string(kDefaultPatterns));
}

TEST(Patterns, ErrorsCarryLineNumbers)
{
  EXPECT_EQ(error_of("# c\ncfg D X U\n"), "line 2: bad subframe letter 'X'");
  EXPECT_EQ(error_of("mask m dl=1\n"), "line 1: mask before any pattern");
  EXPECT_EQ(error_of("a D U\nmask m dl=x\n"), "line 2: bad subframe index 'x'");
  EXPECT_EQ(error_of("a D U\nmask m up=1\n"), "line 2: unexpected mask field 'up'");
  EXPECT_EQ(error_of("a D U\n\nmask m dl=0\nmask m ul=1\n"), "line 4: duplicate mask 'm'");
  EXPECT_EQ(error_of("a D U\na U D\n"), "line 2: duplicate pattern 'a'");
  EXPECT_EQ(error_of("lonely\n"), "line 1: pattern 'lonely' has no subframes");
}

TEST(Patterns, MissingFileIsReported)
{
  EXPECT_THROW(load_patterns("/nonexistent/patterns.txt"), PatternError);
}

TEST(Patterns, MaskValidation)
{
  const auto p = parse_patterns(std::string("a D S U D\nmask ok dl=0 ul=2\nmask bad dl=2\nmask far ul=7\n"));
  EXPECT_FALSE(mask_error(p[0], p[0].masks[0]));
  EXPECT_EQ(*mask_error(p[0], p[0].masks[1]), "dl backhaul in non-D subframe 2");
  EXPECT_EQ(*mask_error(p[0], p[0].masks[2]), "ul index 7 out of range");
  const auto sweep = enumerate_static_configs(p, 1, 3);
  EXPECT_EQ(sweep.configs.size(), 1u);
  EXPECT_EQ(sweep.rejected.size(), 2u);
}

TEST(Patterns, ExpandDropsSpecialSubframes)
{
  const auto p = parse_patterns(std::string(kDefaultPatterns));
  // cfg1 = D S U U D D S U U D, bh0: backhaul DL at 9, UL at 8
  const auto x = expand_pattern(p[1], p[1].masks[0], 2);
  EXPECT_EQ(str(x), "+--++--+ | +--++-+- | +--++-+-");
}

TEST(Patterns, SweepAtEightUsableSubframes)
{
  const auto sweep = enumerate_static_configs(std::string{}, 2, 8);
  EXPECT_EQ(sweep.configs.size(), 15u);
  EXPECT_TRUE(sweep.rejected.empty());
  for (const auto& c : sweep.configs) {
    EXPECT_EQ(c.schedule.subframes(), 8);
    EXPECT_EQ(c.schedule.rows(), 3);
  }
}

TEST(Patterns, StaticSchedulesAreHalfDuplexFeasible)
{
  const auto topo = drop(2, 0);
  for (const auto& c : enumerate_static_configs(std::string{}, 2, 8).configs) {
    EXPECT_EQ(half_duplex_violations(derive_link_schedule(c.schedule, topo), topo), 0);
  }
}

TEST(CountUnique, Examples)
{
  EXPECT_EQ(count_unique(1, 0), 2u);
  EXPECT_EQ(count_unique(2, 0), 3u);
  EXPECT_EQ(count_unique(4, 2), 330u);
  EXPECT_EQ(count_unique(8, 0), 9u);
  EXPECT_EQ(count_unique(0, 3), 1u);
  EXPECT_THROW(count_unique(-1, 0), std::invalid_argument);
}

TEST(BruteForce, VisitsEveryMultisetOnce)
{
  const auto topo = drop(2, 1);
  const auto bf = brute_force(topo, 4, kW, SolverSettings{});
  EXPECT_EQ(bf.evaluated, count_unique(4, 2));
  EXPECT_EQ(static_cast<std::uint64_t>(bf.solver_calls), bf.evaluated);
  EXPECT_EQ(bf.half_duplex_violations, 0);
}

TEST(BruteForce, ReducedMatchesFullEnumeration)
{
  const auto topo = drop(1, 2);
  const auto reduced = brute_force(topo, 3, kW, SolverSettings{});
  const auto full = brute_force(topo, 3, kW, SolverSettings{}, false);
  EXPECT_EQ(full.evaluated, 64u);
  EXPECT_EQ(reduced.evaluated, count_unique(3, 1));
  EXPECT_NEAR(reduced.utility, full.utility, 1e-12 * std::abs(full.utility));
}

TEST(BruteForce, RefusesLargeInstances)
{
  const auto topo = drop(2, 0);
  EXPECT_THROW(brute_force(topo, 8, kW, SolverSettings{}), std::invalid_argument);
}

TEST(BruteForce, BoundsStaticSweep)
{
  // four-subframe patterns so exhaustive search stays small
  const auto patterns = parse_patterns(std::string("p0 D U D U\n"
                                                   "mask a dl=0 ul=1\n"
                                                   "mask b dl=2 ul=1,3\n"
                                                   "p1 D D D U\n"
                                                   "mask c dl=1 ul=3\n"
                                                   "mask d dl=0,2 ul=3\n"));
  const auto sweep = enumerate_static_configs(patterns, 2, 4);
  ASSERT_EQ(sweep.configs.size(), 4u);
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto topo = drop(2, k);
    const auto st = best_static(topo, sweep.configs, kW, SolverSettings{});
    const auto bf = brute_force(topo, 4, kW, SolverSettings{});
    double mean = 0.0;
    for (double u : st.utilities) mean += u / static_cast<double>(st.utilities.size());
    const double best = st.utilities[st.best];
    EXPECT_GE(bf.utility, best - 1e-9 * std::abs(best));
    EXPECT_GE(best, mean);
    for (double u : st.utilities) EXPECT_LE(u, best);
  }
}

} // namespace
