#include <dtdd/report.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

using namespace dtdd;

ScenarioConfig small(int drops = 3)
{
  ScenarioConfig cfg;
  cfg.drops = drops;
  cfg.threads = 2;
  return cfg;
}

std::string csv_of(const ExperimentResult& r)
{
  std::ostringstream os;
  write_flow_csv(r.drops, os);
  return os.str();
}

std::vector<std::string> lines(const std::string& s)
{
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

TEST(Metrics, Examples)
{
  const auto s = compute_metrics({1.0, 2.0, 3.0});
  EXPECT_EQ(s.count, 3u);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_DOUBLE_EQ(s.edge, 1.0);

  std::vector<double> v(100, 4.25);
  EXPECT_DOUBLE_EQ(compute_metrics(v).edge, 4.25);

  std::vector<double> seq;
  for (int i = 100; i >= 1; --i) seq.push_back(i);
  const auto m = compute_metrics(seq);
  EXPECT_DOUBLE_EQ(m.edge, 3.0);
  EXPECT_DOUBLE_EQ(m.median, 50.5);
  EXPECT_DOUBLE_EQ(m.mean, 50.5);
}

TEST(Metrics, EmptySampleIsMarked)
{
  EXPECT_TRUE(compute_metrics({}).empty());
  EXPECT_THROW(quantile_sorted({}, 0.5), std::invalid_argument);
}

TEST(Metrics, EdgeCount)
{
  EXPECT_EQ(edge_count(1), 1u);
  EXPECT_EQ(edge_count(20), 1u);
  EXPECT_EQ(edge_count(21), 2u);
  EXPECT_EQ(edge_count(100), 5u);
}

TEST(Metrics, CdfNondecreasingInUnitInterval)
{
  const auto cdf = empirical_cdf({3.0, 1.0, 2.0, 2.0});
  ASSERT_EQ(cdf.size(), 4u);
  EXPECT_DOUBLE_EQ(cdf.back().second, 1.0);
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    EXPECT_GE(cdf[i].first, cdf[i - 1].first);
    EXPECT_GT(cdf[i].second, cdf[i - 1].second);
  }
}

TEST(Config, PresetsLoad)
{
  const auto a = load_config(std::string(DTDD_CONFIG_DIR) + "/case_2rn.ini");
  const auto b = load_config(std::string(DTDD_CONFIG_DIR) + "/case_4rn.ini");
  const auto c = load_config(std::string(DTDD_CONFIG_DIR) + "/brute_2rn_4sf.ini");
  EXPECT_EQ(a.n_rn, 2);
  EXPECT_EQ(b.n_rn, 4);
  EXPECT_EQ(a.drops, 25);
  EXPECT_EQ(a.frame_subframes(), 10);
  EXPECT_EQ(a.dtdd_subframes, 8);
  EXPECT_TRUE(std::filesystem::exists(a.pattern_file));
  EXPECT_EQ(c.dtdd_subframes, 4);
  EXPECT_TRUE(c.run_brute);
  EXPECT_FALSE(c.run_static);
}

TEST(Config, UnknownKeysRejected)
{
  std::istringstream bad_key("[deployment]\nn_relays = 3\n");
  EXPECT_THROW(parse_config(bad_key), ConfigError);
  std::istringstream bad_section("[network]\nn_rn = 3\n");
  EXPECT_THROW(parse_config(bad_section), ConfigError);
  std::istringstream bad_value("[deployment]\nn_rn = two\n");
  EXPECT_THROW(parse_config(bad_value), ConfigError);
  std::istringstream invalid("[channel]\neta = 1.5\n");
  EXPECT_THROW(parse_config(invalid), ConfigError);
  std::istringstream ok("[deployment]\nn_rn = 3\n[experiment]\nseed = 42\n");
  const auto c = parse_config(ok);
  EXPECT_EQ(c.n_rn, 3);
  EXPECT_EQ(c.seed, 42u);
}

TEST(Experiment, SampleCountsAndPairing)
{
  const auto cfg = small(4);
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.report.drops_ok, 4);
  std::size_t dtdd = 0, stat_best = 0;
  for (const auto& d : r.drops) {
    ASSERT_TRUE(d.ok) << d.error;
    EXPECT_EQ(d.n_ue, 10);
    EXPECT_EQ(d.n_los + d.n_nlos + d.n_outage, d.n_ue);
    for (const auto& s : d.samples) {
      dtdd += s.scheme == Scheme::Dtdd;
      stat_best += s.scheme == Scheme::StaticBest;
      EXPECT_NE(s.link_state, channel::LinkState::Outage);
      EXPECT_GE(s.rate_bps, 0.0);
    }
  }
  EXPECT_LE(dtdd, 4u * 20u);
  EXPECT_EQ(dtdd, stat_best);
  ASSERT_TRUE(r.report.gains.has_value());
  const auto& dl = r.report.rates.at(Scheme::Dtdd)[0];
  const auto& st = r.report.rates.at(Scheme::Static)[0];
  EXPECT_DOUBLE_EQ((*r.report.gains)[0].mean, dl.mean / st.mean);
  EXPECT_EQ(r.report.half_duplex_violations, 0);
  EXPECT_LE(r.report.max_kkt_residual, 1e-6);
}

TEST(Experiment, DeterministicAcrossThreadCounts)
{
  auto a_cfg = small(4);
  a_cfg.threads = 1;
  auto b_cfg = small(4);
  b_cfg.threads = 4;
  const auto a = run_experiment(a_cfg);
  const auto b = run_experiment(b_cfg);
  EXPECT_EQ(csv_of(a), csv_of(b));
  EXPECT_EQ(summary_json(a_cfg, a)["rates"].dump(), summary_json(b_cfg, b)["rates"].dump());
  const auto c = run_experiment(a_cfg);
  EXPECT_EQ(summary_json(a_cfg, a).dump(), summary_json(a_cfg, c).dump());
}

TEST(Experiment, SeedIsolation)
{
  const auto few = run_experiment(small(2));
  const auto many = run_experiment(small(5));
  auto rows_of = [](const ExperimentResult& r, int drop) {
    std::vector<std::string> out;
    for (const auto& l : lines(csv_of(r))) {
      if (l.rfind(std::to_string(drop) + ",", 0) == 0) out.push_back(l);
    }
    return out;
  };
  for (int k = 0; k < 2; ++k) {
    EXPECT_FALSE(rows_of(few, k).empty());
    EXPECT_EQ(rows_of(few, k), rows_of(many, k));
  }
}

TEST(Experiment, DifferentSeedsDiffer)
{
  auto a = small(2);
  auto b = small(2);
  b.seed = 2;
  EXPECT_NE(csv_of(run_experiment(a)), csv_of(run_experiment(b)));
}

TEST(Experiment, DropFailuresAreRecorded)
{
  auto cfg = small(2);
  cfg.n_rn = 2;
  cfg.area_side_m = 60.0; // relays cannot be placed 50 m away on a wrapped 60 m square
  cfg.max_placement_attempts = 20;
  const auto r = run_experiment(cfg);
  EXPECT_EQ(r.report.drops_ok, 0);
  ASSERT_EQ(r.report.failures.size(), 2u);
  EXPECT_NE(r.report.failures[0].second.find("could not place relay"), std::string::npos);
  EXPECT_TRUE(validate_summary(summary_json(cfg, r)).empty());
}

TEST(Experiment, BruteForceRun)
{
  auto cfg = small(2);
  cfg.dtdd_subframes = 4;
  const auto r = run_experiment(cfg, {true, false, true, true});
  for (const auto& d : r.drops) {
    ASSERT_TRUE(d.ok) << d.error;
    EXPECT_TRUE(d.has_brute);
    EXPECT_EQ(d.brute_evaluated, 330u);
    EXPECT_GE(d.brute_utility, d.dtdd_utility - 1e-9 * std::abs(d.dtdd_utility));
    EXPECT_FALSE(d.trace.empty());
  }
  EXPECT_EQ(r.report.utility_gaps.size(), 2u);
  EXPECT_GT(r.report.mean_utility_ratio, 0.0);
}

TEST(Experiment, StaticNeedsMatchingPatterns)
{
  auto cfg = small(1);
  cfg.dtdd_subframes = 5;
  EXPECT_THROW(run_experiment(cfg), std::runtime_error);
}

TEST(Report, CsvRowCountMatchesSamples)
{
  const auto r = run_experiment(small(2));
  std::size_t samples = 0;
  for (const auto& d : r.drops) samples += d.samples.size();
  const auto ls = lines(csv_of(r));
  ASSERT_EQ(ls.size(), samples + 1);
  EXPECT_EQ(ls[0], kFlowCsvHeader);
  EXPECT_EQ(std::count(ls[1].begin(), ls[1].end(), ','), 7);
}

TEST(Report, SummaryPassesValidator)
{
  const auto cfg = small(2);
  const auto r = run_experiment(cfg);
  const auto j = summary_json(cfg, r);
  EXPECT_TRUE(validate_summary(j).empty());
  const auto round = json::parse(j.dump());
  EXPECT_TRUE(validate_summary(round).empty());
  EXPECT_EQ(round, j);

  auto broken = j;
  broken.erase("rates");
  broken["link_state_fractions"]["los"] = 1.5;
  broken["per_drop"][0].erase("ok");
  const auto errs = validate_summary(broken);
  EXPECT_EQ(errs.size(), 3u);
  EXPECT_FALSE(validate_summary(json::array()).empty());
}

TEST(Report, CdfColumnsWellFormed)
{
  const auto r = run_experiment(small(2));
  std::ostringstream os;
  write_rate_cdf(r.drops, os);
  const auto ls = lines(os.str());
  ASSERT_GT(ls.size(), 1u);
  std::string group;
  double prev_x = -1, prev_p = 0;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::istringstream row(ls[i]);
    std::string scheme, dir, xs, ps;
    std::getline(row, scheme, ',');
    std::getline(row, dir, ',');
    std::getline(row, xs, ',');
    std::getline(row, ps, ',');
    const double x = std::stod(xs), p = std::stod(ps);
    if (scheme + dir != group) {
      group = scheme + dir;
      prev_x = -1;
      prev_p = 0;
    }
    EXPECT_GE(x, prev_x);
    EXPECT_GT(p, prev_p);
    EXPECT_LE(p, 1.0);
    prev_x = x;
    prev_p = p;
  }
  std::ostringstream sinr;
  write_sinr_cdf(r.drops, sinr);
  EXPECT_EQ(lines(sinr.str())[0], "direction,sinr_db,percentile");
}

TEST(Report, EmitOutputsWritesFiles)
{
  const auto dir = std::filesystem::temp_directory_path() / "dtdd_emit_test";
  std::filesystem::remove_all(dir);
  const auto cfg = small(2);
  auto opt = ExperimentOptions::from(cfg);
  opt.trace = true;
  const auto r = run_experiment(cfg, opt);
  emit_outputs(cfg, r, dir, {true, true});
  for (const char* f : {"flows.csv", "summary.json", "rate_cdf.csv", "sinr_cdf.csv", "trace/drop_0.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "summary.json");
  EXPECT_TRUE(validate_summary(json::parse(in)).empty());

  // byte-identical on rerun
  const auto dir2 = dir.string() + "_again";
  emit_outputs(cfg, run_experiment(cfg, opt), dir2, {true, true});
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  for (const char* f : {"flows.csv", "summary.json", "rate_cdf.csv"}) EXPECT_EQ(slurp(dir / f), slurp(dir2 + "/" + f));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST(Report, IoErrorsNamePath)
{
  const auto file = std::filesystem::temp_directory_path() / "dtdd_not_a_dir";
  std::ofstream(file) << "x";
  const auto cfg = small(1);
  const auto r = run_experiment(cfg);
  try {
    emit_outputs(cfg, r, file / "out");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("dtdd_not_a_dir"), std::string::npos);
  }
  std::filesystem::remove(file);
}

TEST(Report, TopologyJson)
{
  ScenarioConfig cfg;
  auto rng = drop_rng(1, 0);
  const auto topo = build_topology(cfg, rng);
  const auto j = topology_json(topo);
  EXPECT_EQ(j["nodes"].size(), topo.nodes().size());
  EXPECT_EQ(j["links"].size(), topo.links().size());
  EXPECT_EQ(j["flows"].size(), topo.flows().size());
  EXPECT_EQ(j["nodes"][0]["kind"], "BS");
}

TEST(Report, FormatDouble)
{
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(std::stod(format_double(1e9)), 1e9);
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
}

} // namespace
