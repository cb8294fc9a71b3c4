#pragma once

// Scenario configuration. Stored on disk as INI (sections of key = value);
// unknown sections or keys are rejected so typos never fall back to defaults.

#include <dtdd/channel.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dtdd {

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class InitialPattern
{
  Alternating,
  DlBiased,
};

enum class ReallocBase
{
  AsListed,  // RN realloc starts from the incumbent schedule
  Candidate, // RN realloc starts from the parent's candidate schedule
};

struct SolverSettings
{
  double tolerance = 1e-7;   // KKT residual required to report convergence
  int max_iterations = 400;  // Newton steps, all barrier stages together
  double rate_floor = 1.0;   // bits/s
};

struct SchedulerSettings
{
  int max_passes = 16;
  InitialPattern initial_pattern = InitialPattern::Alternating;
  ReallocBase realloc_base = ReallocBase::AsListed;
  double improvement_epsilon = 1e-9; // relative
};

struct ScenarioConfig
{
  // radio
  channel::RadioConfig bs_radio{30.0, 64, 5.0};
  channel::RadioConfig rn_radio{30.0, 64, 5.0};
  channel::RadioConfig ue_radio{20.0, 16, 7.0};

  // channel
  channel::ChannelParams channel{};

  // frame
  double frame_ms = 10.0;
  double subframe_ms = 1.0;
  int dtdd_subframes = 8; // usable subframes given to the dynamic scheduler
  std::string pattern_file; // empty: built-in LTE pattern table

  // deployment
  double area_side_m = 400.0;
  double min_bs_rn_distance_m = 50.0;
  int n_rn = 2;
  int n_ue = 10;
  int max_placement_attempts = 10000;

  // experiment
  int drops = 25;
  std::uint64_t seed = 1;
  int threads = 0; // 0: hardware concurrency
  bool run_dtdd = true;
  bool run_static = true;
  bool run_brute = false;

  SolverSettings solver{};
  SchedulerSettings scheduler{};

  int frame_subframes() const { return static_cast<int>(std::lround(frame_ms / subframe_ms)); }
};

inline void validate(const ScenarioConfig& c)
{
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  for (const auto* r : {&c.bs_radio, &c.rn_radio, &c.ue_radio}) {
    require(channel::is_valid(*r), "antenna counts must be positive perfect squares");
  }
  require(c.channel.los.sigma >= 0 && c.channel.nlos.sigma >= 0, "sigma >= 0");
  require(c.channel.los.beta > 0 && c.channel.nlos.beta > 0, "beta > 0");
  require(c.channel.state.a_out > 0 && c.channel.state.a_los > 0, "a_out, a_los > 0");
  require(c.channel.rate.eta > 0 && c.channel.rate.eta <= 1, "0 < eta <= 1");
  require(c.channel.rate.w_max_hz > 0, "bandwidth > 0");
  require(c.frame_ms > 0 && c.subframe_ms > 0, "frame and subframe periods > 0");
  require(c.frame_subframes() >= 1, "at least one subframe per frame");
  require(c.dtdd_subframes >= 2, "dtdd_subframes >= 2");
  require(c.area_side_m > 0, "area_side > 0");
  require(c.n_rn >= 0 && c.n_ue >= 0, "node counts >= 0");
  require(c.drops >= 1, "drops >= 1");
  require(c.threads >= 0, "threads >= 0");
  require(c.solver.tolerance > 0 && c.solver.rate_floor > 0, "solver tolerance and rate floor > 0");
  require(c.solver.max_iterations >= 1, "solver max_iterations >= 1");
  require(c.scheduler.max_passes >= 1, "scheduler max_passes >= 1");
}

namespace detail {

inline bool parse_bool(const std::string& v)
{
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v)
{
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !(is >> std::ws).eof()) {
    throw ConfigError("bad value for '" + key + "': '" + v + "'");
  }
  return out;
}

} // namespace detail

/// Parse INI text. `base_dir` resolves a relative pattern_file.
inline ScenarioConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {})
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  ScenarioConfig c;
  using Setter = std::function<void(const std::string&)>;
  std::map<std::string, std::map<std::string, Setter>> keys;

  auto num = [](auto& field) {
    return [&field](const std::string& v) {
      field = detail::parse_number<std::decay_t<decltype(field)>>("value", v);
    };
  };

  auto radio = [&](const std::string& prefix, channel::RadioConfig& r) {
    keys["radio"][prefix + "_tx_power_dbm"] = num(r.tx_power_dbm);
    keys["radio"][prefix + "_antennas"] = num(r.n_antennas);
    keys["radio"][prefix + "_noise_figure_db"] = num(r.noise_figure_db);
  };
  radio("bs", c.bs_radio);
  radio("rn", c.rn_radio);
  radio("ue", c.ue_radio);

  auto& ch = keys["channel"];
  ch["bandwidth_hz"] = num(c.channel.rate.w_max_hz);
  ch["carrier_hz"] = num(c.channel.rate.carrier_hz);
  ch["eta"] = num(c.channel.rate.eta);
  ch["delta_loss_db"] = num(c.channel.rate.delta_loss_db);
  ch["los_alpha"] = num(c.channel.los.alpha);
  ch["los_beta"] = num(c.channel.los.beta);
  ch["los_sigma"] = num(c.channel.los.sigma);
  ch["nlos_alpha"] = num(c.channel.nlos.alpha);
  ch["nlos_beta"] = num(c.channel.nlos.beta);
  ch["nlos_sigma"] = num(c.channel.nlos.sigma);
  ch["a_out"] = num(c.channel.state.a_out);
  ch["b_out"] = num(c.channel.state.b_out);
  ch["a_los"] = num(c.channel.state.a_los);

  auto& fr = keys["frame"];
  fr["frame_ms"] = num(c.frame_ms);
  fr["subframe_ms"] = num(c.subframe_ms);
  fr["dtdd_subframes"] = num(c.dtdd_subframes);
  fr["pattern_file"] = [&](const std::string& v) {
    std::filesystem::path p(v);
    c.pattern_file = (p.is_relative() && !base_dir.empty()) ? (base_dir / p).string() : v;
  };

  auto& dep = keys["deployment"];
  dep["area_side_m"] = num(c.area_side_m);
  dep["min_bs_rn_distance_m"] = num(c.min_bs_rn_distance_m);
  dep["n_rn"] = num(c.n_rn);
  dep["n_ue"] = num(c.n_ue);
  dep["max_placement_attempts"] = num(c.max_placement_attempts);

  auto& ex = keys["experiment"];
  ex["drops"] = num(c.drops);
  ex["seed"] = num(c.seed);
  ex["threads"] = num(c.threads);
  ex["dtdd"] = [&](const std::string& v) { c.run_dtdd = detail::parse_bool(v); };
  ex["static"] = [&](const std::string& v) { c.run_static = detail::parse_bool(v); };
  ex["brute_force"] = [&](const std::string& v) { c.run_brute = detail::parse_bool(v); };

  auto& so = keys["solver"];
  so["tolerance"] = num(c.solver.tolerance);
  so["max_iterations"] = num(c.solver.max_iterations);
  so["rate_floor_bps"] = num(c.solver.rate_floor);

  auto& sc = keys["scheduler"];
  sc["max_passes"] = num(c.scheduler.max_passes);
  sc["improvement_epsilon"] = num(c.scheduler.improvement_epsilon);
  sc["initial_pattern"] = [&](const std::string& v) {
    if (v == "alternating") c.scheduler.initial_pattern = InitialPattern::Alternating;
    else if (v == "dl_biased") c.scheduler.initial_pattern = InitialPattern::DlBiased;
    else throw ConfigError("unknown initial_pattern '" + v + "'");
  };
  sc["realloc_base"] = [&](const std::string& v) {
    if (v == "as_listed") c.scheduler.realloc_base = ReallocBase::AsListed;
    else if (v == "candidate") c.scheduler.realloc_base = ReallocBase::Candidate;
    else throw ConfigError("unknown realloc_base '" + v + "'");
  };

  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty()) {
      throw ConfigError("key '" + section + "' outside of a section");
    }
    auto sit = keys.find(section);
    if (sit == keys.end()) {
      throw ConfigError("unknown config section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      auto kit = sit->second.find(key);
      if (kit == sit->second.end()) {
        throw ConfigError("unknown config key '" + section + "." + key + "'");
      }
      try {
        kit->second(value.data());
      } catch (const ConfigError& e) {
        throw ConfigError("config key '" + section + "." + key + "': " + e.what());
      }
    }
  }
  validate(c);
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  return parse_config(in, path.parent_path());
}

} // namespace dtdd
