#pragma once

// Result files: per-flow CSV, summary JSON, rate and SINR CDFs, topology dumps.

#include <dtdd/experiment.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtdd {

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

using json = nlohmann::json;

/// Shortest round-trip text for a double; "nan", "inf", "-inf" otherwise.
inline std::string format_double(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("double formatting failed");
  return std::string(buf, end);
}

inline std::string_view direction_label(Direction d) { return d == Direction::Dl ? "dl" : "ul"; }

// ------------------------------------------------------------------- CSV

inline constexpr const char* kFlowCsvHeader = "drop,ue,direction,scheme,rate_bps,sinr_db,link_state,config";

inline void write_flow_csv(const std::vector<DropResult>& drops, std::ostream& os)
{
  os << kFlowCsvHeader << '\n';
  for (const auto& d : drops) {
    for (const auto& s : d.samples) {
      os << s.drop << ',' << s.ue << ',' << direction_label(s.direction) << ',' << to_string(s.scheme) << ','
         << format_double(s.rate_bps) << ',' << format_double(s.sinr_db) << ',' << channel::to_string(s.link_state)
         << ',' << s.config << '\n';
    }
  }
}

/// Empirical CDF of flow rates per scheme and direction.
inline void write_rate_cdf(const std::vector<DropResult>& drops, std::ostream& os)
{
  os << "scheme,direction,rate_bps,percentile\n";
  for (Scheme scheme : kSchemes) {
    for (Direction dir : {Direction::Dl, Direction::Ul}) {
      std::vector<double> v;
      for (const auto& d : drops) {
        if (!d.ok) continue;
        for (const auto& s : d.samples) {
          if (s.scheme == scheme && s.direction == dir) v.push_back(s.rate_bps);
        }
      }
      for (const auto& [x, p] : empirical_cdf(std::move(v))) {
        os << to_string(scheme) << ',' << direction_label(dir) << ',' << format_double(x) << ',' << format_double(p)
           << '\n';
      }
    }
  }
}

/// Access-link SINR CDF over non-outage UEs.
inline void write_sinr_cdf(const std::vector<DropResult>& drops, std::ostream& os)
{
  os << "direction,sinr_db,percentile\n";
  for (Direction dir : {Direction::Dl, Direction::Ul}) {
    std::vector<double> v;
    for (const auto& d : drops) {
      if (!d.ok) continue;
      const auto& src = dir == Direction::Dl ? d.sinr_dl : d.sinr_ul;
      v.insert(v.end(), src.begin(), src.end());
    }
    for (const auto& [x, p] : empirical_cdf(std::move(v))) {
      os << direction_label(dir) << ',' << format_double(x) << ',' << format_double(p) << '\n';
    }
  }
}

// ------------------------------------------------------------------ JSON

namespace detail {

// JSON has no NaN or infinity; those become null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json stats_json(const RateStats& s)
{
  if (s.empty()) return json{{"count", 0}, {"empty", true}};
  return json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"edge", s.edge}};
}

} // namespace detail

inline json scenario_json(const ScenarioConfig& cfg)
{
  return json{{"n_rn", cfg.n_rn},
              {"n_ue", cfg.n_ue},
              {"drops", cfg.drops},
              {"seed", cfg.seed},
              {"area_side_m", cfg.area_side_m},
              {"frame_subframes", cfg.frame_subframes()},
              {"dtdd_subframes", cfg.dtdd_subframes},
              {"bandwidth_hz", cfg.channel.rate.w_max_hz}};
}

inline json drop_json(const DropResult& d)
{
  json j{{"drop", d.drop}, {"ok", d.ok}};
  if (!d.ok) {
    j["error"] = d.error;
    return j;
  }
  j["ue"] = {{"total", d.n_ue}, {"los", d.n_los}, {"nlos", d.n_nlos}, {"outage", d.n_outage}};
  if (d.has_dtdd) {
    j["dtdd"] = {{"utility", detail::num(d.dtdd_utility)},
                 {"initial_utility", detail::num(d.dtdd_initial_utility)},
                 {"inner_calls", d.inner_calls},
                 {"evaluations", d.evaluations},
                 {"accepted_moves", d.accepted_moves},
                 {"schedule", d.dtdd_schedule}};
  }
  if (d.has_static) {
    j["static"] = {{"configs", d.static_configs},
                   {"mean_utility", detail::num(d.static_mean_utility)},
                   {"best_utility", detail::num(d.static_best_utility)},
                   {"best", d.static_best_name}};
  }
  if (d.has_brute) {
    j["brute"] = {{"utility", detail::num(d.brute_utility)},
                  {"evaluated", d.brute_evaluated},
                  {"solver_calls", d.brute_solver_calls},
                  {"schedule", d.brute_schedule}};
    if (d.has_dtdd) j["brute"]["gap"] = detail::num(d.brute_utility - d.dtdd_utility);
  }
  return j;
}

inline json summary_json(const ScenarioConfig& cfg, const ExperimentResult& res)
{
  const auto& r = res.report;
  json j;
  j["format"] = "mmw-dtdd-summary";
  j["version"] = 1;
  j["scenario"] = scenario_json(cfg);

  json failures = json::array();
  for (const auto& [drop, err] : r.failures) failures.push_back({{"drop", drop}, {"error", err}});
  j["drops"] = {{"requested", r.drops_requested}, {"ok", r.drops_ok}, {"failures", failures}};
  j["link_state_fractions"] = {{"los", r.frac_los}, {"nlos", r.frac_nlos}, {"outage", r.frac_outage}};

  json rates = json::object();
  for (const auto& [scheme, dirs] : r.rates) {
    rates[std::string(to_string(scheme))] = {{"dl", detail::stats_json(dirs[0])}, {"ul", detail::stats_json(dirs[1])}};
  }
  j["rates"] = rates;

  if (r.gains) {
    json g;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& x = (*r.gains)[k];
      g[k == 0 ? "dl" : "ul"] = {{"mean", detail::num(x.mean)}, {"median", detail::num(x.median)},
                                 {"edge", detail::num(x.edge)}};
    }
    j["gains"] = g;
  } else {
    j["gains"] = nullptr;
  }

  json util = json::object();
  for (const auto& [scheme, u] : r.mean_utility) util[std::string(to_string(scheme))] = detail::num(u);
  j["mean_utility"] = util;

  j["search"] = {{"mean_inner_calls", r.mean_inner_calls},
                 {"max_inner_calls", r.max_inner_calls},
                 {"mean_evaluations", r.mean_evaluations},
                 {"mean_accepted_moves", r.mean_accepted_moves}};
  json gaps = json::array();
  for (double g : r.utility_gaps) gaps.push_back(detail::num(g));
  j["brute"] = {{"mean_evaluated", r.mean_brute_evaluated},
                {"mean_utility_ratio", detail::num(r.mean_utility_ratio)},
                {"gaps", gaps}};
  j["checks"] = {{"half_duplex_violations", r.half_duplex_violations},
                 {"unconverged_solves", r.unconverged_solves},
                 {"max_kkt_residual", r.max_kkt_residual},
                 {"starved_flows", r.starved_flows}};

  json per_drop = json::array();
  for (const auto& d : res.drops) per_drop.push_back(drop_json(d));
  j["per_drop"] = per_drop;
  return j;
}

/// Structural check of a summary document. Returns the problems found.
inline std::vector<std::string> validate_summary(const json& j)
{
  std::vector<std::string> errs;
  auto need = [&](const json& obj, const std::string& path, const char* key, auto pred, const char* what) {
    if (!obj.is_object() || !obj.contains(key)) {
      errs.push_back(path + "." + key + ": missing");
      return false;
    }
    if (!pred(obj.at(key))) {
      errs.push_back(path + "." + key + ": expected " + what);
      return false;
    }
    return true;
  };
  auto is_obj = [](const json& v) { return v.is_object(); };
  auto is_arr = [](const json& v) { return v.is_array(); };
  auto is_num = [](const json& v) { return v.is_number(); };
  auto is_uint = [](const json& v) { return v.is_number_integer() && v.get<std::int64_t>() >= 0; };
  auto is_num_or_null = [](const json& v) { return v.is_number() || v.is_null(); };
  auto is_frac = [](const json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; };

  if (!j.is_object()) return {"document: expected object"};
  if (need(j, "$", "format", [](const json& v) { return v.is_string(); }, "string") &&
      j["format"] != "mmw-dtdd-summary") {
    errs.push_back("$.format: unexpected value");
  }
  need(j, "$", "version", is_uint, "non-negative integer");
  if (need(j, "$", "scenario", is_obj, "object")) {
    for (const char* k : {"n_rn", "n_ue", "drops", "seed", "frame_subframes", "dtdd_subframes"}) {
      need(j["scenario"], "$.scenario", k, is_uint, "non-negative integer");
    }
  }
  if (need(j, "$", "drops", is_obj, "object")) {
    need(j["drops"], "$.drops", "requested", is_uint, "non-negative integer");
    need(j["drops"], "$.drops", "ok", is_uint, "non-negative integer");
    need(j["drops"], "$.drops", "failures", is_arr, "array");
  }
  if (need(j, "$", "link_state_fractions", is_obj, "object")) {
    for (const char* k : {"los", "nlos", "outage"}) need(j["link_state_fractions"], "$.link_state_fractions", k, is_frac, "fraction");
  }
  if (need(j, "$", "rates", is_obj, "object")) {
    for (const auto& [scheme, dirs] : j["rates"].items()) {
      if (!scheme_from_string(scheme)) errs.push_back("$.rates." + scheme + ": unknown scheme");
      for (const char* dir : {"dl", "ul"}) {
        const std::string path = "$.rates." + scheme;
        if (!need(dirs, path, dir, is_obj, "object")) continue;
        const auto& s = dirs[dir];
        if (!need(s, path + "." + dir, "count", is_uint, "non-negative integer")) continue;
        if (s["count"].get<std::int64_t>() == 0) continue;
        for (const char* k : {"mean", "median", "edge"}) need(s, path + "." + dir, k, is_num, "number");
      }
    }
  }
  if (!j.contains("gains")) {
    errs.push_back("$.gains: missing");
  } else if (!j["gains"].is_null()) {
    for (const char* dir : {"dl", "ul"}) {
      if (!need(j["gains"], "$.gains", dir, is_obj, "object")) continue;
      for (const char* k : {"mean", "median", "edge"}) need(j["gains"][dir], std::string("$.gains.") + dir, k, is_num_or_null, "number or null");
    }
  }
  need(j, "$", "mean_utility", is_obj, "object");
  if (need(j, "$", "search", is_obj, "object")) {
    for (const char* k : {"mean_inner_calls", "mean_evaluations", "mean_accepted_moves"}) need(j["search"], "$.search", k, is_num, "number");
    need(j["search"], "$.search", "max_inner_calls", is_uint, "non-negative integer");
  }
  if (need(j, "$", "brute", is_obj, "object")) {
    need(j["brute"], "$.brute", "mean_evaluated", is_num, "number");
    need(j["brute"], "$.brute", "mean_utility_ratio", is_num_or_null, "number or null");
    need(j["brute"], "$.brute", "gaps", is_arr, "array");
  }
  if (need(j, "$", "checks", is_obj, "object")) {
    for (const char* k : {"half_duplex_violations", "unconverged_solves", "starved_flows"}) need(j["checks"], "$.checks", k, is_uint, "non-negative integer");
    need(j["checks"], "$.checks", "max_kkt_residual", is_num, "number");
  }
  if (need(j, "$", "per_drop", is_arr, "array")) {
    for (std::size_t i = 0; i < j["per_drop"].size(); ++i) {
      const auto& d = j["per_drop"][i];
      const std::string path = "$.per_drop[" + std::to_string(i) + "]";
      need(d, path, "drop", is_uint, "non-negative integer");
      need(d, path, "ok", [](const json& v) { return v.is_boolean(); }, "boolean");
    }
  }
  return errs;
}

// -------------------------------------------------------------- topology

inline json topology_json(const Topology& topo)
{
  json nodes = json::array();
  for (const auto& n : topo.nodes()) {
    json jn{{"id", n.id},
            {"kind", to_string(n.kind)},
            {"x_m", n.position.x},
            {"y_m", n.position.y},
            {"parent", topo.parent(n.id)}};
    if (n.kind == NodeKind::Ue) jn["state"] = channel::to_string(topo.serving_state(n.id));
    nodes.push_back(jn);
  }
  json links = json::array();
  for (const auto& l : topo.links()) {
    links.push_back({{"id", l.id},
                     {"tx", l.tx},
                     {"rx", l.rx},
                     {"direction", direction_label(l.direction)},
                     {"state", channel::to_string(l.state)},
                     {"path_loss_db", l.budget.path_loss_db},
                     {"bf_gain_db", l.budget.bf_gain_db},
                     {"rx_power_dbm", l.budget.rx_power_dbm},
                     {"interference_mw", l.budget.interference_mw},
                     {"noise_mw", l.budget.noise_mw},
                     {"sinr_db", detail::num(l.budget.sinr_db)},
                     {"spectral_efficiency", l.budget.spectral_efficiency}});
  }
  json flows = json::array();
  for (const auto& f : topo.flows()) {
    flows.push_back({{"id", f.id}, {"ue", f.ue}, {"direction", direction_label(f.direction)}, {"path", f.path}});
  }
  return json{{"nodes", nodes}, {"links", links}, {"flows", flows}};
}

inline json allocation_json(const Topology& topo, const Allocation& a, double per_frame)
{
  json rates = json::array();
  for (const auto& f : topo.flows()) {
    rates.push_back({{"flow", f.id},
                     {"ue", f.ue},
                     {"direction", direction_label(f.direction)},
                     {"rate_bps", a.flow_rates.at(static_cast<std::size_t>(f.id)) / per_frame}});
  }
  return json{{"utility", detail::num(a.utility)},
              {"converged", a.converged},
              {"kkt_residual", a.kkt_residual},
              {"flows", rates}};
}

// ------------------------------------------------------------------ files

inline std::ofstream open_output(const std::filesystem::path& path)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

inline void finish_output(std::ofstream& os, const std::filesystem::path& path)
{
  os.flush();
  if (!os) throw IoError("write failed: " + path.string());
}

inline void ensure_directory(const std::filesystem::path& dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (!std::filesystem::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
}

inline void write_json_file(const json& j, const std::filesystem::path& path)
{
  auto os = open_output(path);
  os << j.dump(2) << '\n';
  finish_output(os, path);
}

struct OutputOptions
{
  bool cdf = true;
  bool trace = false;
};

/// Writes flows.csv, summary.json, and optionally rate_cdf.csv, sinr_cdf.csv
/// and one move trace per drop under trace/.
inline void emit_outputs(const ScenarioConfig& cfg, const ExperimentResult& res, const std::filesystem::path& dir,
                         const OutputOptions& opt = {})
{
  ensure_directory(dir);
  {
    const auto p = dir / "flows.csv";
    auto os = open_output(p);
    write_flow_csv(res.drops, os);
    finish_output(os, p);
  }
  write_json_file(summary_json(cfg, res), dir / "summary.json");
  if (opt.cdf) {
    const auto p = dir / "rate_cdf.csv";
    auto os = open_output(p);
    write_rate_cdf(res.drops, os);
    finish_output(os, p);
    const auto q = dir / "sinr_cdf.csv";
    auto os2 = open_output(q);
    write_sinr_cdf(res.drops, os2);
    finish_output(os2, q);
  }
  if (opt.trace) {
    ensure_directory(dir / "trace");
    for (const auto& d : res.drops) {
      if (d.trace.empty()) continue;
      const auto p = dir / "trace" / ("drop_" + std::to_string(d.drop) + ".txt");
      auto os = open_output(p);
      os << d.trace;
      finish_output(os, p);
    }
  }
}

} // namespace dtdd
