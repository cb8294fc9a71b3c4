#pragma once

// Comparison anchors: the static LTE TDD relay sweep and exhaustive search.

#include <dtdd/config.hpp>
#include <dtdd/num_core.hpp>
#include <dtdd/scheduler.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtdd {

// ---------------------------------------------------------------- patterns

enum class SubframeType : char
{
  D = 'D',
  U = 'U',
  S = 'S',
};

struct BackhaulMask
{
  std::string name;
  std::vector<int> dl; // frame positions with BS -> RN transmission
  std::vector<int> ul; // frame positions with RN -> BS transmission
};

struct StaticPattern
{
  std::string name;
  std::vector<SubframeType> subframes;
  std::vector<BackhaulMask> masks;

  int usable() const
  {
    int n = 0;
    for (auto s : subframes) n += s != SubframeType::S ? 1 : 0;
    return n;
  }
};

class PatternError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Built-in table. LTE TDD UL/DL configurations with relay backhaul subframe
/// sets; the masks follow the LTE relay tables approximately. Edit freely.
inline constexpr const char* kDefaultPatterns = R"(# LTE TDD UL/DL configurations, frame positions 0..9.
# A pattern line is NAME followed by one D/U/S letter per subframe.
# Mask lines attach backhaul subframe sets to the pattern above them:
#   mask NAME dl=i,j ul=k
# dl positions must be D, ul positions must be U. Either list may be empty.
cfg0 D S U U U D S U U U
cfg1 D S U U D D S U U D
mask bh0 dl=9 ul=8
mask bh1 dl=4 ul=3
mask bh2 dl=4,9 ul=3,8
mask bh3 dl=4,9 ul=3
mask bh4 dl=4,9 ul=8
cfg2 D S U D D D S U D D
mask bh5 dl=8 ul=2
mask bh6 dl=3 ul=7
mask bh7 dl=3,8 ul=2,7
mask bh8 dl=3,8 ul=2
mask bh9 dl=3,8 ul=7
mask bh10 dl=3,4,8 ul=2,7
mask bh11 dl=3,8,9 ul=2,7
cfg3 D S U U U D D D D D
mask bh12 dl=7 ul=3
mask bh13 dl=8 ul=4
mask bh14 dl=7,9 ul=3
mask bh15 dl=7,8 ul=3,4
cfg4 D S U U D D D D D D
mask bh16 dl=8 ul=2
mask bh17 dl=9 ul=3
mask bh18 dl=8,9 ul=2,3
mask bh19 dl=4,8 ul=2
cfg5 D S U D D D D D D D
cfg6 D S U U U D S U U D
mask bh20 dl=9 ul=3
mask bh21 dl=9 ul=4
mask bh22 dl=9 ul=3,7
)";

namespace detail {

inline std::vector<int> parse_index_list(const std::string& text, int line_no)
{
  std::vector<int> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw PatternError("line " + std::to_string(line_no) + ": bad subframe index '" + item + "'");
    }
  }
  return out;
}

} // namespace detail

inline std::vector<StaticPattern> parse_patterns(std::istream& in)
{
  std::vector<StaticPattern> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    auto fail = [&](const std::string& msg) { throw PatternError("line " + std::to_string(line_no) + ": " + msg); };

    if (head == "mask") {
      if (out.empty()) fail("mask before any pattern");
      BackhaulMask m;
      if (!(ls >> m.name)) fail("mask needs a name");
      bool seen_dl = false;
      bool seen_ul = false;
      std::string field;
      while (ls >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) fail("expected dl=... or ul=..., got '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "dl" && !seen_dl) {
          m.dl = detail::parse_index_list(value, line_no);
          seen_dl = true;
        } else if (key == "ul" && !seen_ul) {
          m.ul = detail::parse_index_list(value, line_no);
          seen_ul = true;
        } else {
          fail("unexpected mask field '" + key + "'");
        }
      }
      for (const auto& other : out.back().masks) {
        if (other.name == m.name) fail("duplicate mask '" + m.name + "'");
      }
      out.back().masks.push_back(std::move(m));
      continue;
    }

    StaticPattern p;
    p.name = head;
    std::string tok;
    while (ls >> tok) {
      for (char c : tok) {
        if (c == 'D' || c == 'U' || c == 'S') p.subframes.push_back(static_cast<SubframeType>(c));
        else fail(std::string("bad subframe letter '") + c + "'");
      }
    }
    if (p.subframes.empty()) fail("pattern '" + p.name + "' has no subframes");
    for (const auto& other : out) {
      if (other.name == p.name) fail("duplicate pattern '" + p.name + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<StaticPattern> parse_patterns(const std::string& text)
{
  std::istringstream in(text);
  return parse_patterns(in);
}

inline std::vector<StaticPattern> load_patterns(const std::string& path)
{
  if (path.empty()) return parse_patterns(std::string(kDefaultPatterns));
  std::ifstream in(path);
  if (!in) throw PatternError("cannot open pattern file " + path);
  try {
    return parse_patterns(in);
  } catch (const PatternError& e) {
    throw PatternError(path + ": " + e.what());
  }
}

/// Reason a (pattern, mask) pair is not a valid combination, if any.
inline std::optional<std::string> mask_error(const StaticPattern& p, const BackhaulMask& m)
{
  const int n = static_cast<int>(p.subframes.size());
  for (int t : m.dl) {
    if (t >= n) return "dl index " + std::to_string(t) + " out of range";
    if (p.subframes[static_cast<std::size_t>(t)] != SubframeType::D) {
      return "dl backhaul in non-D subframe " + std::to_string(t);
    }
  }
  for (int t : m.ul) {
    if (t >= n) return "ul index " + std::to_string(t) + " out of range";
    if (p.subframes[static_cast<std::size_t>(t)] != SubframeType::U) {
      return "ul backhaul in non-U subframe " + std::to_string(t);
    }
  }
  return std::nullopt;
}

/// Node modes for a pattern and mask. S subframes are muted everywhere and so
/// carry no columns. In D subframes the BS transmits and each RN either
/// receives backhaul (masked) or serves its UEs; U subframes mirror this.
inline DuplexSchedule expand_pattern(const StaticPattern& p, const BackhaulMask& m, int n_rn)
{
  if (auto err = mask_error(p, m)) throw PatternError(p.name + "/" + m.name + ": " + *err);
  const int usable = p.usable();
  if (usable < 1) throw PatternError(p.name + " has no usable subframes");
  DuplexSchedule x(n_rn + 1, usable);
  auto contains = [](const std::vector<int>& v, int t) { return std::find(v.begin(), v.end(), t) != v.end(); };
  int col = 0;
  for (int t = 0; t < static_cast<int>(p.subframes.size()); ++t) {
    const auto kind = p.subframes[static_cast<std::size_t>(t)];
    if (kind == SubframeType::S) continue;
    if (kind == SubframeType::D) {
      x.set(0, col, Mode::Tx);
      for (int r = 1; r <= n_rn; ++r) x.set(r, col, contains(m.dl, t) ? Mode::Rx : Mode::Tx);
    } else {
      x.set(0, col, Mode::Rx);
      for (int r = 1; r <= n_rn; ++r) x.set(r, col, contains(m.ul, t) ? Mode::Tx : Mode::Rx);
    }
    ++col;
  }
  return x;
}

struct StaticConfig
{
  std::string pattern;
  std::string mask;
  DuplexSchedule schedule;
};

struct StaticSweep
{
  std::vector<StaticConfig> configs;
  std::vector<std::string> rejected; // "pattern/mask: reason"
};

/// Every valid (pattern, mask) pair whose usable subframe count equals
/// `n_subframes`, in file order.
inline StaticSweep enumerate_static_configs(const std::vector<StaticPattern>& patterns, int n_rn, int n_subframes)
{
  StaticSweep out;
  for (const auto& p : patterns) {
    if (p.usable() != n_subframes) continue;
    for (const auto& m : p.masks) {
      if (auto err = mask_error(p, m)) {
        out.rejected.push_back(p.name + "/" + m.name + ": " + *err);
        continue;
      }
      out.configs.push_back({p.name, m.name, expand_pattern(p, m, n_rn)});
    }
  }
  return out;
}

inline StaticSweep enumerate_static_configs(const std::string& pattern_file, int n_rn, int n_subframes)
{
  return enumerate_static_configs(load_patterns(pattern_file), n_rn, n_subframes);
}

struct StaticResult
{
  std::size_t best = 0;
  std::vector<double> utilities;      // per config, in sweep order
  std::vector<Allocation> allocations; // per config
  const Allocation& best_allocation() const { return allocations.at(best); }
};

/// Solve every configuration; ties go to the earliest in sweep order.
inline StaticResult best_static(const Topology& topo, const std::vector<StaticConfig>& configs, double w_max,
                                const SolverSettings& solver)
{
  if (configs.empty()) throw std::invalid_argument("best_static needs at least one configuration");
  StaticResult out;
  double best_u = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    out.allocations.push_back(solve_schedule(topo, configs[i].schedule, w_max, solver));
    const double u = out.allocations.back().utility;
    out.utilities.push_back(u);
    if (u > best_u) {
      best_u = u;
      out.best = i;
    }
  }
  return out;
}

// ------------------------------------------------------------- brute force

/// C(2^(n_rn+1) + n_subframes - 1, n_subframes): multisets of per-subframe
/// mode vectors.
inline std::uint64_t count_unique(int n_subframes, int n_rn)
{
  if (n_subframes < 0 || n_rn < 0) throw std::invalid_argument("count_unique needs non-negative inputs");
  if (n_rn + 1 >= 63) throw std::overflow_error("count_unique: too many rows");
  const std::uint64_t codes = std::uint64_t{1} << (n_rn + 1);
  const std::uint64_t n = codes + static_cast<std::uint64_t>(n_subframes) - 1;
  const std::uint64_t k = static_cast<std::uint64_t>(n_subframes);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) is divisible by i at every step
    const unsigned __int128 wide = static_cast<unsigned __int128>(result) * (n - k + i) / i;
    if (wide > std::numeric_limits<std::uint64_t>::max()) throw std::overflow_error("count_unique overflow");
    result = static_cast<std::uint64_t>(wide);
  }
  return result;
}

constexpr int kBruteForceMaxCells = 16;

struct BruteForceResult
{
  DuplexSchedule schedule;
  double utility = -std::numeric_limits<double>::infinity();
  std::uint64_t evaluated = 0; // schedules visited
  int solver_calls = 0;
  int half_duplex_violations = 0;
  Allocation allocation;
};

/// Exhaustive search over BS/RN mode matrices. The reduced form visits one
/// representative per column multiset (non-decreasing column codes); the
/// unreduced form visits all 2^(n_sf * rows) matrices. Ties keep the first
/// schedule in enumeration order.
inline BruteForceResult brute_force(const Topology& topo, int n_subframes, double w_max, const SolverSettings& solver,
                                    bool reduced = true, int max_cells = kBruteForceMaxCells)
{
  const int rows = topo.n_infrastructure();
  if (n_subframes < 1) throw std::invalid_argument("brute force needs at least one subframe");
  if (n_subframes * rows > max_cells) {
    throw std::invalid_argument("brute force refused: " + std::to_string(n_subframes) + " subframes x " +
                                std::to_string(rows) + " rows exceeds " + std::to_string(max_cells) +
                                " cells");
  }
  const std::uint32_t n_codes = 1u << rows;
  BruteForceResult out;
  Evaluator eval(topo, w_max, solver);
  std::vector<std::uint32_t> codes(static_cast<std::size_t>(n_subframes), 0);

  auto visit = [&] {
    DuplexSchedule x(rows, n_subframes);
    for (int t = 0; t < n_subframes; ++t) {
      for (int r = 0; r < rows; ++r) x.set(r, t, (codes[static_cast<std::size_t>(t)] >> r) & 1u ? Mode::Tx : Mode::Rx);
    }
    ++out.evaluated;
    const auto res = eval.evaluate(x);
    if (res.utility > out.utility || out.evaluated == 1) {
      out.utility = res.utility;
      out.schedule = std::move(x);
    }
  };

  // odometer over the code sequence, last subframe fastest
  while (true) {
    visit();
    int i = n_subframes - 1;
    while (i >= 0 && codes[static_cast<std::size_t>(i)] == n_codes - 1) --i;
    if (i < 0) break;
    const std::uint32_t next = codes[static_cast<std::size_t>(i)] + 1;
    codes[static_cast<std::size_t>(i)] = next;
    for (int j = i + 1; j < n_subframes; ++j) codes[static_cast<std::size_t>(j)] = reduced ? next : 0;
  }

  out.solver_calls = eval.solver_calls();
  out.half_duplex_violations = eval.half_duplex_violations_seen();
  out.allocation = solve_schedule(topo, out.schedule, w_max, solver);
  return out;
}

} // namespace dtdd
