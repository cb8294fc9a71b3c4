#pragma once

// Summary statistics over flow-rate samples.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dtdd {

struct RateStats
{
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double edge = 0.0; // mean of the lowest 5%
  bool empty() const { return count == 0; }
};

/// Number of samples in the lowest 5%: ceil(n / 20), at least one.
inline std::size_t edge_count(std::size_t n) { return (5 * n + 99) / 100; }

/// Linear-interpolation quantile on sorted data, q in [0, 1].
inline double quantile_sorted(const std::vector<double>& sorted, double q)
{
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline RateStats compute_metrics(std::vector<double> samples)
{
  RateStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  s.median = quantile_sorted(samples, 0.5);
  const std::size_t k = edge_count(samples.size());
  s.edge = std::accumulate(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
           static_cast<double>(k);
  return s;
}

/// Empirical CDF: sorted values with percentile i / n (1-based rank).
inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> samples)
{
  std::sort(samples.begin(), samples.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(samples.size());
  const double n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.emplace_back(samples[i], static_cast<double>(i + 1) / n);
  return out;
}

/// a / b, or NaN when the base is zero.
inline double ratio(double a, double b) { return b != 0.0 ? a / b : std::nan(""); }

} // namespace dtdd
