#pragma once

// 28 GHz statistical channel: distance path loss with lognormal shadowing,
// the LOS / NLOS / outage link-state draw, array gain, thermal noise and the
// SINR -> spectral efficiency mapping used by the allocator.

#include <dtdd/units.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dtdd::channel {

struct PathLossParams
{
  double alpha = 0.0; // dB intercept
  double beta = 1.0;  // slope (x10 log10 d)
  double sigma = 0.0; // dB shadowing std-dev
};

struct LinkStateParams
{
  double a_out = 0.0334; // 1/m
  double b_out = 5.2;
  double a_los = 0.0149; // 1/m
};

enum class LinkState
{
  Los,
  Nlos,
  Outage
};

inline std::string_view to_string(LinkState s)
{
  switch (s) {
  case LinkState::Los: return "LOS";
  case LinkState::Nlos: return "NLOS";
  case LinkState::Outage: return "OUTAGE";
  }
  return "?";
}

inline LinkState link_state_from_string(std::string_view s)
{
  if (s == "LOS") return LinkState::Los;
  if (s == "NLOS") return LinkState::Nlos;
  if (s == "OUTAGE") return LinkState::Outage;
  throw std::invalid_argument("unknown link state '" + std::string(s) + "'");
}

struct RadioConfig
{
  double tx_power_dbm = 30.0;
  int n_antennas = 64; // square planar array
  double noise_figure_db = 5.0;
};

inline bool is_valid(const RadioConfig& r)
{
  if (r.n_antennas < 1) return false;
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(r.n_antennas))));
  return side * side == r.n_antennas;
}

struct RateParams
{
  double eta = 0.8;           // bandwidth overhead
  double delta_loss_db = 3.0; // loss from Shannon capacity
  double w_max_hz = 1e9;      // total bandwidth
  double carrier_hz = 28e9;
};

/// Per-link budget. Powers are full-band at full TX power; under
/// constant-PSD scaling the same SINR holds for any bandwidth fraction.
struct LinkBudget
{
  double path_loss_db = 0.0;
  double bf_gain_db = 0.0;
  double rx_power_dbm = 0.0;
  double interference_mw = 0.0;
  double noise_mw = 0.0;
  double sinr_db = 0.0;
  double spectral_efficiency = 0.0; // bits/s/Hz
};

struct ChannelParams
{
  PathLossParams los{61.4, 2.0, 5.8};
  PathLossParams nlos{72.0, 2.92, 8.7};
  LinkStateParams state{};
  RateParams rate{};

  const PathLossParams& path_loss_for(LinkState s) const
  {
    return s == LinkState::Los ? los : nlos;
  }
};

constexpr double kMinDistance = 1.0;      // m
constexpr double kThermalNoiseDbmHz = -174.0;

inline double path_loss_db(double d, const PathLossParams& p, double xi)
{
  d = std::max(d, kMinDistance);
  return p.alpha + p.beta * 10.0 * std::log10(d) + xi;
}

struct LinkStateProbabilities
{
  double los = 0.0;
  double nlos = 0.0;
  double outage = 0.0;
};

inline LinkStateProbabilities link_state_probabilities(double d, const LinkStateParams& p)
{
  LinkStateProbabilities out;
  out.outage = std::max(0.0, 1.0 - std::exp(-p.a_out * d + p.b_out));
  out.los = (1.0 - out.outage) * std::exp(-p.a_los * d);
  out.nlos = std::max(0.0, 1.0 - out.outage - out.los);
  return out;
}

template <class Rng>
LinkState sample_link_state(double d, const LinkStateParams& p, Rng& rng)
{
  const auto prob = link_state_probabilities(d, p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double v = u(rng);
  if (v < prob.outage) return LinkState::Outage;
  if (v < prob.outage + prob.los) return LinkState::Los;
  return LinkState::Nlos;
}

/// One lognormal shadowing draw in dB. sigma == 0 yields exactly 0.
template <class Rng>
double sample_shadowing(const PathLossParams& p, Rng& rng)
{
  if (p.sigma <= 0.0) {
    return 0.0;
  }
  std::normal_distribution<double> n(0.0, p.sigma);
  return n(rng);
}

/// Full array gain of both ends.
inline double beamforming_gain_db(int n_tx, int n_rx)
{
  return 10.0 * std::log10(static_cast<double>(n_tx)) + 10.0 * std::log10(static_cast<double>(n_rx));
}

inline double noise_power_dbm(double w_hz, double nf_db)
{
  return kThermalNoiseDbmHz + 10.0 * std::log10(w_hz) + nf_db;
}

inline double noise_power_mw(double w_hz, double nf_db) { return dbm_to_mw(noise_power_dbm(w_hz, nf_db)); }

inline double sinr_db(double rx_power_mw, double interference_mw, double noise_mw)
{
  return linear_to_db(rx_power_mw / (interference_mw + noise_mw));
}

inline double spectral_efficiency(double sinr, const RateParams& rp)
{
  if (std::isinf(sinr) && sinr < 0) {
    return 0.0;
  }
  return rp.eta * std::log2(1.0 + db_to_linear(sinr - rp.delta_loss_db));
}

/// Assemble a budget for a serving link; interference and noise in mW.
inline LinkBudget make_budget(double path_loss, double bf_gain, double tx_power_dbm, double interference_mw,
                              double noise_mw, const RateParams& rp)
{
  LinkBudget b;
  b.path_loss_db = path_loss;
  b.bf_gain_db = bf_gain;
  b.rx_power_dbm = tx_power_dbm + bf_gain - path_loss;
  b.interference_mw = interference_mw;
  b.noise_mw = noise_mw;
  b.sinr_db = sinr_db(dbm_to_mw(b.rx_power_dbm), interference_mw, noise_mw);
  b.spectral_efficiency = spectral_efficiency(b.sinr_db, rp);
  return b;
}

} // namespace dtdd::channel
