#pragma once

#include <cmath>
#include <limits>

namespace dtdd {

// All dB <-> linear conversions go through here so units stay consistent.

inline double db_to_linear(double db) { return std::pow(10.0, 0.1 * db); }

inline double linear_to_db(double ratio)
{
  if (ratio <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(ratio);
}

inline double dbm_to_mw(double dbm) { return db_to_linear(dbm); }
inline double mw_to_dbm(double mw) { return linear_to_db(mw); }

} // namespace dtdd
