#pragma once

#include <cmath>

namespace filtpen {

inline constexpr double kPlanck = 6.62607015e-34;  // J*s

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }
inline double ghz_to_hz(double ghz) { return ghz * 1e9; }
inline double thz_to_hz(double thz) { return thz * 1e12; }

}  // namespace filtpen
