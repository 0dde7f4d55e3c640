#pragma once

#include <cstdint>

namespace homsim {

// Unit conventions across the library:
//   times in ns at the model layer, timestamps in integer ps on tag streams,
//   frequencies in MHz, wall-clock durations in s.
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Sole conversion site between a frequency in MHz and an angular rate in
// rad/ns: 1 MHz = 2*pi*1e-3 rad/ns.  Every cos(2*pi*dnu*tau) in the code
// goes through this constant.
inline constexpr double rad_per_mhz_ns = two_pi * 1e-3;

inline constexpr double ps_per_ns = 1e3;
inline constexpr double ns_per_ps = 1e-3;
inline constexpr double ns_per_s = 1e9;
inline constexpr double s_per_ns = 1e-9;
inline constexpr double ps_per_s = 1e12;
inline constexpr double s_per_ps = 1e-12;

}  // namespace homsim
