#pragma once

#include <numbers>

namespace ionforce {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Unified atomic mass unit [kg] (CODATA 2018).
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;

/// cos(45 deg): projection of the ion motion on a beam crossing the axis at 45 deg.
inline constexpr double kProjection45 = 0.70710678118654752440;

/// Profile-likelihood drop for a two-sided 95% interval (chi2_1(0.95) / 2).
inline constexpr double kHalfChi2Level95 = 1.920729410347062;
inline constexpr double kZ95 = 1.959963984540054;

/// Wraps an angle to (-pi, pi].
double wrap_phase(double angle);

}  // namespace ionforce
