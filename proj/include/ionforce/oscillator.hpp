#pragma once

// Classical response of a harmonically trapped ion to an off-resonant
// oscillating force, and conversions between force, motion amplitude and the
// Doppler phase amplitude seen by the clock laser. SI units throughout.

#include "ionforce/constants.hpp"

namespace ionforce {

struct TrapConfig {
    double ion_mass_kg = 0.0;
    double trap_frequency_hz = 0.0;
    double clock_wavelength_m = 0.0;
    /// Cosine of the angle between the clock beam and the direction of motion.
    double projection_factor = kProjection45;

    static TrapConfig from_amu(double mass_amu, double trap_frequency_hz,
                               double clock_wavelength_m,
                               double projection_factor = kProjection45);

    /// 88Sr+ in a 1.13 MHz axial trap probed at 674 nm at 45 deg.
    static TrapConfig strontium_reference();

    void validate() const;
};

struct ForceDrive {
    double amplitude_n = 0.0;
    double frequency_hz = 0.0;
    /// Force phase at the start of the Ramsey sequence.
    double initial_phase_rad = 0.0;

    void validate() const;
};

/// Relative guard band |f_t^2 - f_m^2| / f_t^2 below which the undamped
/// off-resonant model is rejected.
inline constexpr double kResonanceGuard = 1e-6;

/// Steady-state motion amplitude x0 [m]; negative above resonance (motion in
/// antiphase with the force). Throws ResonanceError inside the guard band.
double steady_state_amplitude(const ForceDrive& drive, const TrapConfig& trap);

/// Force amplitude [N] producing steady-state amplitude `x0_m` at `f_m_hz`.
double force_from_amplitude(double x0_m, double f_m_hz, const TrapConfig& trap);

/// Doppler phase amplitude A = 2*pi*x0*projection/lambda [rad].
double phase_amplitude(double x0_m, const TrapConfig& trap);

/// Inverse of phase_amplitude.
double amplitude_from_phase(double phase_amplitude_rad, const TrapConfig& trap);

}  // namespace ionforce
