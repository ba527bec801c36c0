#include "ionforce/oscillator.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "ionforce/errors.hpp"

namespace ionforce {

void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

double wrap_phase(double angle) {
    double wrapped = std::remainder(angle, kTwoPi);
    if (wrapped <= -kPi) wrapped += kTwoPi;
    return wrapped;
}

TrapConfig TrapConfig::from_amu(double mass_amu, double trap_frequency_hz,
                                double clock_wavelength_m, double projection_factor) {
    TrapConfig trap{mass_amu * kAtomicMassUnit, trap_frequency_hz, clock_wavelength_m,
                    projection_factor};
    trap.validate();
    return trap;
}

TrapConfig TrapConfig::strontium_reference() {
    return from_amu(87.9, 1.13e6, 674e-9);
}

void TrapConfig::validate() const {
    require(std::isfinite(ion_mass_kg) && ion_mass_kg > 0.0, "trap: ion mass must be positive");
    require(std::isfinite(trap_frequency_hz) && trap_frequency_hz > 0.0,
            "trap: trap frequency must be positive");
    require(std::isfinite(clock_wavelength_m) && clock_wavelength_m > 0.0,
            "trap: clock wavelength must be positive");
    require(projection_factor > 0.0 && projection_factor <= 1.0,
            "trap: projection factor must lie in (0, 1]");
}

void ForceDrive::validate() const {
    require(std::isfinite(amplitude_n) && amplitude_n >= 0.0,
            "drive: force amplitude must be non-negative");
    require(std::isfinite(frequency_hz) && frequency_hz > 0.0,
            "drive: force frequency must be positive");
    require(std::isfinite(initial_phase_rad), "drive: initial phase must be finite");
}

namespace {

// 4*pi^2*(f_t^2 - f_m^2)*m, the inverse mechanical susceptibility.
double stiffness(double f_m_hz, const TrapConfig& trap) {
    trap.validate();
    require(std::isfinite(f_m_hz) && f_m_hz > 0.0, "drive: force frequency must be positive");
    const double ft2 = trap.trap_frequency_hz * trap.trap_frequency_hz;
    const double detuning = ft2 - f_m_hz * f_m_hz;
    if (std::abs(detuning) < kResonanceGuard * ft2) {
        throw ResonanceError(fmt::format(
            "drive frequency {} Hz is within the resonance guard of the {} Hz trap frequency",
            f_m_hz, trap.trap_frequency_hz));
    }
    return 4.0 * kPi * kPi * detuning * trap.ion_mass_kg;
}

}  // namespace

double steady_state_amplitude(const ForceDrive& drive, const TrapConfig& trap) {
    drive.validate();
    return drive.amplitude_n / stiffness(drive.frequency_hz, trap);
}

double force_from_amplitude(double x0_m, double f_m_hz, const TrapConfig& trap) {
    require(std::isfinite(x0_m), "motion amplitude must be finite");
    return x0_m * stiffness(f_m_hz, trap);
}

double phase_amplitude(double x0_m, const TrapConfig& trap) {
    trap.validate();
    return kTwoPi * x0_m * trap.projection_factor / trap.clock_wavelength_m;
}

double amplitude_from_phase(double phase_amplitude_rad, const TrapConfig& trap) {
    trap.validate();
    return phase_amplitude_rad * trap.clock_wavelength_m / (kTwoPi * trap.projection_factor);
}

}  // namespace ionforce
