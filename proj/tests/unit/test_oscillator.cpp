#include <doctest.h>

#include <cmath>

#include "ionforce/constants.hpp"
#include "ionforce/errors.hpp"
#include "ionforce/oscillator.hpp"

using namespace ionforce;

namespace {

// Independent textbook form of the driven, undamped oscillator.
double oracle_x0(double force, double f_m, double f_t, double mass_kg) {
    const double pi = std::acos(-1.0);
    return force / (4.0 * pi * pi * (f_t * f_t - f_m * f_m) * mass_kg);
}

}  // namespace

TEST_CASE("reference drive gives 117.5 nm and A = 0.774 rad") {
    const auto trap = TrapConfig::strontium_reference();
    const double x0 = steady_state_amplitude({8.64e-19, 1013.0, 0.0}, trap);
    CHECK(x0 == doctest::Approx(117.5e-9).epsilon(0.002));
    CHECK(x0 == doctest::Approx(oracle_x0(8.64e-19, 1013.0, 1.13e6, 87.9 * 1.66053906660e-27)).epsilon(1e-12));
    const double a = phase_amplitude(x0, trap);
    CHECK(a == doctest::Approx(0.774).epsilon(0.005));
    CHECK(a == doctest::Approx(2.0 * std::acos(-1.0) * x0 / (std::sqrt(2.0) * 674e-9)).epsilon(1e-12));
}

TEST_CASE("amplitudes from the contrast fits convert to the quoted forces") {
    const auto trap = TrapConfig::strontium_reference();
    CHECK(force_from_amplitude(116e-9, 1013.0, trap) == doctest::Approx(8.54e-19).epsilon(0.005));
    CHECK(force_from_amplitude(115e-9, 1013.0, trap) == doctest::Approx(8.47e-19).epsilon(0.005));
}

TEST_CASE("round trips and linearity") {
    const auto trap = TrapConfig::from_amu(40.0, 1.0e6, 729e-9);
    const ForceDrive drive{3e-20, 2500.0, 0.4};
    const double x0 = steady_state_amplitude(drive, trap);
    CHECK(force_from_amplitude(x0, drive.frequency_hz, trap) == doctest::Approx(drive.amplitude_n).epsilon(1e-14));
    CHECK(amplitude_from_phase(phase_amplitude(x0, trap), trap) == doctest::Approx(x0).epsilon(1e-14));
    CHECK(steady_state_amplitude({3.0 * drive.amplitude_n, drive.frequency_hz, 0.0}, trap) ==
          doctest::Approx(3.0 * x0).epsilon(1e-14));
}

TEST_CASE("above resonance the response is in antiphase") {
    const auto trap = TrapConfig::from_amu(40.0, 1.0e5, 729e-9);
    CHECK(steady_state_amplitude({1e-20, 2.0e5, 0.0}, trap) < 0.0);
}

TEST_CASE("resonance guard and invalid inputs") {
    const auto trap = TrapConfig::strontium_reference();
    CHECK_THROWS_AS(steady_state_amplitude({1e-19, 1.13e6, 0.0}, trap), ResonanceError);
    CHECK_THROWS_AS(steady_state_amplitude({1e-19, 1.13e6 * (1.0 + 1e-8), 0.0}, trap), ResonanceError);
    CHECK_NOTHROW(steady_state_amplitude({1e-19, 1.13e6 * 1.01, 0.0}, trap));
    CHECK_THROWS_AS(TrapConfig::from_amu(-1.0, 1e6, 674e-9), ValidationError);
    CHECK_THROWS_AS(TrapConfig::from_amu(88.0, 0.0, 674e-9), ValidationError);
    CHECK_THROWS_AS(steady_state_amplitude({1e-19, -5.0, 0.0}, trap), ValidationError);
}
