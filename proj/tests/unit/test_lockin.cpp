#include <doctest.h>

#include <cmath>

#include "ionforce/constants.hpp"
#include "ionforce/errors.hpp"
#include "ionforce/lockin.hpp"

using namespace ionforce;

namespace {

// Brute-force midpoint rule over the whole sequence; slow but independent.
double midpoint_phase(const LockInSequence& seq, double xi, double f, double a, int steps_per_tau) {
    const double h = seq.half_period_s / steps_per_tau;
    const long total = 2L * seq.pulse_count * steps_per_tau;
    double phase = 0.0;
    for (long i = 0; i < total; ++i) {
        const double t = (i + 0.5) * h;
        phase += modulation_value(t, seq) * a * kTwoPi * f * std::cos(kTwoPi * f * t + xi) * h;
    }
    return phase;
}

}  // namespace

TEST_CASE("modulation square wave") {
    const LockInSequence seq{1.0, 3, XiFixed{}};
    CHECK(modulation_value(0.0, seq) == 1);
    CHECK(modulation_value(0.5, seq) == 1);
    CHECK(modulation_value(1.0, seq) == -1);
    CHECK(modulation_value(2.9, seq) == -1);
    CHECK(modulation_value(3.0, seq) == 1);
    CHECK(modulation_value(5.5, seq) == -1);
    CHECK(modulation_value(6.0, seq) == 0);
    CHECK(modulation_value(-0.1, seq) == 0);
}

TEST_CASE("Doppler phase and detuning") {
    CHECK(doppler_phase(0.0, 0.7, 1.1, 1013.0) == doctest::Approx(0.0));
    const double t = 1.7e-4;
    const double h = 1e-9;
    const double numeric = (doppler_phase(t + h, 0.7, 1.1, 1013.0) - doppler_phase(t - h, 0.7, 1.1, 1013.0)) / (2 * h);
    CHECK(doppler_detuning(t, 0.7, 1.1, 1013.0) == doctest::Approx(numeric).epsilon(1e-6));
}

TEST_CASE("maximum accumulated phase is 2 n A at tau = 1/(4 f)") {
    const double f = 1013.0;
    const double env = lockin_envelope(1.0 / (4.0 * f), 10, f, 0.774);
    CHECK(std::abs(env) == doctest::Approx(15.48).epsilon(1e-9));
}

TEST_CASE("closed form agrees with independent midpoint integration") {
    for (const auto& [tau, n, xi, a] : {std::tuple{1.3e-4, 10, 0.3, 0.774}, std::tuple{2.46e-4, 7, 2.0, 1.5},
                                        std::tuple{4.0e-4, 20, 5.1, 0.2}, std::tuple{7.5e-4, 1, 1.0, 2.9}}) {
        const LockInSequence seq{tau, n, XiFixed{xi}};
        CHECK(lockin_phase(seq, xi, 1013.0, a) ==
              doctest::Approx(midpoint_phase(seq, xi, 1013.0, a, 4000)).epsilon(1e-6));
    }
}

TEST_CASE("closed form agrees with adaptive quadrature to 1e-9") {
    for (int i = 0; i < 200; ++i) {
        const double tau = (0.1 + 1.9 * ((i * 37) % 200) / 200.0) / 1013.0;
        const int n = 1 + (i * 7) % 30;
        const double xi = 0.031 * i;
        const double a = 3.0 * ((i * 13) % 100) / 100.0;
        const LockInSequence seq{tau, n, XiFixed{xi}};
        CHECK(std::abs(lockin_phase(seq, xi, 1013.0, a) - lockin_phase_numeric(seq, xi, 1013.0, a)) < 1e-9);
    }
}

TEST_CASE("closed form is continuous through cos(2 pi f tau) = 0") {
    const double f = 1013.0;
    for (int k = 0; k < 3; ++k) {
        const double tau0 = (0.25 + 0.5 * k) / f;
        for (double eps : {0.0, 1e-12, -1e-9, 1e-6}) {
            const LockInSequence seq{tau0 * (1.0 + eps), 10, XiFixed{0.4}};
            CHECK(std::abs(lockin_phase(seq, 0.4, f, 0.774) - lockin_phase_numeric(seq, 0.4, f, 0.774)) < 1e-9);
        }
    }
}

TEST_CASE("Dirichlet ratio limits") {
    CHECK(dirichlet_ratio(10, 0.0) == doctest::Approx(10.0));
    CHECK(dirichlet_ratio(10, kPi) == doctest::Approx(-10.0));
    CHECK(dirichlet_ratio(7, kPi) == doctest::Approx(7.0));
    CHECK(dirichlet_ratio(5, 1e-9) == doctest::Approx(5.0));
    CHECK(dirichlet_ratio(5, 0.4) == doctest::Approx(std::sin(2.0) / std::sin(0.4)).epsilon(1e-12));
}

TEST_CASE("DC rejection for even pulse counts") {
    for (int n : {2, 4, 10, 30}) {
        const LockInSequence seq{1.7e-4, n, XiFixed{}};
        CHECK(std::abs(integrate_modulated(seq, [](double) { return 1234.5; })) < 1e-12);
    }
}

TEST_CASE("sampled trace ends at the integrated phase") {
    const LockInSequence seq{2.1e-4, 6, XiFixed{0.9}};
    const auto trace = trace_lockin_phase(seq, 0.9, 1013.0, 0.8, 8);
    CHECK(trace.time_s.back() == doctest::Approx(seq.duration_s()));
    CHECK(trace.phase_rad.back() == doctest::Approx(lockin_phase(seq, 0.9, 1013.0, 0.8)).epsilon(1e-10));
    CHECK(trace.time_s.size() == trace.phase_rad.size());
}

TEST_CASE("xi average reproduces J0 and the printed form is 1/2 + J0/2") {
    const double f = 1013.0;
    for (double tau : {1.5e-4, 2.0e-4, 2.6e-4}) {
        const LockInSequence seq{tau, 10, XiUniform{}};
        const auto avg = mc_xi_average(seq, f, 0.774, 40000, 99);
        const double j0 = bessel_contrast(seq, f, 0.774);
        CHECK(std::abs(avg.mean_cos - j0) < 4.0 * avg.stderr_cos + 1e-12);
        CHECK(std::abs(avg.mean_sin) < 4.0 * avg.stderr_sin + 1e-12);
        CHECK(printed_form_contrast(seq, f, 0.774) == doctest::Approx(0.5 + 0.5 * j0));
    }
}

TEST_CASE("sequence validation") {
    CHECK_THROWS_AS(LockInSequence({0.0, 10, XiFixed{}}).validate(), ValidationError);
    CHECK_THROWS_AS(LockInSequence({1e-4, 0, XiFixed{}}).validate(), ValidationError);
    CHECK_NOTHROW(LockInSequence({1e-4, 3, XiUniform{}}).validate());
}
