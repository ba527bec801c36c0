#pragma once

// Quantum lock-in phase accumulation under a train of echo pulses.
//
// The clock superposition picks up the Doppler phase A*[sin(2 pi f t + xi) - sin xi]
// of the driven ion. A train of n echo blocks (wait tau, pi pulse, wait tau)
// multiplies the detuning by a +-1 square wave, so the phase at the end of the
// sequence is the integral of detuning * modulation over [0, 2 n tau].

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace ionforce {

/// Lock-in sequence triggered at a known force phase.
struct XiFixed {
    double xi_rad = 0.0;
    bool operator==(const XiFixed&) const = default;
};
/// Sequence running asynchronously: the force phase is uniform per repetition.
struct XiUniform {
    bool operator==(const XiUniform&) const = default;
};

using XiMode = std::variant<XiFixed, XiUniform>;

struct LockInSequence {
    double half_period_s = 0.0;
    int pulse_count = 1;
    XiMode xi_mode = XiFixed{};

    double duration_s() const { return 2.0 * pulse_count * half_period_s; }
    void validate() const;
    bool operator==(const LockInSequence&) const = default;
};

struct PhaseTrace {
    std::vector<double> time_s;
    /// detuning(t) * modulation(t) [rad/s]
    std::vector<double> modulated_detuning;
    /// running integral of modulated_detuning [rad]
    std::vector<double> phase_rad;
};

/// Square-wave modulation: +1 on [0, tau), sign flips at (2k-1) tau, zero
/// outside [0, 2 n tau).
int modulation_value(double t_s, const LockInSequence& seq);

/// Unmodulated Doppler phase A*[sin(2 pi f t + xi) - sin(xi)].
double doppler_phase(double t_s, double amplitude_rad, double xi_rad, double f_m_hz);

/// Angular detuning, the time derivative of doppler_phase [rad/s].
double doppler_detuning(double t_s, double amplitude_rad, double xi_rad, double f_m_hz);

/// Integral of detuning(t) * modulation(t) over the sequence, integrated
/// segment by segment (the integrand is smooth between pulses).
double integrate_modulated(const LockInSequence& seq,
                           const std::function<double(double)>& detuning,
                           double relative_tolerance = 1e-12);

/// Lock-in phase by numerical integration of the modulated Doppler detuning.
double lockin_phase_numeric(const LockInSequence& seq, double xi_rad, double f_m_hz,
                            double amplitude_rad, double relative_tolerance = 1e-12);

/// Sampled phase evolution. Every pulse time is a sample; each segment
/// between pulses is split into `samples_per_segment` steps.
PhaseTrace trace_lockin_phase(const LockInSequence& seq, double xi_rad, double f_m_hz,
                              double amplitude_rad, int samples_per_segment = 16);

/// sin(n u) / sin(u), continuous through the zeros of sin(u).
double dirichlet_ratio(int n, double u);

/// Signed amplitude of the xi dependence: phase(xi) = envelope * cos(2 pi f n tau + xi + n pi/2).
double lockin_envelope(double half_period_s, int pulse_count, double f_m_hz,
                       double amplitude_rad);

/// Closed-form lock-in phase, unwrapped [rad].
double lockin_phase(const LockInSequence& seq, double xi_rad, double f_m_hz,
                    double amplitude_rad);

/// Fringe contrast after averaging the lock-in phase over a uniform force
/// phase: J0(envelope). Negative values are a pi-shifted fringe.
double bessel_contrast(const LockInSequence& seq, double f_m_hz, double amplitude_rad);

/// The literal 1/2 + J0/2 form of the averaged contrast. Kept for comparison;
/// the fringe contrast itself is bessel_contrast.
double printed_form_contrast(const LockInSequence& seq, double f_m_hz, double amplitude_rad);

struct XiAverage {
    double mean_cos = 0.0;
    double mean_sin = 0.0;
    double stderr_cos = 0.0;
    double stderr_sin = 0.0;
    std::uint64_t draws = 0;
};

/// Monte-Carlo average of cos/sin of the lock-in phase over uniform xi.
/// Reproducible for a fixed (seed, streams) pair regardless of `threads`.
XiAverage mc_xi_average(const LockInSequence& seq, double f_m_hz, double amplitude_rad,
                        std::uint64_t draws, std::uint64_t seed, unsigned streams = 8,
                        unsigned threads = 1);

}  // namespace ionforce
