#include "ionforce/lockin.hpp"

#include <cmath>

#include "ionforce/constants.hpp"
#include "ionforce/errors.hpp"
#include "ionforce/parallel.hpp"
#include "ionforce/quadrature.hpp"
#include "ionforce/rng.hpp"

namespace ionforce {

void LockInSequence::validate() const {
    require(std::isfinite(half_period_s) && half_period_s > 0.0,
            "sequence: half period tau must be positive");
    require(pulse_count >= 1, "sequence: pulse count must be at least 1");
    if (const auto* fixed = std::get_if<XiFixed>(&xi_mode)) {
        require(std::isfinite(fixed->xi_rad), "sequence: xi must be finite");
    }
}

int modulation_value(double t_s, const LockInSequence& seq) {
    if (!(t_s >= 0.0) || t_s >= seq.duration_s()) return 0;
    // Number of pi pulses already applied; pulse k sits at (2k-1) tau.
    const auto flips = static_cast<long>(std::floor((t_s / seq.half_period_s + 1.0) / 2.0));
    return (flips % 2 == 0) ? 1 : -1;
}

double doppler_phase(double t_s, double amplitude_rad, double xi_rad, double f_m_hz) {
    return amplitude_rad * (std::sin(kTwoPi * f_m_hz * t_s + xi_rad) - std::sin(xi_rad));
}

double doppler_detuning(double t_s, double amplitude_rad, double xi_rad, double f_m_hz) {
    const double omega = kTwoPi * f_m_hz;
    return amplitude_rad * omega * std::cos(omega * t_s + xi_rad);
}

namespace {

// Segment j of the echo train: [0, tau), [tau, 3 tau), ..., [(2n-1) tau, 2n tau).
struct Segment {
    double begin;
    double end;
    double sign;
};

std::vector<Segment> segments(const LockInSequence& seq) {
    const double tau = seq.half_period_s;
    const int n = seq.pulse_count;
    std::vector<Segment> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    out.push_back({0.0, tau, 1.0});
    for (int k = 1; k <= n; ++k) {
        const double end = (k == n) ? 2.0 * n * tau : (2.0 * k + 1.0) * tau;
        out.push_back({(2.0 * k - 1.0) * tau, end, (k % 2 == 0) ? 1.0 : -1.0});
    }
    return out;
}

}  // namespace

double integrate_modulated(const LockInSequence& seq,
                           const std::function<double(double)>& detuning,
                           double relative_tolerance) {
    seq.validate();
    const auto parts = segments(seq);
    const QuadratureOptions options{relative_tolerance};
    double phase = 0.0;
    for (const auto& s : parts) phase += s.sign * integrate_smooth(detuning, s.begin, s.end, options);
    return phase;
}

double lockin_phase_numeric(const LockInSequence& seq, double xi_rad, double f_m_hz,
                            double amplitude_rad, double relative_tolerance) {
    if (amplitude_rad == 0.0) return 0.0;
    return integrate_modulated(
        seq, [&](double t) { return doppler_detuning(t, amplitude_rad, xi_rad, f_m_hz); },
        relative_tolerance);
}

PhaseTrace trace_lockin_phase(const LockInSequence& seq, double xi_rad, double f_m_hz,
                              double amplitude_rad, int samples_per_segment) {
    seq.validate();
    require(samples_per_segment >= 1, "trace: samples per segment must be positive");
    const auto detuning = [&](double t) {
        return doppler_detuning(t, amplitude_rad, xi_rad, f_m_hz);
    };
    PhaseTrace trace;
    trace.time_s.push_back(0.0);
    trace.modulated_detuning.push_back(detuning(0.0));
    trace.phase_rad.push_back(0.0);
    double phase = 0.0;
    for (const auto& s : segments(seq)) {
        const double step = (s.end - s.begin) / samples_per_segment;
        for (int i = 0; i < samples_per_segment; ++i) {
            const double a = s.begin + i * step;
            const double b = (i + 1 == samples_per_segment) ? s.end : a + step;
            phase += s.sign * integrate_smooth(detuning, a, b);
            trace.time_s.push_back(b);
            trace.modulated_detuning.push_back(modulation_value(b, seq) * detuning(b));
            trace.phase_rad.push_back(phase);
        }
    }
    return trace;
}

double dirichlet_ratio(int n, double u) {
    // Reduce to v = u - m*pi, where sin(n u)/sin(u) = (-1)^(m(n-1)) sin(n v)/sin(v).
    const double m = std::nearbyint(u / kPi);
    const double v = u - m * kPi;
    const bool odd = std::fmod(std::abs(m) * (n - 1), 2.0) == 1.0;
    const double sign = odd ? -1.0 : 1.0;
    if (v == 0.0) return sign * n;
    return sign * std::sin(n * v) / std::sin(v);
}

double lockin_envelope(double half_period_s, int pulse_count, double f_m_hz,
                       double amplitude_rad) {
    const double theta = kTwoPi * f_m_hz * half_period_s;
    // sin(n theta - n pi/2) / cos(theta) == -sin(n u) / sin(u) with u = theta - pi/2;
    // written this way the removable singularity at cos(theta) = 0 is exact.
    const double half = std::sin(0.5 * theta);
    const double parity = (pulse_count % 2 == 0) ? 1.0 : -1.0;
    return 4.0 * amplitude_rad * parity * dirichlet_ratio(pulse_count, theta - 0.5 * kPi) *
           half * half;
}

double lockin_phase(const LockInSequence& seq, double xi_rad, double f_m_hz,
                    double amplitude_rad) {
    if (amplitude_rad == 0.0) return 0.0;
    const int n = seq.pulse_count;
    const double carrier =
        kTwoPi * f_m_hz * n * seq.half_period_s + xi_rad + 0.5 * kPi * n;
    return lockin_envelope(seq.half_period_s, n, f_m_hz, amplitude_rad) * std::cos(carrier);
}

double bessel_contrast(const LockInSequence& seq, double f_m_hz, double amplitude_rad) {
    // J0 is even; the library rejects negative arguments.
    return std::cyl_bessel_j(0.0, std::abs(lockin_envelope(seq.half_period_s, seq.pulse_count,
                                                           f_m_hz, amplitude_rad)));
}

double printed_form_contrast(const LockInSequence& seq, double f_m_hz, double amplitude_rad) {
    return 0.5 + 0.5 * bessel_contrast(seq, f_m_hz, amplitude_rad);
}

XiAverage mc_xi_average(const LockInSequence& seq, double f_m_hz, double amplitude_rad,
                        std::uint64_t draws, std::uint64_t seed, unsigned streams,
                        unsigned threads) {
    seq.validate();
    require(draws > 0 && streams > 0, "xi average: draws and streams must be positive");
    struct Sums {
        double c = 0, s = 0, cc = 0, ss = 0;
    };
    std::vector<Sums> partial(streams);
    parallel_for(streams, threads, [&](std::size_t stream) {
        const CounterRng rng(seed, stream);
        const std::uint64_t begin = draws * stream / streams;
        const std::uint64_t end = draws * (stream + 1) / streams;
        Sums acc;
        for (std::uint64_t i = begin; i < end; ++i) {
            const double xi = kTwoPi * rng.uniform(i);
            const double phi = lockin_phase(seq, xi, f_m_hz, amplitude_rad);
            const double c = std::cos(phi);
            const double s = std::sin(phi);
            acc.c += c;
            acc.s += s;
            acc.cc += c * c;
            acc.ss += s * s;
        }
        partial[stream] = acc;
    });
    Sums total;
    for (const auto& p : partial) {
        total.c += p.c;
        total.s += p.s;
        total.cc += p.cc;
        total.ss += p.ss;
    }
    const double n = static_cast<double>(draws);
    XiAverage out;
    out.draws = draws;
    out.mean_cos = total.c / n;
    out.mean_sin = total.s / n;
    const double var_c = std::max(0.0, total.cc / n - out.mean_cos * out.mean_cos);
    const double var_s = std::max(0.0, total.ss / n - out.mean_sin * out.mean_sin);
    out.stderr_cos = std::sqrt(var_c / std::max(1.0, n - 1.0));
    out.stderr_sin = std::sqrt(var_s / std::max(1.0, n - 1.0));
    return out;
}

}  // namespace ionforce
