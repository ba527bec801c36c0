#include "ionforce/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include "ionforce/constants.hpp"
#include "ionforce/estimate.hpp"
#include "ionforce/lockin.hpp"
#include "ionforce/measure.hpp"
#include "ionforce/oscillator.hpp"
#include "ionforce/rng.hpp"

namespace ionforce {

namespace {

// Sequential uniform draws on top of the counter generator.
class Draws {
public:
    Draws(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
    double uniform() { return rng_.uniform(counter_++); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
    int integer(int lo, int hi) {
        return lo + static_cast<int>(std::floor(uniform() * (hi - lo + 1)));
    }

private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
};

CheckResult make(std::string name, bool passed, std::string detail) {
    return {std::move(name), passed, std::move(detail)};
}

}  // namespace

CheckResult check_closed_form(const CheckOptions& options) {
    const int random_points = options.quick ? 1000 : 10000;
    const int singular_points = 100;
    constexpr double f = 1013.0;
    Draws draws(options.seed, 1);
    double worst = 0.0;
    double worst_singular = 0.0;
    for (int i = 0; i < random_points + singular_points; ++i) {
        const bool singular = i >= random_points;
        double tau = draws.uniform(0.1, 2.0) / f;
        if (singular) {
            // 2 pi f tau = pi/2 + k pi + eps with |eps| <= 1e-4; every tenth point exact.
            const int k = draws.integer(0, 3);
            const double eps = (i % 10 == 0) ? 0.0 : draws.uniform(-1e-4, 1e-4);
            tau = (0.5 * kPi + k * kPi + eps) / (kTwoPi * f);
        }
        const LockInSequence seq{tau, draws.integer(1, 30), XiFixed{}};
        const double xi = draws.uniform(0.0, kTwoPi);
        const double a = draws.uniform(0.0, 3.0);
        const double err = std::abs(lockin_phase(seq, xi, f, a) - lockin_phase_numeric(seq, xi, f, a));
        (singular ? worst_singular : worst) = std::max(singular ? worst_singular : worst, err);
    }
    const bool ok = worst < 1e-9 && worst_singular < 1e-9;
    return make("closed-form phase vs quadrature", ok,
                fmt::format("{} random + {} near-singular points, max |dphi| = {:.3g} / {:.3g} rad "
                            "(limit 1e-9)",
                            random_points, singular_points, worst, worst_singular));
}

CheckResult check_bessel_average(const CheckOptions& options) {
    const int points = 50;
    const std::uint64_t n_draws = options.quick ? 20000 : 100000;
    constexpr double f = 1013.0;
    constexpr double amplitude = 0.774;
    constexpr int n = 10;
    const auto taus = linear_grid(150e-6, 350e-6, points);
    int inside = 0;
    int sign_flips = 0;
    double worst_z = 0.0;
    double previous = 0.0;
    for (int i = 0; i < points; ++i) {
        const LockInSequence seq{taus[i], n, XiUniform{}};
        const double expected = bessel_contrast(seq, f, amplitude);
        const auto avg = mc_xi_average(seq, f, amplitude, n_draws, options.seed + i, 8, options.threads);
        const double diff = std::abs(avg.mean_cos - expected);
        const double z = avg.stderr_cos > 0.0 ? diff / avg.stderr_cos : (diff == 0.0 ? 0.0 : INFINITY);
        worst_z = std::max(worst_z, z);
        if (diff <= 3.0 * avg.stderr_cos) ++inside;
        if (i > 0 && std::signbit(expected) != std::signbit(previous)) ++sign_flips;
        previous = expected;
    }
    const bool ok = inside == points && sign_flips >= 1;
    return make("Bessel xi-average", ok,
                fmt::format("{}/{} tau points within 3 standard errors ({} draws each, worst z = {:.2f}); "
                            "{} contrast sign flips on the grid",
                            inside, points, n_draws, worst_z, sign_flips));
}

CheckResult check_dc_rejection(const CheckOptions& options) {
    Draws draws(options.seed, 2);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const LockInSequence seq{draws.log_uniform(1e-6, 1e-2), 2 * draws.integer(1, 25), XiFixed{}};
        const double detuning = draws.uniform(-1e4, 1e4);
        const double phase = integrate_modulated(seq, [&](double) { return detuning; });
        // Relative to the unmodulated phase over the same time.
        worst = std::max(worst, std::abs(phase) / (std::abs(detuning) * seq.duration_s()));
    }
    return make("DC rejection (even n)", worst < 1e-12,
                fmt::format("1000 random sequences, max |phase| / |delta T| = {:.3g}", worst));
}

CheckResult check_oscillator_invariants(const CheckOptions& options) {
    Draws draws(options.seed, 3);
    double worst_force = 0.0;
    double worst_phase = 0.0;
    double worst_linear = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const auto trap = TrapConfig::from_amu(draws.uniform(1.0, 250.0), draws.log_uniform(1e5, 1e7),
                                               draws.uniform(300e-9, 1600e-9));
        const double ratio = draws.uniform() < 0.5 ? draws.log_uniform(1e-4, 0.9) : draws.uniform(1.1, 5.0);
        const ForceDrive drive{draws.log_uniform(1e-22, 1e-16), ratio * trap.trap_frequency_hz, 0.0};
        const double x0 = steady_state_amplitude(drive, trap);
        worst_force = std::max(
            worst_force, std::abs(force_from_amplitude(x0, drive.frequency_hz, trap) / drive.amplitude_n - 1.0));
        worst_phase = std::max(worst_phase, std::abs(amplitude_from_phase(phase_amplitude(x0, trap), trap) / x0 - 1.0));
        const double k = draws.uniform(0.1, 10.0);
        const ForceDrive scaled{k * drive.amplitude_n, drive.frequency_hz, 0.0};
        worst_linear = std::max(worst_linear, std::abs(steady_state_amplitude(scaled, trap) / (k * x0) - 1.0));
    }
    const bool ok = worst_force < 1e-12 && worst_phase < 1e-12 && worst_linear < 1e-12;
    return make("oscillator round trip and linearity", ok,
                fmt::format("2000 draws, max relative error: force {:.2g}, phase {:.2g}, linearity {:.2g}",
                            worst_force, worst_phase, worst_linear));
}

CheckResult check_oscillator_ode(const CheckOptions& options) {
    const int sets = options.quick ? 20 : 100;
    constexpr double kQ = 1e3;
    constexpr int kStepsPerTrapPeriod = 200;
    constexpr int kDrivePeriods = 20;
    Draws draws(options.seed, 4);
    double worst = 0.0;
    for (int set = 0; set < sets; ++set) {
        const auto trap = TrapConfig::from_amu(draws.uniform(1.0, 200.0), draws.log_uniform(1e5, 5e6),
                                               674e-9);
        const double ratio = draws.uniform() < 0.7 ? draws.uniform(0.02, 0.6) : draws.uniform(1.5, 3.0);
        const ForceDrive drive{draws.log_uniform(1e-21, 1e-17), ratio * trap.trap_frequency_hz,
                               draws.uniform(0.0, kTwoPi)};
        const double expected = std::abs(steady_state_amplitude(drive, trap));

        // Time in trap periods, position in units of `expected`.
        const double wt = kTwoPi;
        const double wm = kTwoPi * ratio;
        const double gamma = wt / kQ;
        const double drive_accel = drive.amplitude_n / trap.ion_mass_kg /
                                   std::pow(kTwoPi * trap.trap_frequency_hz, 2) * wt * wt / expected;
        const auto accel = [&](double t, double x, double v) {
            return drive_accel * std::cos(wm * t + drive.initial_phase_rad) - gamma * v - wt * wt * x;
        };
        const double h = 1.0 / kStepsPerTrapPeriod;
        const double settle = 10.0 * 2.0 / gamma;  // ten amplitude decay times
        const auto settle_steps = static_cast<long>(std::ceil(settle / h));
        const auto window_steps = static_cast<long>(std::ceil(kDrivePeriods / ratio / h));
        double t = 0.0, x = 0.0, v = 0.0;
        double sxc = 0.0, sxs = 0.0, scc = 0.0, sss = 0.0, scs = 0.0;
        for (long step = 0; step < settle_steps + window_steps; ++step) {
            const double k1x = v, k1v = accel(t, x, v);
            const double k2x = v + 0.5 * h * k1v, k2v = accel(t + 0.5 * h, x + 0.5 * h * k1x, k2x);
            const double k3x = v + 0.5 * h * k2v, k3v = accel(t + 0.5 * h, x + 0.5 * h * k2x, k3x);
            const double k4x = v + h * k3v, k4v = accel(t + h, x + h * k3x, k4x);
            x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
            v += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
            t += h;
            if (step >= settle_steps) {
                const double c = std::cos(wm * t);
                const double s = std::sin(wm * t);
                sxc += x * c;
                sxs += x * s;
                scc += c * c;
                sss += s * s;
                scs += c * s;
            }
        }
        // Least-squares projection onto cos and sin at the drive frequency.
        const double det = scc * sss - scs * scs;
        const double a = (sxc * sss - sxs * scs) / det;
        const double b = (sxs * scc - sxc * scs) / det;
        worst = std::max(worst, std::abs(std::hypot(a, b) - 1.0));
    }
    return make("oscillator vs ODE integration", worst < 1e-3,
                fmt::format("{} random parameter sets, max relative amplitude error {:.3g} (limit 1e-3)",
                            sets, worst));
}

CheckResult check_determinism(const CheckOptions& options) {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(100e-6, 300e-6, 4);
    plan.xi_grid_rad = linear_grid(0.0, 4.5, 4);
    plan.shots_per_phase = 50;
    const Truth truth{1013.0, 0.774, 0.3};
    const NoiseModel noise{0.95, options.seed, {}};

    plan.threads = 1;
    const auto sync_a = run_sync_scan(plan, truth, noise);
    const auto async_a = run_async_scan(plan, truth, noise, true);
    plan.threads = std::max(2u, options.threads);
    const auto sync_b = run_sync_scan(plan, truth, noise);
    const auto async_b = run_async_scan(plan, truth, noise, true);

    const LockInSequence seq{200e-6, 10, XiUniform{}};
    const auto mc_a = mc_xi_average(seq, 1013.0, 0.774, 5000, options.seed, 8, 1);
    const auto mc_b = mc_xi_average(seq, 1013.0, 0.774, 5000, options.seed, 8, 3);

    PhaseMapOptions map_options;
    map_options.threads = 1;
    const auto fit_a = fit_phase_map(sync_a, 1013.0, map_options);
    map_options.threads = std::max(2u, options.threads);
    const auto fit_b = fit_phase_map(sync_b, 1013.0, map_options);
    bool fits_equal = fit_a.result.parameters.size() == fit_b.result.parameters.size() &&
                      fit_a.result.log_likelihood == fit_b.result.log_likelihood;
    for (std::size_t i = 0; fits_equal && i < fit_a.result.parameters.size(); ++i) {
        const auto& p = fit_a.result.parameters[i];
        const auto& q = fit_b.result.parameters[i];
        fits_equal = p.value == q.value && p.lower == q.lower && p.upper == q.upper;
    }

    const bool scans_equal = sync_a == sync_b && async_a == async_b;
    const bool mc_equal = mc_a.mean_cos == mc_b.mean_cos && mc_a.mean_sin == mc_b.mean_sin;
    return make("determinism", scans_equal && mc_equal && fits_equal,
                fmt::format("scans {}, xi average {}, phase-map fit {} across thread counts",
                            scans_equal ? "identical" : "DIFFER", mc_equal ? "identical" : "DIFFERS",
                            fits_equal ? "identical" : "DIFFERS"));
}

namespace {

// Pearson chi-square of observed counts against Binomial(shots, p); bins with
// small expectation are pooled. Returns (statistic, degrees of freedom).
std::pair<double, int> binomial_histogram_chi2(const std::vector<int>& counts, int shots, double p) {
    std::vector<double> expected(shots + 1);
    for (int k = 0; k <= shots; ++k) {
        expected[k] = std::exp(std::lgamma(shots + 1.0) - std::lgamma(k + 1.0) - std::lgamma(shots - k + 1.0) +
                               k * std::log(p) + (shots - k) * std::log1p(-p)) *
                      static_cast<double>(counts.size());
    }
    std::vector<double> observed(shots + 1, 0.0);
    for (int c : counts) observed[c] += 1.0;

    double stat = 0.0;
    int bins = 0;
    double pool_e = 0.0;
    double pool_o = 0.0;
    for (int k = 0; k <= shots; ++k) {
        pool_e += expected[k];
        pool_o += observed[k];
        if (pool_e >= 5.0) {
            stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
            ++bins;
            pool_e = 0.0;
            pool_o = 0.0;
        }
    }
    if (pool_e > 0.0 || pool_o > 0.0) {
        // Fold the tail remainder into a final bin.
        stat += (pool_o - pool_e) * (pool_o - pool_e) / std::max(pool_e, 1e-300);
        ++bins;
    }
    return {stat, bins - 1};
}

}  // namespace

CheckResult check_binomial_chi2(const CheckOptions& options) {
    const int replicas = options.quick ? 2000 : 8000;
    constexpr int shots = 100;
    const std::vector<double> phases{0.4, 2.0, 4.0};
    const NoiseModel noise{0.9, options.seed, {}};
    const Truth truth{1013.0, 0.774, 0.0};

    struct Case {
        std::string label;
        LockInSequence seq;
        double p;
    };
    const LockInSequence fixed{180e-6, 10, XiFixed{1.1}};
    const LockInSequence uniform{180e-6, 10, XiUniform{}};
    const double p_fixed = shot_probability(fixed, 1.1, phases[0], truth.force_frequency_hz,
                                            truth.phase_amplitude_rad, noise);
    const double p_uniform = 0.5 + 0.5 * noise.dephasing_contrast *
                                       bessel_contrast(uniform, truth.force_frequency_hz, truth.phase_amplitude_rad) *
                                       std::cos(phases[0]);
    const std::array<Case, 2> cases{Case{"fixed xi", fixed, p_fixed}, Case{"uniform xi", uniform, p_uniform}};

    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        std::vector<int> counts(replicas);
        for (int r = 0; r < replicas; ++r) {
            counts[r] = simulate_fringe(c.seq, phases, shots, truth, noise, static_cast<std::uint64_t>(r)).d_counts[0];
        }
        const auto [stat, dof] = binomial_histogram_chi2(counts, shots, c.p);
        const boost::math::chi_squared_distribution<double> dist(dof);
        const double p_value = boost::math::cdf(boost::math::complement(dist, stat));
        // Two-sided at the 1% level: neither too rough nor too smooth.
        const bool pass = p_value >= 0.005 && p_value <= 0.995;
        ok = ok && pass;
        detail += fmt::format("{}{}: chi2 = {:.1f} on {} dof, p = {:.3f}", detail.empty() ? "" : "; ",
                              c.label, stat, dof, p_value);
    }
    return make("binomial chi-square", ok, detail + " (two-sided 1% level)");
}

CheckResult check_fringe_coverage(const CheckOptions& options) {
    const int seeds = options.quick ? 200 : 500;
    constexpr double kContrast = 0.9;
    constexpr double kPhase = 1.2;
    const auto phases = phase_grid(12);
    // Force amplitude chosen so the clock phase is exactly kPhase.
    const double gain = lockin_phase({200e-6, 10, XiFixed{}}, 0.0, 1013.0, 1.0);
    const double xi = gain < 0.0 ? kPi : 0.0;
    const LockInSequence seq{200e-6, 10, XiFixed{xi}};
    const Truth truth{1013.0, kPhase / std::abs(gain), 0.0};
    int contrast_hits = 0;
    int phase_hits = 0;
    for (int s = 0; s < seeds; ++s) {
        const NoiseModel noise{kContrast, options.seed + 1000 + static_cast<std::uint64_t>(s), {}};
        const auto fit = fit_fringe(simulate_fringe(seq, phases, 250, truth, noise));
        if (fit.at("contrast").covers(kContrast)) ++contrast_hits;
        const auto& ph = fit.at("phase");
        // Interval may extend past +-pi; compare on the circle.
        const double offset = wrap_phase(kPhase - ph.value);
        if (ph.value + offset >= ph.lower && ph.value + offset <= ph.upper) ++phase_hits;
    }
    const double c_rate = static_cast<double>(contrast_hits) / seeds;
    const double p_rate = static_cast<double>(phase_hits) / seeds;
    return make("fringe fit coverage", c_rate >= 0.93 && p_rate >= 0.93,
                fmt::format("{} seeds, 250 shots x 12 phases: contrast {:.1f}%, phase {:.1f}% (need >= 93%)",
                            seeds, 100.0 * c_rate, 100.0 * p_rate));
}

std::vector<CheckResult> run_property_suite(const CheckOptions& options) {
    return {check_closed_form(options),    check_bessel_average(options),
            check_dc_rejection(options),   check_oscillator_invariants(options),
            check_oscillator_ode(options), check_determinism(options),
            check_binomial_chi2(options),  check_fringe_coverage(options)};
}

}  // namespace ionforce
