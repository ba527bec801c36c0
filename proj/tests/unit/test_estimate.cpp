#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ionforce/constants.hpp"
#include "ionforce/estimate.hpp"

using namespace ionforce;

namespace {

// Counts rounded from the exact fringe; with 1e9 shots the rounding is far
// below the 1e-6 tolerance.
FringeRecord exact_fringe(double contrast, double phase, int shots) {
    FringeRecord rec;
    rec.sequence = {1e-4, 2, XiFixed{}};
    rec.phases_rad = phase_grid(12);
    rec.shots_per_phase = shots;
    for (double phi : rec.phases_rad)
        rec.d_counts.push_back(static_cast<int>(std::lround(shots * (0.5 + 0.5 * contrast * std::cos(phi - phase)))));
    return rec;
}

FringeRecord sampled_fringe(double contrast, double clock_phase, int shots, std::uint64_t seed) {
    // A = clock/|g| with xi chosen so the clock phase is exactly `clock_phase`.
    const LockInSequence seq{1.0 / (4.0 * 1013.0), 1, XiFixed{0.0}};
    const double g = lockin_phase(seq, 0.0, 1013.0, 1.0);
    const auto xi = g < 0 ? kPi : 0.0;
    const LockInSequence s2{seq.half_period_s, 1, XiFixed{xi}};
    const Truth truth{1013.0, clock_phase / std::abs(g), 0.0};
    const auto phases = phase_grid(12);
    return simulate_fringe(s2, phases, shots, truth, NoiseModel{contrast, seed, {}});
}

ScanPlan fig2_plan(int shots) {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(50e-6, 450e-6, 10);
    plan.xi_grid_rad = linear_grid(0.0, kTwoPi * 19.0 / 20.0, 10);
    plan.shots_per_phase = shots;
    return plan;
}

}  // namespace

TEST_CASE("noiseless fringe recovers contrast and phase") {
    const auto fit = fit_fringe(exact_fringe(0.9, 1.2, 1000000000));
    CHECK(fit.at("contrast").value == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(fit.at("phase").value == doctest::Approx(1.2).epsilon(1e-6));
    CHECK(fit.diagnostics.converged);
}

TEST_CASE("analysis phases shifted by 2 pi give the same fit") {
    auto rec = sampled_fringe(0.9, 1.2, 200, 4);
    const auto a = fit_fringe(rec);
    for (double& p : rec.phases_rad) p += kTwoPi;
    const auto b = fit_fringe(rec);
    CHECK(b.at("phase").value == doctest::Approx(a.at("phase").value).epsilon(1e-7));
    CHECK(b.at("contrast").value == doctest::Approx(a.at("contrast").value).epsilon(1e-7));
}

TEST_CASE("phase uncertainty scales as 1/(C sqrt(N))") {
    std::vector<double> log_n, log_sigma;
    for (int shots : {10, 100, 1000}) {
        const int seeds = 40;
        double mean = 0.0;
        for (int s = 0; s < seeds; ++s) mean += fit_fringe(sampled_fringe(1.0, 1.2, shots, 100 + s)).at("phase").sigma();
        mean /= seeds;
        const double n_total = 12.0 * shots;
        CHECK(mean * std::sqrt(n_total) == doctest::Approx(1.0).epsilon(0.25));
        log_n.push_back(std::log(n_total));
        log_sigma.push_back(std::log(mean));
    }
    const double slope = (log_sigma.back() - log_sigma.front()) / (log_n.back() - log_n.front());
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("flat fringe is degenerate") {
    FringeRecord rec = exact_fringe(0.0, 0.0, 100);
    try {
        fit_fringe(rec);
        FAIL("expected DegenerateFringeError");
    } catch (const DegenerateFringeError& e) {
        CHECK(e.fallback.at("contrast").value == 0.0);
        CHECK(e.fallback.diagnostics.has_flag("phase_unconstrained"));
    }
}

TEST_CASE("fixed-phase fit gives a signed contrast") {
    const auto fit = fit_fringe_at_phase(exact_fringe(0.7, 0.4 + kPi, 1000000000), 0.4);
    CHECK(fit.at("contrast").value == doctest::Approx(-0.7).epsilon(1e-6));
}

TEST_CASE("phase map recovers the generating amplitude") {
    const Truth truth{1013.0, 0.774, 0.3};
    const auto scan = run_sync_scan(fig2_plan(250), truth, NoiseModel{0.95, 8, {}});
    const auto fit = fit_phase_map(scan, 1013.0);
    // Interval coverage is a many-seed property; one seed gets a 4 sigma bound.
    const auto& a = fit.result.at("amplitude");
    CHECK(std::abs(a.value - 0.774) < 4.0 * a.sigma());
    CHECK(a.sigma() < 0.01);
    CHECK(std::remainder(fit.result.at("xi_offset").value - 0.3, kTwoPi) == doctest::Approx(0.0).epsilon(0.02));
}

TEST_CASE("phase map at zero force is consistent with zero") {
    const auto scan = run_sync_scan(fig2_plan(100), Truth{1013.0, 0.0, 0.0}, NoiseModel{0.95, 8, {}});
    const auto fit = fit_phase_map(scan, 1013.0);
    CHECK(fit.result.at("amplitude").lower == 0.0);
    CHECK(fit.result.diagnostics.has_flag("amplitude_consistent_with_zero"));
}

TEST_CASE("phase map rejects grids with no sensitivity") {
    ScanPlan plan;
    plan.tau_grid_s = {1.0 / 1013.0, 2.0 / 1013.0};
    plan.xi_grid_rad = {0.0, 2.0};
    plan.shots_per_phase = 50;
    const auto scan = run_sync_scan(plan, Truth{1013.0, 0.5, 0.0}, NoiseModel{1.0, 1, {}});
    CHECK_THROWS_AS(fit_phase_map(scan, 1013.0), NonIdentifiableError);
}

TEST_CASE("phase map CRLB scales with shots") {
    PhaseMapDesign d;
    d.tau_grid_s = linear_grid(50e-6, 450e-6, 10);
    d.xi_grid_rad = linear_grid(0.0, 6.0, 10);
    d.phases_rad = phase_grid(12);
    d.shots_per_phase = 100;
    d.contrast = 0.95;
    const double a = phase_map_amplitude_crlb(d, 1013.0, 0.774, 0.3);
    d.shots_per_phase = 400;
    CHECK(phase_map_amplitude_crlb(d, 1013.0, 0.774, 0.3) == doctest::Approx(a / 2.0).epsilon(1e-9));
}

TEST_CASE("contrast curve with zero force flags the frequency") {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(150e-6, 350e-6, 20);
    plan.shots_per_phase = 12;
    const auto scan = run_async_scan(plan, Truth{1013.0, 0.0, 0.0}, NoiseModel{1.0, 5, {}}, true);
    ContrastCurveOptions opt;
    opt.frequency_min_hz = 980.0;
    opt.frequency_max_hz = 1050.0;
    const auto fit = fit_contrast_curve(scan, opt);
    CHECK(fit.result.diagnostics.has_flag("force_not_detected"));
    CHECK(fit.result.diagnostics.has_flag("frequency_unidentifiable"));
    CHECK(fit.result.at("amplitude").lower == 0.0);
    double mean_ratio = 0.0;
    int used = 0;
    for (const auto& p : fit.points)
        if (p.usable) mean_ratio += p.ratio, ++used;
    CHECK(mean_ratio / used == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("contrast curve recovers amplitude and frequency") {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(150e-6, 350e-6, 40);
    plan.shots_per_phase = 40;
    const auto scan = run_async_scan(plan, Truth{1013.0, 0.774, 0.0}, NoiseModel{1.0, 11, {}}, true);
    ContrastCurveOptions opt;
    opt.frequency_min_hz = 980.0;
    opt.frequency_max_hz = 1050.0;
    const auto fit = fit_contrast_curve(scan, opt);
    CHECK(fit.result.at("frequency").value == doctest::Approx(1013.0).epsilon(3.0 / 1013.0));
    CHECK(fit.result.at("amplitude").value == doctest::Approx(0.774).epsilon(0.05));
    CHECK(fit.fourier_limit_hz > 0.0);
}

TEST_CASE("n = 20 curve has narrower features than n = 10") {
    // Count sign changes of J0 over the same tau window.
    const auto flips = [](int n) {
        int count = 0;
        double prev = contrast_model(150e-6, n, 1013.0, 0.774);
        for (int i = 1; i <= 2000; ++i) {
            const double c = contrast_model(150e-6 + 200e-6 * i / 2000.0, n, 1013.0, 0.774);
            if ((c < 0) != (prev < 0)) ++count;
            prev = c;
        }
        return count;
    };
    CHECK(flips(20) > flips(10));
}

TEST_CASE("sensitivity from the synchronous fit") {
    const auto r = sensitivity_report(8.64e-19, 0.03e-19, 9.0 * 3600.0);
    CHECK(r.sensitivity_n_per_rthz == doctest::Approx(5.4e-19).epsilon(1e-9));
    CHECK(r.sensitivity_n_per_rthz == doctest::Approx(5.3e-19).epsilon(0.03));
    CHECK(sensitivity_report(8.64e-19, 0.06e-19, 9.0 * 3600.0).sensitivity_n_per_rthz ==
          doctest::Approx(2.0 * r.sensitivity_n_per_rthz));
    CHECK_THROWS_AS(sensitivity_report(8.64e-19, 0.0, 10.0), ValidationError);
    FitResult empty;
    CHECK_THROWS_AS(sensitivity_report(empty, TrapConfig::strontium_reference(), 1013.0, 10.0), ValidationError);
}
