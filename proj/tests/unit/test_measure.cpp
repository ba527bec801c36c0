#include <doctest.h>

#include <cmath>

#include "ionforce/constants.hpp"
#include "ionforce/errors.hpp"
#include "ionforce/measure.hpp"

using namespace ionforce;

TEST_CASE("single-shot probability") {
    const NoiseModel ideal{};
    const LockInSequence seq{2e-4, 10, XiFixed{}};
    CHECK(shot_probability(seq, 0.0, 0.0, 1013.0, 0.0, ideal) == doctest::Approx(1.0));
    CHECK(shot_probability(seq, 0.0, kPi, 1013.0, 0.0, ideal) == doctest::Approx(0.0));
    CHECK(shot_probability(seq, 0.0, 0.5 * kPi, 1013.0, 0.0, ideal) == doctest::Approx(0.5));

    const NoiseModel dephased{0.8, 0, {}};
    const double clock = lockin_phase(seq, 0.7, 1013.0, 0.6);
    CHECK(shot_probability(seq, 0.7, 1.1, 1013.0, 0.6, dephased) ==
          doctest::Approx(0.5 + 0.4 * std::cos(1.1 - clock)).epsilon(1e-14));
}

TEST_CASE("D-level decay reduces the contrast") {
    const NoiseModel noise{0.9, 0, 0.39};
    const LockInSequence seq{2e-4, 10, XiFixed{}};
    CHECK(noise.effective_contrast(seq) == doctest::Approx(0.9 * std::exp(-4e-3 / 0.39)));
}

TEST_CASE("D fraction converges to the shot probability") {
    const LockInSequence seq{1.7e-4, 10, XiFixed{0.4}};
    const Truth truth{1013.0, 0.5, 0.0};
    const NoiseModel noise{0.95, 123, {}};
    const std::vector<double> phases{0.3, 1.9, 4.0};
    const int shots = 200000;
    const auto rec = simulate_fringe(seq, phases, shots, truth, noise, 5);
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const double p = shot_probability(seq, 0.4, phases[i], 1013.0, 0.5, noise);
        const double frac = static_cast<double>(rec.d_counts[i]) / shots;
        CHECK(std::abs(frac - p) < 5.0 * std::sqrt(p * (1 - p) / shots));
    }
}

TEST_CASE("seeded simulation is reproducible") {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(1e-4, 3e-4, 4);
    plan.xi_grid_rad = linear_grid(0.0, 5.0, 3);
    plan.shots_per_phase = 50;
    const Truth truth{1013.0, 0.774, 0.3};
    const NoiseModel noise{0.95, 42, {}};
    const auto a = run_sync_scan(plan, truth, noise);
    auto plan3 = plan;
    plan3.threads = 3;
    CHECK(a == run_sync_scan(plan3, truth, noise));
    const auto other = run_sync_scan(plan, truth, NoiseModel{0.95, 43, {}});
    CHECK_FALSE(a.records == other.records);
    CHECK(a.records.size() == 12);
    CHECK(a.cell(2, 1).sequence.half_period_s == plan.tau_grid_s[2]);
}

TEST_CASE("paired asynchronous scan carries zero-force references") {
    ScanPlan plan;
    plan.tau_grid_s = linear_grid(1.5e-4, 3.5e-4, 5);
    plan.shots_per_phase = 20;
    const auto scan = run_async_scan(plan, Truth{1013.0, 0.774, 0.0}, NoiseModel{1.0, 9, {}}, true);
    REQUIRE(scan.references.size() == 5);
    for (const auto& r : scan.references) CHECK_FALSE(r.drive_on);
    for (const auto& r : scan.records) CHECK(std::holds_alternative<XiUniform>(r.sequence.xi_mode));
    CHECK(scan.xi_grid_rad.empty());
}

TEST_CASE("measurement time bookkeeping") {
    ScanPlan plan;
    plan.tau_grid_s = {1e-4, 2e-4};
    plan.xi_grid_rad = {0.0, 1.0, 2.0};
    plan.shots_per_phase = 10;
    plan.phases_rad = phase_grid(4);
    const auto scan = run_sync_scan(plan, Truth{1013.0, 0.1, 0.0}, NoiseModel{});
    const double expect = 3 * 4 * 10 * ((20 * 1e-4 + 3e-3) + (20 * 2e-4 + 3e-3));
    CHECK(total_measurement_time_s(scan) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("invalid plans and noise are rejected") {
    ScanPlan plan;
    plan.xi_grid_rad = {0.0};
    CHECK_THROWS_AS(plan.validate(true), ValidationError);
    plan.tau_grid_s = {1e-4};
    plan.shots_per_phase = 0;
    CHECK_THROWS_AS(plan.validate(true), ValidationError);
    CHECK_THROWS_AS(NoiseModel({1.5, 0, {}}).validate(), ValidationError);
    CHECK_THROWS_AS(Truth({1013.0, -0.1, 0.0}).validate(), ValidationError);
}
