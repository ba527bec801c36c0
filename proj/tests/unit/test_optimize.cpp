#include <doctest.h>

#include <cmath>

#include "ionforce/optimize.hpp"

using namespace ionforce;

TEST_CASE("Nelder-Mead finds the peak of a tilted quadratic") {
    const Objective f = [](const std::vector<double>& x) {
        const double a = x[0] - 1.5, b = x[1] + 0.25;
        return -(a * a + 3.0 * b * b + a * b);
    };
    const auto best = nelder_mead_maximize(f, {0.0, 0.0}, {0.5, 0.5});
    CHECK(best.converged);
    CHECK(best.x[0] == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(best.x[1] == doctest::Approx(-0.25).epsilon(1e-4));
    CHECK(gradient_norm(f, best.x, {1.0, 1.0}) < 1e-3);
}

TEST_CASE("Nelder-Mead stays inside a -inf barrier") {
    const Objective f = [](const std::vector<double>& x) {
        if (x[0] < 0.0) return -HUGE_VAL;
        return -(x[0] - 0.1) * (x[0] - 0.1);
    };
    const auto best = nelder_mead_maximize(f, {2.0}, {1.0});
    CHECK(best.x[0] == doctest::Approx(0.1).epsilon(1e-4));
}

TEST_CASE("Brent maximum") {
    const auto best = brent_maximize([](double x) { return std::sin(x); }, 0.0, 3.0);
    CHECK(best.x == doctest::Approx(std::acos(0.0)).epsilon(1e-8));
}

TEST_CASE("profile crossing of a parabola") {
    const auto profile = [](double x) { return -0.5 * (x - 2.0) * (x - 2.0); };
    const double half = std::sqrt(2.0 * 1.92);
    const auto up = profile_crossing(profile, 2.0, -1.92, 0.1, 100.0, +1);
    const auto down = profile_crossing(profile, 2.0, -1.92, 0.1, -100.0, -1);
    CHECK(up.reached);
    CHECK(down.reached);
    CHECK(up.value == doctest::Approx(2.0 + half).epsilon(1e-8));
    CHECK(down.value == doctest::Approx(2.0 - half).epsilon(1e-8));
    const auto capped = profile_crossing(profile, 2.0, -1.92, 0.1, 3.0, +1);
    CHECK_FALSE(capped.reached);
    CHECK(capped.value == doctest::Approx(3.0));
}
