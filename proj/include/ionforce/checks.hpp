#pragma once

// Oracle and property checks shared by `ionforce selftest` and the acceptance
// runner. Every check is seeded and deterministic.

#include <cstdint>
#include <string>
#include <vector>

namespace ionforce {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CheckOptions {
    /// Smaller sample sizes; thresholds are unchanged.
    bool quick = false;
    std::uint64_t seed = 20240611;
    unsigned threads = 1;
};

/// Closed-form lock-in phase against adaptive quadrature of the modulated
/// detuning, including points next to cos(2 pi f tau) = 0.
CheckResult check_closed_form(const CheckOptions& options);

/// Monte-Carlo xi average of cos(phase) against J0 of the envelope on a tau
/// grid that crosses a Bessel zero.
CheckResult check_bessel_average(const CheckOptions& options);

/// Constant detuning under an even echo train integrates to zero.
CheckResult check_dc_rejection(const CheckOptions& options);

/// Force -> x0 -> force and x0 -> A -> x0 round trips, linearity in force.
CheckResult check_oscillator_invariants(const CheckOptions& options);

/// Steady-state amplitude against an RK4 integration of the driven, lightly
/// damped oscillator.
CheckResult check_oscillator_ode(const CheckOptions& options);

/// Same seed gives bit-identical scans and fits, independent of thread count.
CheckResult check_determinism(const CheckOptions& options);

/// Histogram chi-square of simulated D counts against the binomial law, for
/// fixed and uniformly random force phase.
CheckResult check_binomial_chi2(const CheckOptions& options);

/// 95% intervals of fit_fringe cover the generating (C, phase) in >= 93% of
/// seeded replications.
CheckResult check_fringe_coverage(const CheckOptions& options);

std::vector<CheckResult> run_property_suite(const CheckOptions& options);

}  // namespace ionforce
