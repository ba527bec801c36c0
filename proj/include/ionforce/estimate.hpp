#pragma once

// Maximum-likelihood estimation: single-fringe (contrast, phase) fits, the
// synchronous phase-map fit of the lock-in phase model, the asynchronous
// Bessel contrast-curve fit, Fisher-information bounds and force sensitivity.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ionforce/errors.hpp"
#include "ionforce/measure.hpp"
#include "ionforce/oscillator.hpp"

namespace ionforce {

struct ParameterEstimate {
    std::string name;
    std::string unit;
    double value = 0.0;
    /// 95% profile-likelihood interval.
    double lower = 0.0;
    double upper = 0.0;

    double sigma() const;  ///< interval half-width / 1.96
    bool covers(double x) const { return lower <= x && x <= upper; }
};

struct FitDiagnostics {
    int iterations = 0;
    double gradient_norm = 0.0;
    bool converged = false;
    std::vector<std::string> flags;

    bool has_flag(std::string_view flag) const;
};

struct FitResult {
    std::string model;
    std::vector<ParameterEstimate> parameters;
    double log_likelihood = 0.0;
    FitDiagnostics diagnostics;

    bool has(std::string_view name) const;
    const ParameterEstimate& at(std::string_view name) const;
};

/// Thrown when every fringe point has the same D fraction; `fallback` holds
/// contrast 0 with an unconstrained phase.
class DegenerateFringeError : public FitError {
public:
    DegenerateFringeError(const std::string& what, FitResult fallback)
        : FitError(what), fallback(std::move(fallback)) {}
    FitResult fallback;
};

// --- single fringe -----------------------------------------------------------

/// Binomial log-likelihood of p_i = 1/2 + (C/2) cos(phi_i - phase).
double fringe_log_likelihood(const FringeRecord& record, double contrast, double phase);

/// Fits (contrast >= 0, phase in (-pi, pi]) by coarse grid plus Nelder-Mead;
/// 95% intervals from the likelihood profile.
FitResult fit_fringe(const FringeRecord& record);

/// Fits a signed contrast in [-1, 1] with the fringe phase held at `phase`.
FitResult fit_fringe_at_phase(const FringeRecord& record, double phase);

// --- synchronous phase map ---------------------------------------------------

struct PhaseMapOptions {
    double amplitude_max_rad = 3.0;
    /// Fit the full binomial likelihood of every shot (shared contrast)
    /// instead of the two-stage fit on per-cell phases.
    bool joint = false;
    std::optional<TrapConfig> trap;
    unsigned threads = 1;
};

struct PhaseMapCell {
    std::size_t tau_index = 0;
    std::size_t xi_index = 0;
    bool usable = false;
    double contrast = 0.0;
    double phase = 0.0;
    double phase_sigma = 0.0;
};

struct PhaseMapFit {
    FitResult result;
    std::vector<PhaseMapCell> cells;
    /// Fitted model phase per cell, wrapped.
    std::vector<double> model_phase;
};

PhaseMapFit fit_phase_map(const ScanResult& scan, double f_m_hz,
                          const PhaseMapOptions& options = {});

struct PhaseMapDesign {
    std::vector<double> tau_grid_s;
    std::vector<double> xi_grid_rad;
    int pulse_count = 10;
    std::vector<double> phases_rad;
    int shots_per_phase = 250;
    double contrast = 1.0;
};

/// Cramer-Rao bound on the phase amplitude from projection noise, with the
/// xi offset and a per-cell contrast as nuisance parameters.
double phase_map_amplitude_crlb(const PhaseMapDesign& design, double f_m_hz,
                                double amplitude_rad, double xi_offset_rad);

// --- asynchronous contrast curve ---------------------------------------------

struct ContrastCurveOptions {
    double frequency_min_hz = 0.0;
    double frequency_max_hz = 0.0;
    double frequency_step_hz = 0.25;
    double amplitude_max_rad = 3.0;
    std::optional<TrapConfig> trap;
    unsigned threads = 1;
};

struct ContrastPoint {
    double tau_s = 0.0;
    bool usable = false;
    double contrast = 0.0;  ///< signed, with drive
    double contrast_sigma = 0.0;
    double reference_contrast = 1.0;
    double reference_sigma = 0.0;
    double ratio = 0.0;
    double ratio_sigma = 0.0;
};

struct ContrastMode {
    double amplitude_rad = 0.0;
    double frequency_hz = 0.0;
    double log_likelihood = 0.0;
};

struct ContrastCurveFit {
    FitResult result;
    std::vector<ContrastPoint> points;
    /// Distinct local optima, best first.
    std::vector<ContrastMode> modes;
    double fourier_limit_hz = 0.0;
};

ContrastCurveFit fit_contrast_curve(const ScanResult& scan, const ContrastCurveOptions& options);

/// Model contrast ratio J0(envelope) for a scan point.
double contrast_model(double tau_s, int pulse_count, double f_m_hz, double amplitude_rad);

// --- sensitivity -------------------------------------------------------------

struct SensitivityReport {
    double force_n = 0.0;
    double force_sigma_n = 0.0;
    double total_time_s = 0.0;
    double sensitivity_n_per_rthz = 0.0;  ///< force_sigma * sqrt(total_time)
};

SensitivityReport sensitivity_report(double force_n, double force_sigma_n, double total_time_s);

/// Uses the fit's "force" estimate, or converts its "x0" estimate through the trap.
SensitivityReport sensitivity_report(const FitResult& fit, const TrapConfig& trap, double f_m_hz,
                                     double total_time_s);

}  // namespace ionforce
