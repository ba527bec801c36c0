#pragma once

// Fit reports: JSON with every FitResult / SensitivityReport field, flat CSV
// parameter summaries, and plot-ready CSV layers for the two scan fits.

#include <iosfwd>
#include <optional>

#include "json.hpp"
#include "ionforce/estimate.hpp"

namespace ionforce {

nlohmann::json fit_to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);
nlohmann::json sensitivity_to_json(const SensitivityReport& report);

/// parameter,value,lower,upper,unit
void write_fit_csv(const FitResult& fit, std::ostream& out);

/// One row per (tau, xi): theory phase (from the scan truth when present),
/// per-cell fitted phase with its sigma, and the fitted model phase.
void write_phase_map_csv(const ScanResult& scan, const PhaseMapFit& fit, double f_m_hz,
                         std::ostream& out);

/// One row per tau: measured ratio with sigma, fitted curve and theory curve.
void write_contrast_curve_csv(const ScanResult& scan, const ContrastCurveFit& fit,
                              std::ostream& out);

}  // namespace ionforce
