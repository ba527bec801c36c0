#include "ionforce/report_io.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ionforce/constants.hpp"
#include "ionforce/lockin.hpp"

namespace ionforce {

namespace {

// Non-finite numbers have no JSON literal; they are written as null.
nlohmann::json number(double x) {
    if (std::isfinite(x)) return x;
    return nullptr;
}

double read_number(const nlohmann::json& j) {
    if (j.is_null()) return std::nan("");
    return j.get<double>();
}

std::string cell(double x) {
    if (std::isnan(x)) return "NA";
    return fmt::format("{}", x);
}

}  // namespace

nlohmann::json fit_to_json(const FitResult& fit) {
    nlohmann::json params = nlohmann::json::array();
    for (const auto& p : fit.parameters) {
        params.push_back({{"name", p.name},
                          {"unit", p.unit},
                          {"value", number(p.value)},
                          {"lower", number(p.lower)},
                          {"upper", number(p.upper)},
                          {"sigma", number(p.sigma())}});
    }
    return {{"model", fit.model},
            {"parameters", params},
            {"log_likelihood", number(fit.log_likelihood)},
            {"diagnostics",
             {{"iterations", fit.diagnostics.iterations},
              {"gradient_norm", number(fit.diagnostics.gradient_norm)},
              {"converged", fit.diagnostics.converged},
              {"flags", fit.diagnostics.flags}}}};
}

FitResult fit_from_json(const nlohmann::json& j) {
    try {
        FitResult fit;
        fit.model = j.at("model").get<std::string>();
        for (const auto& p : j.at("parameters")) {
            fit.parameters.push_back({p.at("name").get<std::string>(), p.at("unit").get<std::string>(),
                                      read_number(p.at("value")), read_number(p.at("lower")),
                                      read_number(p.at("upper"))});
        }
        fit.log_likelihood = read_number(j.at("log_likelihood"));
        const auto& d = j.at("diagnostics");
        fit.diagnostics.iterations = d.at("iterations").get<int>();
        fit.diagnostics.gradient_norm = read_number(d.at("gradient_norm"));
        fit.diagnostics.converged = d.at("converged").get<bool>();
        fit.diagnostics.flags = d.at("flags").get<std::vector<std::string>>();
        return fit;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("fit report: {}", e.what()));
    }
}

nlohmann::json sensitivity_to_json(const SensitivityReport& report) {
    return {{"force_n", number(report.force_n)},
            {"force_sigma_n", number(report.force_sigma_n)},
            {"total_time_s", number(report.total_time_s)},
            {"sensitivity_n_per_rthz", number(report.sensitivity_n_per_rthz)}};
}

void write_fit_csv(const FitResult& fit, std::ostream& out) {
    fmt::print(out, "parameter,value,lower,upper,unit\n");
    for (const auto& p : fit.parameters) {
        fmt::print(out, "{},{},{},{},{}\n", p.name, cell(p.value), cell(p.lower), cell(p.upper), p.unit);
    }
}

void write_phase_map_csv(const ScanResult& scan, const PhaseMapFit& fit, double f_m_hz,
                         std::ostream& out) {
    fmt::print(out,
               "tau_s,xi_rad,theory_phase_rad,measured_phase_rad,measured_sigma_rad,"
               "fit_phase_rad,contrast,usable\n");
    const std::size_t n_xi = scan.xi_grid_rad.size();
    for (std::size_t index = 0; index < fit.cells.size(); ++index) {
        const auto& c = fit.cells[index];
        const double tau = scan.tau_grid_s[index / n_xi];
        const double xi = scan.xi_grid_rad[index % n_xi];
        double theory = std::nan("");
        if (scan.truth) {
            const LockInSequence seq{tau, scan.pulse_count, XiFixed{xi}};
            theory = wrap_phase(lockin_phase(seq, xi + scan.truth->xi_offset_rad, f_m_hz,
                                             scan.truth->phase_amplitude_rad));
        }
        fmt::print(out, "{},{},{},{},{},{},{},{}\n", tau, xi, cell(theory),
                   c.usable ? cell(c.phase) : "NA", c.usable ? cell(c.phase_sigma) : "NA",
                   cell(fit.model_phase[index]), cell(c.contrast), c.usable ? 1 : 0);
    }
}

void write_contrast_curve_csv(const ScanResult& scan, const ContrastCurveFit& fit,
                              std::ostream& out) {
    const double a_fit = fit.result.at("amplitude").value;
    const double f_fit = fit.result.at("frequency").value;
    fmt::print(out,
               "tau_s,ratio,ratio_sigma,contrast,contrast_sigma,reference_contrast,"
               "reference_sigma,fit_ratio,theory_ratio,usable\n");
    for (const auto& p : fit.points) {
        double theory = std::nan("");
        if (scan.truth) {
            theory = contrast_model(p.tau_s, scan.pulse_count, scan.truth->force_frequency_hz,
                                    scan.truth->phase_amplitude_rad);
        }
        fmt::print(out, "{},{},{},{},{},{},{},{},{},{}\n", p.tau_s, cell(p.ratio), cell(p.ratio_sigma),
                   cell(p.contrast), cell(p.contrast_sigma), cell(p.reference_contrast),
                   cell(p.reference_sigma), cell(contrast_model(p.tau_s, scan.pulse_count, f_fit, a_fit)),
                   cell(theory), p.usable ? 1 : 0);
    }
}

}  // namespace ionforce
