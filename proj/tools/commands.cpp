#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ionforce/constants.hpp"
#include "ionforce/lockin.hpp"
#include "ionforce/report_io.hpp"
#include "ionforce/scan_io.hpp"
#include "plot.hpp"
#include "units.hpp"

namespace ionforce::cli {

namespace fs = std::filesystem;

namespace {

std::string output_path(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return (fs::path(c.out_dir) / name).string();
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", path));
    return out;
}

std::string write_scan(const RunConfig& c, const ScanResult& scan, const std::string& stem) {
    const auto path = output_path(c, fmt::format("{}.{}", stem, c.format));
    save_scan(scan, path);
    return path;
}

nlohmann::json report_json(const RunConfig& c, const FitResult& fit, const ScanResult& scan,
                           const std::optional<SensitivityReport>& sensitivity) {
    nlohmann::json j;
    j["fit"] = fit_to_json(fit);
    j["scan"] = {{"mode", scan.mode == ScanMode::synchronous ? "synchronous" : "asynchronous"},
                 {"pulse_count", scan.pulse_count},
                 {"records", scan.records.size()},
                 {"references", scan.references.size()},
                 {"shots_per_phase", scan.shots_per_phase},
                 {"total_measurement_time_s", total_measurement_time_s(scan)}};
    if (scan.truth) {
        j["truth"] = {{"force_frequency_hz", scan.truth->force_frequency_hz},
                      {"phase_amplitude_rad", scan.truth->phase_amplitude_rad},
                      {"xi_offset_rad", scan.truth->xi_offset_rad},
                      {"x0_m", amplitude_from_phase(scan.truth->phase_amplitude_rad, c.trap)}};
    }
    if (sensitivity) j["sensitivity"] = sensitivity_to_json(*sensitivity);
    if (c.timestamp) {
        j["generated_at"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
    }
    return j;
}

std::vector<std::string> write_report(const RunConfig& c, const std::string& stem, const nlohmann::json& report,
                                      const FitResult& fit) {
    const auto json_path = output_path(c, stem + ".json");
    open_output(json_path) << report.dump(2) << '\n';
    const auto csv_path = output_path(c, stem + "_summary.csv");
    auto csv = open_output(csv_path);
    write_fit_csv(fit, csv);
    return {json_path, csv_path};
}

std::optional<SensitivityReport> try_sensitivity(const FitResult& fit, const TrapConfig& trap, double f_m,
                                                 const ScanResult& scan) {
    try {
        return sensitivity_report(fit, trap, f_m, total_measurement_time_s(scan));
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

std::string describe(const ParameterEstimate& p) {
    if (p.unit == "m") {
        return fmt::format("{} = {:.3f} nm, 95% CI [{:.3f}, {:.3f}] nm", p.name, p.value * 1e9, p.lower * 1e9,
                           p.upper * 1e9);
    }
    return fmt::format("{} = {:.6g} {}, 95% CI [{:.6g}, {:.6g}] {}", p.name, p.value, p.unit, p.lower, p.upper,
                       p.unit);
}

void print_fit(std::ostream& log, const FitResult& fit) {
    for (const auto& p : fit.parameters) fmt::print(log, "  {}\n", describe(p));
    for (const auto& f : fit.diagnostics.flags) fmt::print(log, "  flag: {}\n", f);
}

std::vector<std::string> fig2_layers(const RunConfig& c, const ScanResult& scan, const PhaseMapFit& fit,
                                     const std::string& stem) {
    std::vector<std::string> files;
    const auto csv_path = output_path(c, stem + ".csv");
    {
        auto out = open_output(csv_path);
        write_phase_map_csv(scan, fit, c.force_frequency_hz, out);
    }
    files.push_back(csv_path);
    if (c.plot) {
        // Panels: theory, per-cell measured phase, fitted model.
        const int rows = static_cast<int>(scan.tau_grid_s.size());
        const int cols = static_cast<int>(scan.xi_grid_rad.size());
        std::vector<double> theory(fit.cells.size(), NAN), measured(fit.cells.size(), NAN);
        for (std::size_t i = 0; i < fit.cells.size(); ++i) {
            const auto& cell = fit.cells[i];
            if (cell.usable) measured[i] = cell.phase;
            if (scan.truth) {
                const double tau = scan.tau_grid_s[cell.tau_index];
                const double xi = scan.xi_grid_rad[cell.xi_index];
                theory[i] = wrap_phase(lockin_phase({tau, scan.pulse_count, XiFixed{xi}}, xi + scan.truth->xi_offset_rad,
                                                    c.force_frequency_hz, scan.truth->phase_amplitude_rad));
            }
        }
        const auto ppm = output_path(c, stem + ".ppm");
        write_ppm(heatmap_panels({theory, measured, fit.model_phase}, rows, cols, kPi), ppm);
        files.push_back(ppm);
    }
    return files;
}

std::vector<std::string> fig3_layers(const RunConfig& c, const ScanResult& scan, const ContrastCurveFit& fit,
                                     const std::string& stem) {
    std::vector<std::string> files;
    const auto csv_path = output_path(c, stem + ".csv");
    {
        auto out = open_output(csv_path);
        write_contrast_curve_csv(scan, fit, out);
    }
    files.push_back(csv_path);
    if (c.plot) {
        std::vector<double> x, y, e, cx, cy;
        for (const auto& p : fit.points) {
            x.push_back(p.tau_s);
            y.push_back(p.usable ? p.ratio : NAN);
            e.push_back(p.ratio_sigma);
        }
        const double a = fit.result.at("amplitude").value;
        const double f = fit.result.at("frequency").value;
        const auto fine = linear_grid(scan.tau_grid_s.front(), scan.tau_grid_s.back(), 600);
        for (double t : fine) {
            cx.push_back(t);
            cy.push_back(contrast_model(t, scan.pulse_count, f, a));
        }
        const auto ppm = output_path(c, stem + ".ppm");
        write_ppm(curve_plot(x, y, e, cx, cy, -1.2, 1.2), ppm);
        files.push_back(ppm);
    }
    return files;
}

PhaseMapOptions map_options(const RunConfig& c) {
    PhaseMapOptions o;
    o.amplitude_max_rad = c.amplitude_max_rad;
    o.joint = c.joint;
    o.trap = c.trap;
    o.threads = c.threads;
    return o;
}

ContrastCurveOptions curve_options(const RunConfig& c) {
    ContrastCurveOptions o;
    o.frequency_min_hz = c.frequency_min_hz;
    o.frequency_max_hz = c.frequency_max_hz;
    o.frequency_step_hz = c.frequency_step_hz;
    o.amplitude_max_rad = c.amplitude_max_rad;
    o.trap = c.trap;
    o.threads = c.threads;
    return o;
}

}  // namespace

RunConfig resolve_config(RunConfig defaults, const std::optional<std::string>& config_path,
                         const Overrides& overrides) {
    RunConfig c = config_path ? load_config(*config_path, std::move(defaults)) : std::move(defaults);
    if (overrides.seed) c.seed = *overrides.seed;
    if (overrides.out_dir) c.out_dir = *overrides.out_dir;
    if (overrides.format) c.format = *overrides.format;
    if (overrides.threads) c.threads = *overrides.threads;
    if (overrides.shots) c.shots = *overrides.shots;
    if (overrides.plot) c.plot = true;
    if (overrides.force) {
        const std::string& text = *overrides.force;
        double value = 0.0;
        std::size_t used = 0;
        try {
            value = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        c.force_n = used == text.size() && used > 0 ? value : parse_quantity(text, Dimension::force);
        c.x0_m.reset();
    }
    c.validate();
    return c;
}

std::vector<std::string> cmd_simulate_sync(const RunConfig& c, std::ostream& log) {
    std::vector<std::string> files;
    for (int n : c.pulse_counts) {
        const auto scan = run_sync_scan(c.plan(n), c.truth(), c.noise());
        files.push_back(write_scan(c, scan, fmt::format("sync_scan_n{}", n)));
        fmt::print(log, "wrote {} ({} cells, {:.1f} s of measurement)\n", files.back(), scan.records.size(),
                   total_measurement_time_s(scan));
    }
    return files;
}

std::vector<std::string> cmd_simulate_async(const RunConfig& c, std::ostream& log) {
    std::vector<std::string> files;
    for (int n : c.pulse_counts) {
        const auto scan = run_async_scan(c.plan(n), c.truth(), c.noise(), c.paired);
        files.push_back(write_scan(c, scan, fmt::format("async_scan_n{}", n)));
        fmt::print(log, "wrote {} ({} tau points{}, {:.1f} s of measurement)\n", files.back(), scan.records.size(),
                   scan.paired ? " with references" : "", total_measurement_time_s(scan));
    }
    return files;
}

FitOutput cmd_fit(const RunConfig& c, const FitRequest& request, std::ostream& log) {
    const auto scan = load_scan(request.data_path, c.pulse_counts.front());
    FitOutput out;
    if (request.model == "fringe") {
        const auto csv_path = output_path(c, "fit_fringes.csv");
        auto csv = open_output(csv_path);
        fmt::print(csv, "record,tau_s,xi_rad,drive,contrast,contrast_lower,contrast_upper,phase,phase_lower,"
                        "phase_upper,flags\n");
        nlohmann::json fits = nlohmann::json::array();
        const auto emit = [&](const FringeRecord& r, std::size_t index) {
            FitResult fit;
            try {
                fit = fit_fringe(r);
            } catch (const DegenerateFringeError& e) {
                fit = e.fallback;
            }
            const auto& xi = r.sequence.xi_mode;
            const std::string xi_text =
                std::holds_alternative<XiFixed>(xi) ? fmt::format("{}", std::get<XiFixed>(xi).xi_rad) : "NA";
            std::string flags;
            for (const auto& f : fit.diagnostics.flags) flags += (flags.empty() ? "" : ";") + f;
            const auto& C = fit.at("contrast");
            const auto& P = fit.at("phase");
            fmt::print(csv, "{},{},{},{},{},{},{},{},{},{},{}\n", index, r.sequence.half_period_s, xi_text,
                       r.drive_on ? "on" : "off", C.value, C.lower, C.upper, P.value, P.lower, P.upper, flags);
            fits.push_back(fit_to_json(fit));
            out.results.push_back(std::move(fit));
        };
        for (std::size_t i = 0; i < scan.records.size(); ++i) emit(scan.records[i], i);
        for (std::size_t i = 0; i < scan.references.size(); ++i) emit(scan.references[i], scan.records.size() + i);
        const auto json_path = output_path(c, "fit_fringes.json");
        open_output(json_path) << nlohmann::json{{"model", "fringe"}, {"fits", fits}}.dump(2) << '\n';
        out.files = {csv_path, json_path};
        fmt::print(log, "fitted {} fringes\n", out.results.size());
        return out;
    }
    if (request.model == "phase-map") {
        const auto fit = fit_phase_map(scan, c.force_frequency_hz, map_options(c));
        const auto sens = try_sensitivity(fit.result, c.trap, c.force_frequency_hz, scan);
        out.files = write_report(c, "fit_phase_map", report_json(c, fit.result, scan, sens), fit.result);
        for (auto& f : fig2_layers(c, scan, fit, "fit_phase_map_layers")) out.files.push_back(f);
        print_fit(log, fit.result);
        out.results.push_back(fit.result);
        return out;
    }
    if (request.model == "contrast-curve") {
        const auto fit = fit_contrast_curve(scan, curve_options(c));
        const double f_hat = fit.result.at("frequency").value;
        const auto sens = try_sensitivity(fit.result, c.trap, f_hat, scan);
        auto report = report_json(c, fit.result, scan, sens);
        report["fourier_limit_hz"] = fit.fourier_limit_hz;
        out.files = write_report(c, "fit_contrast_curve", report, fit.result);
        for (auto& f : fig3_layers(c, scan, fit, "fit_contrast_curve_layers")) out.files.push_back(f);
        print_fit(log, fit.result);
        out.results.push_back(fit.result);
        return out;
    }
    throw ValidationError(fmt::format("unknown fit model '{}' (fringe, phase-map, contrast-curve)", request.model));
}

Fig2Output cmd_reproduce_fig2(const RunConfig& c, std::ostream& log) {
    Fig2Output out;
    const int n = c.pulse_counts.front();
    out.scan = run_sync_scan(c.plan(n), c.truth(), c.noise());
    out.files.push_back(write_scan(c, out.scan, "fig2_scan"));
    out.fit = fit_phase_map(out.scan, c.force_frequency_hz, map_options(c));
    out.sensitivity = try_sensitivity(out.fit.result, c.trap, c.force_frequency_hz, out.scan);
    for (auto& f : fig2_layers(c, out.scan, out.fit, "fig2_phase_map")) out.files.push_back(f);
    for (auto& f : write_report(c, "fig2_fit", report_json(c, out.fit.result, out.scan, out.sensitivity), out.fit.result)) {
        out.files.push_back(f);
    }
    fmt::print(log, "phase map, n = {}, {} x {} cells, truth x0 = {:.3f} nm\n", n, c.tau.points, c.xi_points,
               amplitude_from_phase(c.truth().phase_amplitude_rad, c.trap) * 1e9);
    print_fit(log, out.fit.result);
    if (out.sensitivity) {
        fmt::print(log, "  sensitivity = {:.3g} N/rtHz over {:.1f} s\n", out.sensitivity->sensitivity_n_per_rthz,
                   out.sensitivity->total_time_s);
    }
    return out;
}

std::vector<Fig3Output> cmd_reproduce_fig3(const RunConfig& c, std::ostream& log) {
    std::vector<Fig3Output> outs;
    for (int n : c.pulse_counts) {
        Fig3Output o;
        o.pulse_count = n;
        o.scan = run_async_scan(c.plan(n), c.truth(), c.noise(), c.paired);
        const auto stem = fmt::format("fig3_n{}", n);
        o.files.push_back(write_scan(c, o.scan, stem + "_scan"));
        o.fit = fit_contrast_curve(o.scan, curve_options(c));
        const double f_hat = o.fit.result.at("frequency").value;
        o.sensitivity = try_sensitivity(o.fit.result, c.trap, f_hat, o.scan);
        for (auto& f : fig3_layers(c, o.scan, o.fit, stem + "_contrast")) o.files.push_back(f);
        auto report = report_json(c, o.fit.result, o.scan, o.sensitivity);
        report["fourier_limit_hz"] = o.fit.fourier_limit_hz;
        nlohmann::json modes = nlohmann::json::array();
        for (const auto& m : o.fit.modes) {
            modes.push_back({{"amplitude_rad", m.amplitude_rad}, {"frequency_hz", m.frequency_hz},
                             {"log_likelihood", m.log_likelihood}});
        }
        report["modes"] = modes;
        for (auto& f : write_report(c, stem + "_fit", report, o.fit.result)) o.files.push_back(f);
        fmt::print(log, "contrast curve, n = {}, {} tau points, Fourier limit {:.2f} Hz\n", n, o.scan.tau_grid_s.size(),
                   o.fit.fourier_limit_hz);
        print_fit(log, o.fit.result);
        outs.push_back(std::move(o));
    }
    return outs;
}

bool cmd_selftest(const CheckOptions& options, std::ostream& log) {
    bool ok = true;
    for (const auto& r : run_property_suite(options)) {
        fmt::print(log, "{} {}: {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
        ok = ok && r.passed;
    }
    return ok;
}

}  // namespace ionforce::cli
