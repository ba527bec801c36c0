#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "ionforce/constants.hpp"
#include "ionforce/errors.hpp"
#include "units.hpp"

namespace ionforce::cli {

namespace {

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, std::string_view field, std::string_view message) const {
        throw ValidationError(fmt::format("{}:{}: {}: {}", source_, node.Mark().line + 1, field, message));
    }

    void expect_keys(const YAML::Node& node, std::string_view field,
                     std::initializer_list<std::string_view> allowed) const {
        if (!node.IsMap()) fail(node, field, "expected a mapping");
        for (const auto& item : node) {
            const auto key = item.first.as<std::string>();
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
                std::string names;
                for (auto a : allowed) names += fmt::format("{}{}", names.empty() ? "" : ", ", a);
                fail(item.first, field.empty() ? key : fmt::format("{}.{}", field, key),
                     fmt::format("unknown key (allowed: {})", names));
            }
        }
    }

    std::string scalar(const YAML::Node& node, std::string_view field) const {
        if (!node.IsScalar()) fail(node, field, "expected a single value");
        return node.Scalar();
    }

    double quantity(const YAML::Node& node, std::string_view field, Dimension d) const {
        const auto text = scalar(node, field);
        try {
            return parse_quantity(text, d);
        } catch (const ValidationError& e) {
            fail(node, field, e.what());
        }
    }

    double number(const YAML::Node& node, std::string_view field) const {
        const auto text = scalar(node, field);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
            fail(node, field, fmt::format("expected a plain number, got '{}'", text));
        }
        return v;
    }

    long long integer(const YAML::Node& node, std::string_view field) const {
        const auto text = scalar(node, field);
        long long v = 0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || end != text.data() + text.size()) {
            fail(node, field, fmt::format("expected an integer, got '{}'", text));
        }
        return v;
    }

    int positive_int(const YAML::Node& node, std::string_view field) const {
        const auto v = integer(node, field);
        if (v < 1 || v > 1'000'000'000) fail(node, field, "must be a positive integer");
        return static_cast<int>(v);
    }

    bool boolean(const YAML::Node& node, std::string_view field) const {
        const auto text = scalar(node, field);
        if (text == "true") return true;
        if (text == "false") return false;
        fail(node, field, fmt::format("expected true or false, got '{}'", text));
    }

    // Runs a downstream validation and pins any failure to `node`.
    template <class F>
    void checked(const YAML::Node& node, std::string_view field, F&& check) const {
        try {
            check();
        } catch (const ValidationError& e) {
            fail(node, field, e.what());
        }
    }

private:
    std::string source_;
};

void read_output(const Reader& r, const YAML::Node& node, RunConfig& c) {
    r.expect_keys(node, "output", {"directory", "format", "timestamp", "plot"});
    if (node["directory"]) c.out_dir = r.scalar(node["directory"], "output.directory");
    if (node["format"]) {
        c.format = r.scalar(node["format"], "output.format");
        if (c.format != "csv" && c.format != "json") r.fail(node["format"], "output.format", "must be csv or json");
    }
    if (node["timestamp"]) c.timestamp = r.boolean(node["timestamp"], "output.timestamp");
    if (node["plot"]) c.plot = r.boolean(node["plot"], "output.plot");
}

void read_trap(const Reader& r, const YAML::Node& node, RunConfig& c) {
    r.expect_keys(node, "trap", {"mass", "frequency", "wavelength", "projection"});
    if (node["mass"]) c.trap.ion_mass_kg = r.quantity(node["mass"], "trap.mass", Dimension::mass);
    if (node["frequency"]) {
        c.trap.trap_frequency_hz = r.quantity(node["frequency"], "trap.frequency", Dimension::frequency);
    }
    if (node["wavelength"]) {
        c.trap.clock_wavelength_m = r.quantity(node["wavelength"], "trap.wavelength", Dimension::length);
    }
    if (node["projection"]) c.trap.projection_factor = r.number(node["projection"], "trap.projection");
    r.checked(node, "trap", [&] { c.trap.validate(); });
}

void read_drive(const Reader& r, const YAML::Node& node, RunConfig& c) {
    r.expect_keys(node, "drive", {"force", "x0", "frequency", "xi_offset"});
    if (node["force"] && node["x0"]) r.fail(node, "drive", "give either force or x0, not both");
    if (node["force"]) {
        c.force_n = r.quantity(node["force"], "drive.force", Dimension::force);
        c.x0_m.reset();
    }
    if (node["x0"]) {
        c.x0_m = r.quantity(node["x0"], "drive.x0", Dimension::length);
        c.force_n.reset();
    }
    if (node["frequency"]) {
        c.force_frequency_hz = r.quantity(node["frequency"], "drive.frequency", Dimension::frequency);
    }
    if (node["xi_offset"]) c.xi_offset_rad = r.quantity(node["xi_offset"], "drive.xi_offset", Dimension::angle);
    r.checked(node, "drive", [&] {
        c.force_amplitude_n();
        c.truth().validate();
    });
}

void read_scan(const Reader& r, const YAML::Node& node, RunConfig& c) {
    r.expect_keys(node, "scan",
                  {"pulse_counts", "tau", "xi_points", "phase_points", "shots", "shot_overhead", "paired"});
    if (const auto n = node["pulse_counts"]) {
        if (n.IsScalar()) {
            c.pulse_counts = {r.positive_int(n, "scan.pulse_counts")};
        } else if (n.IsSequence() && n.size() > 0) {
            c.pulse_counts.clear();
            for (const auto& item : n) c.pulse_counts.push_back(r.positive_int(item, "scan.pulse_counts"));
        } else {
            r.fail(n, "scan.pulse_counts", "expected an integer or a non-empty list");
        }
    }
    if (const auto t = node["tau"]) {
        r.expect_keys(t, "scan.tau", {"from", "to", "points"});
        if (t["from"]) c.tau.first_s = r.quantity(t["from"], "scan.tau.from", Dimension::time);
        if (t["to"]) c.tau.last_s = r.quantity(t["to"], "scan.tau.to", Dimension::time);
        if (t["points"]) c.tau.points = r.positive_int(t["points"], "scan.tau.points");
        if (!(c.tau.first_s > 0.0) || c.tau.last_s < c.tau.first_s) {
            r.fail(t, "scan.tau", "need 0 < from <= to");
        }
        if (c.tau.points > 1 && c.tau.last_s == c.tau.first_s) r.fail(t, "scan.tau", "from == to with several points");
    }
    if (node["xi_points"]) c.xi_points = r.positive_int(node["xi_points"], "scan.xi_points");
    if (node["phase_points"]) {
        c.phase_points = r.positive_int(node["phase_points"], "scan.phase_points");
        if (c.phase_points < 3) r.fail(node["phase_points"], "scan.phase_points", "need at least 3 analysis phases");
    }
    if (node["shots"]) c.shots = r.positive_int(node["shots"], "scan.shots");
    if (node["shot_overhead"]) {
        c.shot_overhead_s = r.quantity(node["shot_overhead"], "scan.shot_overhead", Dimension::time);
        if (c.shot_overhead_s < 0.0) r.fail(node["shot_overhead"], "scan.shot_overhead", "must be non-negative");
    }
    if (node["paired"]) c.paired = r.boolean(node["paired"], "scan.paired");
}

void read_noise(const Reader& r, const YAML::Node& node, RunConfig& c) {
    r.expect_keys(node, "noise", {"dephasing_contrast", "d_lifetime"});
    if (node["dephasing_contrast"]) {
        c.dephasing_contrast = r.number(node["dephasing_contrast"], "noise.dephasing_contrast");
    }
    if (node["d_lifetime"]) c.d_lifetime_s = r.quantity(node["d_lifetime"], "noise.d_lifetime", Dimension::time);
    r.checked(node, "noise", [&] { c.noise().validate(); });
}

void read_fit(const Reader& r, const YAML::Node& node, RunConfig& c) {
    r.expect_keys(node, "fit", {"amplitude_max", "frequency_window", "frequency_step", "joint"});
    if (node["amplitude_max"]) {
        c.amplitude_max_rad = r.quantity(node["amplitude_max"], "fit.amplitude_max", Dimension::angle);
        if (!(c.amplitude_max_rad > 0.0)) r.fail(node["amplitude_max"], "fit.amplitude_max", "must be positive");
    }
    if (const auto w = node["frequency_window"]) {
        r.expect_keys(w, "fit.frequency_window", {"from", "to"});
        if (w["from"]) c.frequency_min_hz = r.quantity(w["from"], "fit.frequency_window.from", Dimension::frequency);
        if (w["to"]) c.frequency_max_hz = r.quantity(w["to"], "fit.frequency_window.to", Dimension::frequency);
        if (!(c.frequency_min_hz > 0.0 && c.frequency_max_hz > c.frequency_min_hz)) {
            r.fail(w, "fit.frequency_window", "need 0 < from < to");
        }
    }
    if (node["frequency_step"]) {
        c.frequency_step_hz = r.quantity(node["frequency_step"], "fit.frequency_step", Dimension::frequency);
        if (!(c.frequency_step_hz > 0.0)) r.fail(node["frequency_step"], "fit.frequency_step", "must be positive");
    }
    if (node["joint"]) c.joint = r.boolean(node["joint"], "fit.joint");
}

}  // namespace

void RunConfig::validate() const {
    trap.validate();
    require(threads >= 1, "threads: must be at least 1");
    require(format == "csv" || format == "json", "output.format: must be csv or json");
    require(!out_dir.empty(), "output.directory: must not be empty");
    require(force_n.has_value() != x0_m.has_value(), "drive: give exactly one of force or x0");
    require(std::isfinite(force_frequency_hz) && force_frequency_hz > 0.0, "drive.frequency: must be positive");
    require(std::isfinite(xi_offset_rad), "drive.xi_offset: must be finite");
    require(!pulse_counts.empty(), "scan.pulse_counts: must not be empty");
    require(xi_points >= 2, "scan.xi_points: need at least 2");
    require(frequency_min_hz > 0.0 && frequency_max_hz > frequency_min_hz, "fit.frequency_window: need 0 < from < to");
    require(frequency_step_hz > 0.0, "fit.frequency_step: must be positive");
    require(amplitude_max_rad > 0.0, "fit.amplitude_max: must be positive");
    force_amplitude_n();
    truth().validate();
    noise().validate();
    for (int n : pulse_counts) {
        plan(n).validate(true);
        plan(n).validate(false);
    }
}

double RunConfig::force_amplitude_n() const {
    if (force_n) return *force_n;
    require(x0_m.has_value(), "drive: give exactly one of force or x0");
    return force_from_amplitude(*x0_m, force_frequency_hz, trap);
}

Truth RunConfig::truth() const {
    const double x0 = x0_m ? *x0_m
                           : steady_state_amplitude({*force_n, force_frequency_hz, 0.0}, trap);
    // Above resonance the motion is in antiphase with the force.
    const double offset = x0 < 0.0 ? xi_offset_rad + kPi : xi_offset_rad;
    return {force_frequency_hz, phase_amplitude(std::abs(x0), trap), offset};
}

NoiseModel RunConfig::noise() const {
    return {dephasing_contrast, seed, d_lifetime_s};
}

ScanPlan RunConfig::plan(int pulse_count) const {
    ScanPlan p;
    p.tau_grid_s = linear_grid(tau.first_s, tau.last_s, tau.points);
    p.xi_grid_rad = phase_grid(xi_points);
    p.pulse_count = pulse_count;
    p.shots_per_phase = shots;
    p.phases_rad = phase_grid(phase_points);
    p.shot_overhead_s = shot_overhead_s;
    p.threads = threads;
    return p;
}

RunConfig fig2_defaults() {
    RunConfig c;
    c.pulse_counts = {10};
    c.tau = {50e-6, 450e-6, 20};
    c.xi_points = 20;
    c.phase_points = 12;
    c.shots = 250;
    c.dephasing_contrast = 0.95;
    c.x0_m = 117.5e-9;
    c.xi_offset_rad = 0.3;
    return c;
}

RunConfig fig3_defaults() {
    RunConfig c;
    c.pulse_counts = {10, 20};
    c.tau = {150e-6, 350e-6, 40};
    c.phase_points = 12;
    c.shots = 12;
    c.paired = true;
    c.dephasing_contrast = 1.0;
    c.x0_m = 117.5e-9;
    c.xi_offset_rad = 0.0;
    return c;
}

RunConfig parse_config(const std::string& yaml_text, RunConfig base, const std::string& source) {
    const Reader r(source);
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ValidationError(fmt::format("{}:{}: {}", source, e.mark.line + 1, e.msg));
    }
    if (root.IsNull()) return base;
    r.expect_keys(root, "", {"seed", "threads", "output", "trap", "drive", "scan", "noise", "fit"});
    if (root["seed"]) {
        const auto text = r.scalar(root["seed"], "seed");
        std::uint64_t v = 0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || end != text.data() + text.size()) {
            r.fail(root["seed"], "seed", "expected an unsigned 64-bit integer");
        }
        base.seed = v;
    }
    if (root["threads"]) base.threads = static_cast<unsigned>(r.positive_int(root["threads"], "threads"));
    if (root["output"]) read_output(r, root["output"], base);
    if (root["trap"]) read_trap(r, root["trap"], base);
    if (root["drive"]) read_drive(r, root["drive"], base);
    if (root["scan"]) read_scan(r, root["scan"], base);
    if (root["noise"]) read_noise(r, root["noise"], base);
    if (root["fit"]) read_fit(r, root["fit"], base);
    try {
        base.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", source, e.what()));
    }
    return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open config file '{}'", path));
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), std::move(base), path);
}

}  // namespace ionforce::cli
