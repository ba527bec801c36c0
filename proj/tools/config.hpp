#pragma once

// Run configuration, read from YAML. Every physical quantity carries a unit.
//
//   seed: 7
//   threads: 1
//   output: {directory: out, format: csv, timestamp: false, plot: true}
//   trap: {mass: 87.9 amu, frequency: 1.13 MHz, wavelength: 674 nm, projection: 0.7071}
//   drive: {x0: 117.5 nm, frequency: 1013 Hz, xi_offset: 0.3 rad}   # or force: 8.64e-19 N
//   scan:
//     pulse_counts: [10]
//     tau: {from: 50 us, to: 450 us, points: 20}
//     xi_points: 20
//     phase_points: 12
//     shots: 250
//     shot_overhead: 3 ms
//     paired: true
//   noise: {dephasing_contrast: 0.95, d_lifetime: 390 ms}
//   fit:
//     amplitude_max: 3 rad
//     frequency_window: {from: 980 Hz, to: 1050 Hz}
//     frequency_step: 0.25 Hz
//     joint: false

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ionforce/measure.hpp"
#include "ionforce/oscillator.hpp"

namespace ionforce::cli {

struct TauRange {
    double first_s = 50e-6;
    double last_s = 450e-6;
    int points = 20;
};

struct RunConfig {
    std::uint64_t seed = 1;
    unsigned threads = 1;

    std::string out_dir = "out";
    std::string format = "csv";
    bool timestamp = false;
    bool plot = false;

    TrapConfig trap = TrapConfig::strontium_reference();
    /// Exactly one of force / x0 sets the drive strength.
    std::optional<double> force_n;
    std::optional<double> x0_m = 117.5e-9;
    double force_frequency_hz = 1013.0;
    double xi_offset_rad = 0.3;

    std::vector<int> pulse_counts{10};
    TauRange tau;
    int xi_points = 20;
    int phase_points = 12;
    int shots = 250;
    double shot_overhead_s = 3e-3;
    bool paired = true;

    double dephasing_contrast = 0.95;
    std::optional<double> d_lifetime_s;

    double amplitude_max_rad = 3.0;
    double frequency_min_hz = 980.0;
    double frequency_max_hz = 1050.0;
    double frequency_step_hz = 0.25;
    bool joint = false;

    void validate() const;

    /// Force amplitude, from `force_n` or converted from `x0_m`.
    double force_amplitude_n() const;
    /// Generating parameters for the simulator.
    Truth truth() const;
    NoiseModel noise() const;
    ScanPlan plan(int pulse_count) const;
};

/// Synchronous phase-map reproduction: n = 10, 20 x 20 (tau, xi) grid.
RunConfig fig2_defaults();
/// Asynchronous contrast-curve reproduction: n = 10 and 20, paired.
RunConfig fig3_defaults();

/// Overlays the YAML document on `base`. Errors carry `source:line`.
RunConfig parse_config(const std::string& yaml_text, RunConfig base,
                       const std::string& source = "<config>");
RunConfig load_config(const std::string& path, RunConfig base);

}  // namespace ionforce::cli
