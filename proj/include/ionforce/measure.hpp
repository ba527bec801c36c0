#pragma once

// Shot-level Monte-Carlo of the Ramsey lock-in experiment: pi/2 pulse at a
// triggered or random force phase, echo train, analysis pi/2 pulse at phase
// phi, and projective detection of the D level.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ionforce/lockin.hpp"

namespace ionforce {

struct NoiseModel {
    /// Multiplicative fringe-contrast factor from dephasing.
    double dephasing_contrast = 1.0;
    std::uint64_t rng_seed = 0;
    /// D-level lifetime; when set, contrast is reduced by exp(-2 n tau / lifetime).
    std::optional<double> d_decay_lifetime_s;

    void validate() const;
    double effective_contrast(const LockInSequence& seq) const;
    bool operator==(const NoiseModel&) const = default;
};

/// Generating parameters of a synthetic experiment.
struct Truth {
    double force_frequency_hz = 0.0;
    double phase_amplitude_rad = 0.0;
    /// Instrument offset between the nominal trigger phase and the actual force phase.
    double xi_offset_rad = 0.0;

    void validate() const;
    bool operator==(const Truth&) const = default;
};

enum class Provenance { synthetic, ingested };

struct FringeRecord {
    LockInSequence sequence;
    std::vector<double> phases_rad;
    int shots_per_phase = 0;
    std::vector<int> d_counts;
    /// False for the zero-force reference twin of a paired scan.
    bool drive_on = true;
    std::optional<Truth> truth;
    Provenance provenance = Provenance::synthetic;

    void validate() const;
    bool operator==(const FringeRecord&) const = default;
};

enum class ScanMode { synchronous, asynchronous };

struct ScanResult {
    ScanMode mode = ScanMode::synchronous;
    int pulse_count = 1;
    std::vector<double> tau_grid_s;
    /// Nominal trigger phases; empty for asynchronous scans.
    std::vector<double> xi_grid_rad;
    std::vector<double> phases_rad;
    int shots_per_phase = 0;
    /// Synchronous: row-major over (tau, xi). Asynchronous: one record per tau.
    std::vector<FringeRecord> records;
    /// Zero-force twins, one per tau, when `paired`.
    std::vector<FringeRecord> references;
    bool paired = false;
    double shot_overhead_s = 3e-3;
    std::optional<Truth> truth;
    std::optional<NoiseModel> noise;
    Provenance provenance = Provenance::synthetic;

    const FringeRecord& cell(std::size_t tau_index, std::size_t xi_index) const;
    void validate() const;
    bool operator==(const ScanResult&) const = default;
};

/// `points` analysis phases equally spaced on [0, 2 pi).
std::vector<double> phase_grid(int points);

/// Equally spaced grid including both end points.
std::vector<double> linear_grid(double first, double last, int points);

/// D-level probability 1/2 + (C/2) cos(phi - phi_clk) for a single shot.
double shot_probability(const LockInSequence& seq, double xi_rad, double phi_rad,
                        double f_m_hz, double amplitude_rad, const NoiseModel& noise);

/// Simulates one fringe. In XiUniform mode xi is redrawn for every shot.
/// Random draws are keyed by (noise.rng_seed, cell_index, shot index).
FringeRecord simulate_fringe(const LockInSequence& seq, std::span<const double> phases_rad,
                             int shots_per_phase, const Truth& truth, const NoiseModel& noise,
                             std::uint64_t cell_index = 0);

struct ScanPlan {
    std::vector<double> tau_grid_s;
    /// Used by synchronous scans only.
    std::vector<double> xi_grid_rad;
    int pulse_count = 10;
    int shots_per_phase = 250;
    std::vector<double> phases_rad = phase_grid(12);
    /// Cooling, preparation and detection time added to every shot.
    double shot_overhead_s = 3e-3;
    unsigned threads = 1;

    void validate(bool synchronous) const;
};

ScanResult run_sync_scan(const ScanPlan& plan, const Truth& truth, const NoiseModel& noise);

ScanResult run_async_scan(const ScanPlan& plan, const Truth& truth, const NoiseModel& noise,
                          bool paired);

/// Wall-clock cost of one shot: 2 n tau plus the fixed overhead.
double shot_duration_s(const LockInSequence& seq, double overhead_s);

/// Total wall-clock time of every shot in the scan.
double total_measurement_time_s(const ScanResult& scan);

}  // namespace ionforce
