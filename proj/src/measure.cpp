#include "ionforce/measure.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "ionforce/constants.hpp"
#include "ionforce/errors.hpp"
#include "ionforce/parallel.hpp"
#include "ionforce/rng.hpp"

namespace ionforce {

void NoiseModel::validate() const {
    require(dephasing_contrast >= 0.0 && dephasing_contrast <= 1.0,
            "noise: dephasing contrast must lie in [0, 1]");
    if (d_decay_lifetime_s) {
        require(std::isfinite(*d_decay_lifetime_s) && *d_decay_lifetime_s > 0.0,
                "noise: D-level lifetime must be positive");
    }
}

double NoiseModel::effective_contrast(const LockInSequence& seq) const {
    double c = dephasing_contrast;
    if (d_decay_lifetime_s) c *= std::exp(-seq.duration_s() / *d_decay_lifetime_s);
    return c;
}

void Truth::validate() const {
    require(std::isfinite(force_frequency_hz) && force_frequency_hz > 0.0,
            "truth: force frequency must be positive");
    require(std::isfinite(phase_amplitude_rad) && phase_amplitude_rad >= 0.0,
            "truth: phase amplitude must be non-negative");
    require(std::isfinite(xi_offset_rad), "truth: xi offset must be finite");
}

void FringeRecord::validate() const {
    sequence.validate();
    require(shots_per_phase >= 1, "fringe: shots per phase must be positive");
    require(phases_rad.size() == d_counts.size(),
            "fringe: phase grid and count vector differ in length");
    for (int d : d_counts) {
        require(d >= 0 && d <= shots_per_phase,
                fmt::format("fringe: D count {} outside [0, {}]", d, shots_per_phase));
    }
    std::vector<double> distinct;
    for (double phi : phases_rad) {
        require(std::isfinite(phi), "fringe: analysis phase must be finite");
        const double w = wrap_phase(phi);
        if (std::none_of(distinct.begin(), distinct.end(),
                         [&](double x) { return std::abs(wrap_phase(x - w)) < 1e-12; })) {
            distinct.push_back(w);
        }
    }
    require(distinct.size() >= 3, "fringe: at least 3 distinct analysis phases are required");
}

namespace {

void require_increasing(const std::vector<double>& grid, const char* name) {
    for (std::size_t i = 1; i < grid.size(); ++i) {
        require(grid[i] > grid[i - 1], fmt::format("{} grid must be strictly increasing", name));
    }
}

}  // namespace

const FringeRecord& ScanResult::cell(std::size_t tau_index, std::size_t xi_index) const {
    const std::size_t columns = mode == ScanMode::synchronous ? xi_grid_rad.size() : 1;
    return records.at(tau_index * columns + xi_index);
}

void ScanResult::validate() const {
    require(pulse_count >= 1, "scan: pulse count must be at least 1");
    require(!tau_grid_s.empty(), "scan: empty tau grid");
    require_increasing(tau_grid_s, "tau");
    require_increasing(xi_grid_rad, "xi");
    const bool sync = mode == ScanMode::synchronous;
    require(!sync || !xi_grid_rad.empty(), "scan: synchronous scan needs a xi grid");
    require(sync || xi_grid_rad.empty(), "scan: asynchronous scan has no xi grid");
    const std::size_t expected = tau_grid_s.size() * (sync ? xi_grid_rad.size() : 1);
    require(records.size() == expected,
            fmt::format("scan: expected {} records, found {}", expected, records.size()));
    require(!(sync && paired), "scan: only asynchronous scans can be paired");
    require(!paired || references.size() == tau_grid_s.size(),
            "scan: paired scan needs one reference record per tau");
    require(paired || references.empty(), "scan: reference records present on unpaired scan");

    auto check = [&](const FringeRecord& r, std::size_t i_tau, bool drive_on) {
        r.validate();
        require(r.sequence.pulse_count == pulse_count, "scan: record pulse count mismatch");
        require(r.sequence.half_period_s == tau_grid_s[i_tau], "scan: record tau mismatch");
        require(r.shots_per_phase == shots_per_phase, "scan: records must share shots per phase");
        require(r.phases_rad == phases_rad, "scan: records must share the phase grid");
        require(r.drive_on == drive_on, "scan: record drive flag mismatch");
    };
    for (std::size_t i = 0; i < tau_grid_s.size(); ++i) {
        if (sync) {
            for (std::size_t j = 0; j < xi_grid_rad.size(); ++j) {
                const auto& r = cell(i, j);
                check(r, i, true);
                const auto* fixed = std::get_if<XiFixed>(&r.sequence.xi_mode);
                require(fixed && fixed->xi_rad == xi_grid_rad[j], "scan: record xi mismatch");
            }
        } else {
            check(records[i], i, true);
            require(std::holds_alternative<XiUniform>(records[i].sequence.xi_mode),
                    "scan: asynchronous record must use uniform xi");
            if (paired) check(references[i], i, false);
        }
    }
}

std::vector<double> phase_grid(int points) {
    require(points >= 3, "phase grid needs at least 3 points");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) grid[i] = kTwoPi * i / points;
    return grid;
}

std::vector<double> linear_grid(double first, double last, int points) {
    require(points >= 1, "grid needs at least one point");
    if (points == 1) return {first};
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) grid[i] = first + (last - first) * i / (points - 1);
    grid.back() = last;
    return grid;
}

double shot_probability(const LockInSequence& seq, double xi_rad, double phi_rad,
                        double f_m_hz, double amplitude_rad, const NoiseModel& noise) {
    const double phi_clk = lockin_phase(seq, xi_rad, f_m_hz, amplitude_rad);
    return 0.5 + 0.5 * noise.effective_contrast(seq) * std::cos(phi_rad - phi_clk);
}

FringeRecord simulate_fringe(const LockInSequence& seq, std::span<const double> phases_rad,
                             int shots_per_phase, const Truth& truth, const NoiseModel& noise,
                             std::uint64_t cell_index) {
    seq.validate();
    truth.validate();
    noise.validate();
    require(shots_per_phase >= 1, "fringe: shots per phase must be positive");

    FringeRecord record;
    record.sequence = seq;
    record.phases_rad.assign(phases_rad.begin(), phases_rad.end());
    record.shots_per_phase = shots_per_phase;
    record.d_counts.assign(phases_rad.size(), 0);
    record.drive_on = true;
    record.truth = truth;

    const CounterRng rng(noise.rng_seed, cell_index);
    const auto shots = static_cast<std::uint64_t>(shots_per_phase);
    const double f = truth.force_frequency_hz;
    const double a = truth.phase_amplitude_rad;

    if (const auto* fixed = std::get_if<XiFixed>(&seq.xi_mode)) {
        const double xi = fixed->xi_rad + truth.xi_offset_rad;
        for (std::size_t k = 0; k < phases_rad.size(); ++k) {
            const double p = shot_probability(seq, xi, phases_rad[k], f, a, noise);
            int count = 0;
            for (std::uint64_t s = 0; s < shots; ++s) {
                count += rng.uniform(k * shots + s) < p ? 1 : 0;
            }
            record.d_counts[k] = count;
        }
    } else {
        const double contrast = noise.effective_contrast(seq);
        for (std::size_t k = 0; k < phases_rad.size(); ++k) {
            int count = 0;
            for (std::uint64_t s = 0; s < shots; ++s) {
                const std::uint64_t shot = 2 * (k * shots + s);
                const double xi = kTwoPi * rng.uniform(shot);
                const double phi_clk = lockin_phase(seq, xi, f, a);
                const double p = 0.5 + 0.5 * contrast * std::cos(phases_rad[k] - phi_clk);
                count += rng.uniform(shot + 1) < p ? 1 : 0;
            }
            record.d_counts[k] = count;
        }
    }
    return record;
}

void ScanPlan::validate(bool synchronous) const {
    require(!tau_grid_s.empty(), "scan plan: empty tau grid");
    require_increasing(tau_grid_s, "tau");
    for (double tau : tau_grid_s) require(tau > 0.0, "scan plan: tau must be positive");
    if (synchronous) {
        require(!xi_grid_rad.empty(), "scan plan: empty xi grid");
        require_increasing(xi_grid_rad, "xi");
    }
    require(pulse_count >= 1, "scan plan: pulse count must be at least 1");
    require(shots_per_phase >= 1, "scan plan: shots per phase must be positive");
    require(phases_rad.size() >= 3, "scan plan: at least 3 analysis phases are required");
    require(shot_overhead_s >= 0.0, "scan plan: shot overhead must be non-negative");
}

ScanResult run_sync_scan(const ScanPlan& plan, const Truth& truth, const NoiseModel& noise) {
    plan.validate(true);
    truth.validate();
    noise.validate();
    ScanResult scan;
    scan.mode = ScanMode::synchronous;
    scan.pulse_count = plan.pulse_count;
    scan.tau_grid_s = plan.tau_grid_s;
    scan.xi_grid_rad = plan.xi_grid_rad;
    scan.phases_rad = plan.phases_rad;
    scan.shots_per_phase = plan.shots_per_phase;
    scan.shot_overhead_s = plan.shot_overhead_s;
    scan.truth = truth;
    scan.noise = noise;

    const std::size_t columns = plan.xi_grid_rad.size();
    scan.records.resize(plan.tau_grid_s.size() * columns);
    parallel_for(scan.records.size(), plan.threads, [&](std::size_t index) {
        const LockInSequence seq{plan.tau_grid_s[index / columns], plan.pulse_count,
                                 XiFixed{plan.xi_grid_rad[index % columns]}};
        scan.records[index] =
            simulate_fringe(seq, plan.phases_rad, plan.shots_per_phase, truth, noise, index);
    });
    return scan;
}

ScanResult run_async_scan(const ScanPlan& plan, const Truth& truth, const NoiseModel& noise,
                          bool paired) {
    plan.validate(false);
    truth.validate();
    noise.validate();
    ScanResult scan;
    scan.mode = ScanMode::asynchronous;
    scan.pulse_count = plan.pulse_count;
    scan.tau_grid_s = plan.tau_grid_s;
    scan.phases_rad = plan.phases_rad;
    scan.shots_per_phase = plan.shots_per_phase;
    scan.shot_overhead_s = plan.shot_overhead_s;
    scan.paired = paired;
    scan.truth = truth;
    scan.noise = noise;

    const std::size_t n_tau = plan.tau_grid_s.size();
    scan.records.resize(n_tau);
    if (paired) scan.references.resize(n_tau);
    Truth twin = truth;
    twin.phase_amplitude_rad = 0.0;
    parallel_for(n_tau * (paired ? 2 : 1), plan.threads, [&](std::size_t index) {
        const std::size_t i = index % n_tau;
        const LockInSequence seq{plan.tau_grid_s[i], plan.pulse_count, XiUniform{}};
        if (index < n_tau) {
            scan.records[i] =
                simulate_fringe(seq, plan.phases_rad, plan.shots_per_phase, truth, noise, index);
        } else {
            scan.references[i] =
                simulate_fringe(seq, plan.phases_rad, plan.shots_per_phase, twin, noise, index);
            scan.references[i].drive_on = false;
        }
    });
    return scan;
}

double shot_duration_s(const LockInSequence& seq, double overhead_s) {
    return seq.duration_s() + overhead_s;
}

double total_measurement_time_s(const ScanResult& scan) {
    double total = 0.0;
    auto add = [&](const FringeRecord& r) {
        total += static_cast<double>(r.shots_per_phase) * static_cast<double>(r.phases_rad.size()) *
                 shot_duration_s(r.sequence, scan.shot_overhead_s);
    };
    for (const auto& r : scan.records) add(r);
    for (const auto& r : scan.references) add(r);
    return total;
}

}  // namespace ionforce
