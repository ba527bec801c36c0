#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "ionforce/checks.hpp"
#include "ionforce/estimate.hpp"

namespace ionforce::cli {

/// Command-line flags that override the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> format;
    std::optional<unsigned> threads;
    std::optional<std::string> force;  ///< "8.6e-19 N"; a bare number is newtons
    std::optional<int> shots;
    bool plot = false;  ///< also write PPM images
};

RunConfig resolve_config(RunConfig defaults, const std::optional<std::string>& config_path,
                         const Overrides& overrides);

struct Fig2Output {
    ScanResult scan;
    PhaseMapFit fit;
    std::optional<SensitivityReport> sensitivity;
    std::vector<std::string> files;
};

struct Fig3Output {
    int pulse_count = 0;
    ScanResult scan;
    ContrastCurveFit fit;
    std::optional<SensitivityReport> sensitivity;
    std::vector<std::string> files;
};

struct FitRequest {
    std::string data_path;
    std::string model;  ///< fringe | phase-map | contrast-curve
};

struct FitOutput {
    /// One per record for the fringe model, otherwise a single entry.
    std::vector<FitResult> results;
    std::vector<std::string> files;
};

std::vector<std::string> cmd_simulate_sync(const RunConfig& config, std::ostream& log);
std::vector<std::string> cmd_simulate_async(const RunConfig& config, std::ostream& log);
FitOutput cmd_fit(const RunConfig& config, const FitRequest& request, std::ostream& log);
Fig2Output cmd_reproduce_fig2(const RunConfig& config, std::ostream& log);
std::vector<Fig3Output> cmd_reproduce_fig3(const RunConfig& config, std::ostream& log);
/// Returns true when every check passed.
bool cmd_selftest(const CheckOptions& options, std::ostream& log);

}  // namespace ionforce::cli
