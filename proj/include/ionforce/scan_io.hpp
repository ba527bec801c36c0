#pragma once

// Scan data files.
//
// CSV: optional "# key=value" metadata lines, then a header and one row per
// (tau, xi, phi):
//
//     tau_s,xi_rad,phi_rad,shots,d_counts,drive
//
// xi_rad is "NA" for asynchronous scans; drive is "on" or "off" (zero-force
// reference twin) and may be omitted, in which case every row is "on".
// Numbers are written in shortest round-trip form, so write -> read is exact.
//
// JSON: the full nested ScanResult including metadata.

#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

#include "ionforce/measure.hpp"

namespace ionforce {

void write_scan_csv(const ScanResult& scan, std::ostream& out);

/// `default_pulse_count` is used when the file carries no pulse_count metadata.
ScanResult read_scan_csv(std::istream& in, std::optional<int> default_pulse_count = {});

nlohmann::json scan_to_json(const ScanResult& scan);
ScanResult scan_from_json(const nlohmann::json& j);

void save_scan(const ScanResult& scan, const std::string& path);

/// Reads a .csv or .json scan file, chosen by extension.
ScanResult load_scan(const std::string& path, std::optional<int> default_pulse_count = {});

}  // namespace ionforce
