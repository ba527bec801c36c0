#include "ionforce/scan_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

#include "ionforce/errors.hpp"

namespace ionforce {
namespace {

const char* mode_name(ScanMode m) {
    return m == ScanMode::synchronous ? "synchronous" : "asynchronous";
}

ScanMode parse_mode(const std::string& s) {
    if (s == "synchronous") return ScanMode::synchronous;
    if (s == "asynchronous") return ScanMode::asynchronous;
    throw ValidationError(fmt::format("unknown scan mode '{}'", s));
}

const char* provenance_name(Provenance p) {
    return p == Provenance::synthetic ? "synthetic" : "ingested";
}

Provenance parse_provenance(const std::string& s) {
    if (s == "synthetic") return Provenance::synthetic;
    if (s == "ingested") return Provenance::ingested;
    throw ValidationError(fmt::format("unknown provenance '{}'", s));
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line, const char* column) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
        throw ValidationError(fmt::format("line {}: column {}: '{}' is not a number", line, column, s));
    }
    return v;
}

long long parse_integer(const std::string& s, std::size_t line, const char* column) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError(
            fmt::format("line {}: column {}: '{}' is not an integer", line, column, s));
    }
    return v;
}

std::uint64_t parse_u64(const std::string& s, const char* key) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError(fmt::format("metadata {}: '{}' is not an unsigned integer", key, s));
    }
    return v;
}

// Per-record truth as produced by the simulator: twins carry zero amplitude.
void attach_truth(ScanResult& scan) {
    for (auto& r : scan.records) {
        r.truth = scan.truth;
        r.provenance = scan.provenance;
    }
    for (auto& r : scan.references) {
        r.truth = scan.truth;
        if (r.truth) r.truth->phase_amplitude_rad = 0.0;
        r.provenance = scan.provenance;
    }
}

}  // namespace

void write_scan_csv(const ScanResult& scan, std::ostream& out) {
    scan.validate();
    fmt::print(out, "# ionforce-scan v1\n");
    fmt::print(out, "# mode={}\n", mode_name(scan.mode));
    fmt::print(out, "# pulse_count={}\n", scan.pulse_count);
    fmt::print(out, "# paired={}\n", scan.paired ? "true" : "false");
    fmt::print(out, "# shot_overhead_s={}\n", scan.shot_overhead_s);
    fmt::print(out, "# provenance={}\n", provenance_name(scan.provenance));
    if (scan.truth) {
        fmt::print(out, "# truth.force_frequency_hz={}\n", scan.truth->force_frequency_hz);
        fmt::print(out, "# truth.phase_amplitude_rad={}\n", scan.truth->phase_amplitude_rad);
        fmt::print(out, "# truth.xi_offset_rad={}\n", scan.truth->xi_offset_rad);
    }
    if (scan.noise) {
        fmt::print(out, "# noise.dephasing_contrast={}\n", scan.noise->dephasing_contrast);
        fmt::print(out, "# noise.rng_seed={}\n", scan.noise->rng_seed);
        if (scan.noise->d_decay_lifetime_s) {
            fmt::print(out, "# noise.d_decay_lifetime_s={}\n", *scan.noise->d_decay_lifetime_s);
        }
    }
    fmt::print(out, "tau_s,xi_rad,phi_rad,shots,d_counts,drive\n");
    auto rows = [&](const FringeRecord& r) {
        const auto* fixed = std::get_if<XiFixed>(&r.sequence.xi_mode);
        const std::string xi = fixed ? fmt::format("{}", fixed->xi_rad) : "NA";
        for (std::size_t k = 0; k < r.phases_rad.size(); ++k) {
            fmt::print(out, "{},{},{},{},{},{}\n", r.sequence.half_period_s, xi, r.phases_rad[k],
                       r.shots_per_phase, r.d_counts[k], r.drive_on ? "on" : "off");
        }
    };
    for (const auto& r : scan.records) rows(r);
    for (const auto& r : scan.references) rows(r);
}

ScanResult read_scan_csv(std::istream& in, std::optional<int> default_pulse_count) {
    std::map<std::string, std::string> meta;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto eq = t.find('=');
            if (eq != std::string::npos) meta[trim(t.substr(1, eq - 1))] = trim(t.substr(eq + 1));
            continue;
        }
        header = split(t, ',');
        break;
    }
    if (header.empty()) throw ValidationError("scan CSV: no header row");

    static constexpr std::array<const char*, 5> required{"tau_s", "xi_rad", "phi_rad", "shots",
                                                          "d_counts"};
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
    std::vector<std::string> missing;
    for (const char* name : required) {
        if (!column.contains(name)) missing.emplace_back(name);
    }
    if (!missing.empty()) {
        throw ValidationError(fmt::format("scan CSV line {}: missing column(s): {}", line_no,
                                          fmt::join(missing, ", ")));
    }
    const bool has_drive = column.contains("drive");

    struct Key {
        bool drive_on;
        double tau;
        std::optional<double> xi;
        auto operator<=>(const Key&) const = default;
    };
    struct Group {
        std::vector<double> phases;
        std::vector<int> counts;
        int shots = -1;
        std::size_t first_line = 0;
    };
    std::map<Key, Group> groups;
    std::optional<bool> asynchronous;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = split(t, ',');
        if (fields.size() != header.size()) {
            throw ValidationError(fmt::format("scan CSV line {}: expected {} fields, found {}",
                                              line_no, header.size(), fields.size()));
        }
        const auto field = [&](const char* name) -> const std::string& {
            return fields[column.at(name)];
        };
        Key key{true, parse_double(field("tau_s"), line_no, "tau_s"), std::nullopt};
        const std::string& xi = field("xi_rad");
        const bool na = xi == "NA" || xi == "na" || xi.empty();
        if (!na) key.xi = parse_double(xi, line_no, "xi_rad");
        if (asynchronous && *asynchronous != na) {
            throw ValidationError(fmt::format(
                "scan CSV line {}: mixing NA and numeric xi_rad in one file", line_no));
        }
        asynchronous = na;
        if (has_drive) {
            const std::string& d = field("drive");
            if (d != "on" && d != "off") {
                throw ValidationError(
                    fmt::format("scan CSV line {}: drive must be 'on' or 'off', got '{}'", line_no, d));
            }
            key.drive_on = d == "on";
        }
        const long long shots = parse_integer(field("shots"), line_no, "shots");
        const long long d = parse_integer(field("d_counts"), line_no, "d_counts");
        if (shots < 1) throw ValidationError(fmt::format("scan CSV line {}: shots must be positive", line_no));
        if (d < 0 || d > shots) {
            throw ValidationError(
                fmt::format("scan CSV line {}: d_counts {} outside [0, {}]", line_no, d, shots));
        }
        auto& g = groups[key];
        if (g.shots < 0) {
            g.shots = static_cast<int>(shots);
            g.first_line = line_no;
        } else if (g.shots != shots) {
            throw ValidationError(fmt::format(
                "scan CSV line {}: shots differ within the fringe starting at line {}", line_no,
                g.first_line));
        }
        g.phases.push_back(parse_double(field("phi_rad"), line_no, "phi_rad"));
        g.counts.push_back(static_cast<int>(d));
    }
    if (groups.empty()) throw ValidationError("scan CSV: no data rows");

    ScanResult scan;
    scan.mode = *asynchronous ? ScanMode::asynchronous : ScanMode::synchronous;
    if (meta.contains("mode") && parse_mode(meta["mode"]) != scan.mode) {
        throw ValidationError("scan CSV: mode metadata disagrees with the xi_rad column");
    }
    if (meta.contains("pulse_count")) {
        scan.pulse_count = static_cast<int>(parse_integer(meta["pulse_count"], 0, "pulse_count"));
    } else if (default_pulse_count) {
        scan.pulse_count = *default_pulse_count;
    } else {
        throw ValidationError("scan CSV: pulse_count is neither in the metadata nor supplied");
    }
    scan.provenance = meta.contains("provenance") ? parse_provenance(meta["provenance"])
                                                   : Provenance::ingested;
    if (meta.contains("shot_overhead_s")) {
        scan.shot_overhead_s = parse_double(meta["shot_overhead_s"], 0, "shot_overhead_s");
    }
    if (meta.contains("truth.force_frequency_hz")) {
        Truth truth;
        truth.force_frequency_hz = parse_double(meta["truth.force_frequency_hz"], 0, "truth");
        truth.phase_amplitude_rad = parse_double(meta["truth.phase_amplitude_rad"], 0, "truth");
        truth.xi_offset_rad = parse_double(meta["truth.xi_offset_rad"], 0, "truth");
        scan.truth = truth;
    }
    if (meta.contains("noise.dephasing_contrast")) {
        NoiseModel noise;
        noise.dephasing_contrast = parse_double(meta["noise.dephasing_contrast"], 0, "noise");
        noise.rng_seed = parse_u64(meta["noise.rng_seed"], "noise.rng_seed");
        if (meta.contains("noise.d_decay_lifetime_s")) {
            noise.d_decay_lifetime_s = parse_double(meta["noise.d_decay_lifetime_s"], 0, "noise");
        }
        scan.noise = noise;
    }

    for (const auto& [key, g] : groups) {
        if (std::find(scan.tau_grid_s.begin(), scan.tau_grid_s.end(), key.tau) == scan.tau_grid_s.end()) {
            scan.tau_grid_s.push_back(key.tau);
        }
        if (key.xi && std::find(scan.xi_grid_rad.begin(), scan.xi_grid_rad.end(), *key.xi) ==
                          scan.xi_grid_rad.end()) {
            scan.xi_grid_rad.push_back(*key.xi);
        }
    }
    std::sort(scan.tau_grid_s.begin(), scan.tau_grid_s.end());
    std::sort(scan.xi_grid_rad.begin(), scan.xi_grid_rad.end());

    const auto& first = groups.begin()->second;
    scan.phases_rad = first.phases;
    scan.shots_per_phase = first.shots;

    auto take = [&](const Key& key) -> FringeRecord {
        const auto it = groups.find(key);
        if (it == groups.end()) {
            throw ValidationError(fmt::format("scan CSV: missing fringe for tau_s={}{}{}", key.tau,
                                              key.xi ? fmt::format(", xi_rad={}", *key.xi) : "",
                                              key.drive_on ? "" : " (drive off)"));
        }
        FringeRecord r;
        r.sequence.half_period_s = key.tau;
        r.sequence.pulse_count = scan.pulse_count;
        r.sequence.xi_mode = key.xi ? XiMode{XiFixed{*key.xi}} : XiMode{XiUniform{}};
        r.phases_rad = it->second.phases;
        r.shots_per_phase = it->second.shots;
        r.d_counts = it->second.counts;
        r.drive_on = key.drive_on;
        return r;
    };
    std::size_t consumed = 0;
    for (double tau : scan.tau_grid_s) {
        if (scan.mode == ScanMode::synchronous) {
            for (double xi : scan.xi_grid_rad) {
                scan.records.push_back(take({true, tau, xi}));
                ++consumed;
            }
        } else {
            scan.records.push_back(take({true, tau, std::nullopt}));
            ++consumed;
        }
    }
    const bool any_off = std::any_of(groups.begin(), groups.end(),
                                     [](const auto& kv) { return !kv.first.drive_on; });
    if (any_off) {
        if (scan.mode == ScanMode::synchronous) {
            throw ValidationError("scan CSV: drive=off rows are only valid in asynchronous scans");
        }
        scan.paired = true;
        for (double tau : scan.tau_grid_s) {
            scan.references.push_back(take({false, tau, std::nullopt}));
            ++consumed;
        }
    }
    if (consumed != groups.size()) {
        throw ValidationError("scan CSV: fringes do not form a complete grid");
    }
    attach_truth(scan);
    scan.validate();
    return scan;
}

namespace {

nlohmann::json record_to_json(const FringeRecord& r) {
    nlohmann::json j;
    j["tau_s"] = r.sequence.half_period_s;
    if (const auto* fixed = std::get_if<XiFixed>(&r.sequence.xi_mode)) {
        j["xi_rad"] = fixed->xi_rad;
    } else {
        j["xi_rad"] = nullptr;
    }
    j["drive_on"] = r.drive_on;
    j["d_counts"] = r.d_counts;
    return j;
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError(fmt::format("scan JSON: {} is missing '{}'", where, key));
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("scan JSON: {}.{}: {}", where, key, e.what()));
    }
}

}  // namespace

nlohmann::json scan_to_json(const ScanResult& scan) {
    scan.validate();
    nlohmann::json j;
    j["format"] = "ionforce-scan";
    j["version"] = 1;
    j["mode"] = mode_name(scan.mode);
    j["pulse_count"] = scan.pulse_count;
    j["tau_grid_s"] = scan.tau_grid_s;
    j["xi_grid_rad"] = scan.xi_grid_rad;
    j["phases_rad"] = scan.phases_rad;
    j["shots_per_phase"] = scan.shots_per_phase;
    j["paired"] = scan.paired;
    j["shot_overhead_s"] = scan.shot_overhead_s;
    j["provenance"] = provenance_name(scan.provenance);
    if (scan.truth) {
        j["truth"] = {{"force_frequency_hz", scan.truth->force_frequency_hz},
                      {"phase_amplitude_rad", scan.truth->phase_amplitude_rad},
                      {"xi_offset_rad", scan.truth->xi_offset_rad}};
    } else {
        j["truth"] = nullptr;
    }
    if (scan.noise) {
        nlohmann::json n = {{"dephasing_contrast", scan.noise->dephasing_contrast},
                            {"rng_seed", scan.noise->rng_seed}};
        n["d_decay_lifetime_s"] = scan.noise->d_decay_lifetime_s
                                      ? nlohmann::json(*scan.noise->d_decay_lifetime_s)
                                      : nlohmann::json(nullptr);
        j["noise"] = n;
    } else {
        j["noise"] = nullptr;
    }
    j["records"] = nlohmann::json::array();
    for (const auto& r : scan.records) j["records"].push_back(record_to_json(r));
    j["references"] = nlohmann::json::array();
    for (const auto& r : scan.references) j["references"].push_back(record_to_json(r));
    return j;
}

ScanResult scan_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("scan JSON: top level must be an object");
    ScanResult scan;
    scan.mode = parse_mode(get_field<std::string>(j, "mode", "scan"));
    scan.pulse_count = get_field<int>(j, "pulse_count", "scan");
    scan.tau_grid_s = get_field<std::vector<double>>(j, "tau_grid_s", "scan");
    scan.xi_grid_rad = get_field<std::vector<double>>(j, "xi_grid_rad", "scan");
    scan.phases_rad = get_field<std::vector<double>>(j, "phases_rad", "scan");
    scan.shots_per_phase = get_field<int>(j, "shots_per_phase", "scan");
    scan.paired = get_field<bool>(j, "paired", "scan");
    scan.shot_overhead_s = get_field<double>(j, "shot_overhead_s", "scan");
    scan.provenance = j.contains("provenance")
                          ? parse_provenance(get_field<std::string>(j, "provenance", "scan"))
                          : Provenance::ingested;
    if (j.contains("truth") && !j["truth"].is_null()) {
        const auto& t = j["truth"];
        scan.truth = Truth{get_field<double>(t, "force_frequency_hz", "truth"),
                           get_field<double>(t, "phase_amplitude_rad", "truth"),
                           get_field<double>(t, "xi_offset_rad", "truth")};
    }
    if (j.contains("noise") && !j["noise"].is_null()) {
        const auto& n = j["noise"];
        NoiseModel noise;
        noise.dephasing_contrast = get_field<double>(n, "dephasing_contrast", "noise");
        noise.rng_seed = get_field<std::uint64_t>(n, "rng_seed", "noise");
        if (n.contains("d_decay_lifetime_s") && !n["d_decay_lifetime_s"].is_null()) {
            noise.d_decay_lifetime_s = get_field<double>(n, "d_decay_lifetime_s", "noise");
        }
        scan.noise = noise;
    }
    auto read_records = [&](const char* key, std::vector<FringeRecord>& out) {
        if (!j.contains(key)) return;
        std::size_t index = 0;
        for (const auto& rj : j.at(key)) {
            const std::string where = fmt::format("{}[{}]", key, index++);
            FringeRecord r;
            r.sequence.half_period_s = get_field<double>(rj, "tau_s", where);
            r.sequence.pulse_count = scan.pulse_count;
            if (rj.contains("xi_rad") && !rj["xi_rad"].is_null()) {
                r.sequence.xi_mode = XiFixed{get_field<double>(rj, "xi_rad", where)};
            } else {
                r.sequence.xi_mode = XiUniform{};
            }
            r.drive_on = get_field<bool>(rj, "drive_on", where);
            r.d_counts = get_field<std::vector<int>>(rj, "d_counts", where);
            r.phases_rad = scan.phases_rad;
            r.shots_per_phase = scan.shots_per_phase;
            out.push_back(std::move(r));
        }
    };
    if (!j.contains("records")) throw ValidationError("scan JSON: scan is missing 'records'");
    read_records("records", scan.records);
    read_records("references", scan.references);
    attach_truth(scan);
    scan.validate();
    return scan;
}

void save_scan(const ScanResult& scan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError(fmt::format("cannot open '{}' for writing", path));
    if (path.ends_with(".json")) {
        out << scan_to_json(scan).dump(1) << '\n';
    } else {
        write_scan_csv(scan, out);
    }
}

ScanResult load_scan(const std::string& path, std::optional<int> default_pulse_count) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
    if (path.ends_with(".json")) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(fmt::format("{}: {}", path, e.what()));
        }
        return scan_from_json(j);
    }
    return read_scan_csv(in, default_pulse_count);
}

}  // namespace ionforce
