#include "units.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "ionforce/constants.hpp"
#include "ionforce/errors.hpp"

namespace ionforce::cli {

namespace {

struct Unit {
    std::string_view symbol;
    Dimension dimension;
    double scale;
};

constexpr std::array kUnits{
    Unit{"Hz", Dimension::frequency, 1.0},       Unit{"kHz", Dimension::frequency, 1e3},
    Unit{"MHz", Dimension::frequency, 1e6},      Unit{"GHz", Dimension::frequency, 1e9},
    Unit{"s", Dimension::time, 1.0},             Unit{"ms", Dimension::time, 1e-3},
    Unit{"us", Dimension::time, 1e-6},           Unit{"ns", Dimension::time, 1e-9},
    Unit{"min", Dimension::time, 60.0},          Unit{"h", Dimension::time, 3600.0},
    Unit{"m", Dimension::length, 1.0},           Unit{"mm", Dimension::length, 1e-3},
    Unit{"um", Dimension::length, 1e-6},         Unit{"nm", Dimension::length, 1e-9},
    Unit{"pm", Dimension::length, 1e-12},        Unit{"N", Dimension::force, 1.0},
    Unit{"kg", Dimension::mass, 1.0},            Unit{"amu", Dimension::mass, kAtomicMassUnit},
    Unit{"u", Dimension::mass, kAtomicMassUnit}, Unit{"rad", Dimension::angle, 1.0},
    Unit{"deg", Dimension::angle, kPi / 180.0},
};

std::string accepted(Dimension d) {
    std::string out;
    for (const auto& u : kUnits) {
        if (u.dimension != d) continue;
        if (!out.empty()) out += ", ";
        out += u.symbol;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string_view dimension_name(Dimension d) {
    switch (d) {
        case Dimension::frequency: return "frequency";
        case Dimension::time: return "time";
        case Dimension::length: return "length";
        case Dimension::force: return "force";
        case Dimension::mass: return "mass";
        case Dimension::angle: return "angle";
    }
    return "quantity";
}

double parse_quantity(std::string_view text, Dimension dimension) {
    const std::string_view s = trim(text);
    double value = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || !std::isfinite(value)) {
        throw ValidationError(fmt::format("expected a {} such as '12 {}', got '{}'", dimension_name(dimension),
                                          accepted(dimension).substr(0, accepted(dimension).find(',')), s));
    }
    const std::string_view symbol = trim(std::string_view(end, s.data() + s.size() - end));
    if (symbol.empty()) {
        throw ValidationError(fmt::format("'{}' has no unit; {} needs one of: {}", s, dimension_name(dimension),
                                          accepted(dimension)));
    }
    for (const auto& u : kUnits) {
        if (u.symbol != symbol) continue;
        if (u.dimension != dimension) {
            throw ValidationError(fmt::format("'{}' is a {}, expected a {} ({})", s, dimension_name(u.dimension),
                                              dimension_name(dimension), accepted(dimension)));
        }
        return value * u.scale;
    }
    throw ValidationError(fmt::format("unknown unit '{}' in '{}'; {} accepts: {}", symbol, s,
                                      dimension_name(dimension), accepted(dimension)));
}

}  // namespace ionforce::cli
