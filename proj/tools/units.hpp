#pragma once

// Physical quantities written as "<number> <unit>", e.g. "1013 Hz", "674 nm".

#include <string>
#include <string_view>

namespace ionforce::cli {

enum class Dimension { frequency, time, length, force, mass, angle };

std::string_view dimension_name(Dimension d);

/// Value in SI (rad for angles). A unit is required; throws ValidationError
/// naming the accepted units otherwise.
double parse_quantity(std::string_view text, Dimension dimension);

}  // namespace ionforce::cli
