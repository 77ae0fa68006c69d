#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace promptlint {

/// Currency amounts are held exactly as integer micro-dollars.
using micros = std::int64_t;

constexpr micros micros_per_dollar = 1'000'000;

/// Parse "$0.054", "0.054", "12", "-0.5" into micro-dollars.
/// Throws validation_error on malformed input or more than 6 fraction digits.
micros parse_money(std::string_view text);

/// Round to `decimals` places (0..6), half away from zero.
micros round_money(micros amount, int decimals);

/// Format with a leading "$" and exactly `decimals` places, rounding half
/// away from zero. format_money(263000, 3) == "$0.263".
std::string format_money(micros amount, int decimals = 3);

/// Format with the fewest fraction digits that lose nothing ("$0.0465").
std::string format_money_exact(micros amount);

}  // namespace promptlint
