#include "promptlint/money.hpp"

#include <array>
#include <cctype>
#include <cstdlib>

#include "promptlint/errors.hpp"

namespace promptlint {

namespace {

constexpr std::array<micros, 7> pow10 = {1,      10,      100,      1000,
                                         10000,  100000,  1000000};

}  // namespace

micros parse_money(std::string_view text) {
    std::string_view rest = text;
    bool negative = false;
    if (!rest.empty() && (rest.front() == '-' || rest.front() == '+')) {
        negative = rest.front() == '-';
        rest.remove_prefix(1);
    }
    if (!rest.empty() && rest.front() == '$') rest.remove_prefix(1);
    if (rest.empty()) throw validation_error("empty money literal: '" + std::string(text) + "'");

    micros dollars = 0;
    std::size_t i = 0;
    bool any_digit = false;
    for (; i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i])); ++i) {
        dollars = dollars * 10 + (rest[i] - '0');
        any_digit = true;
    }
    micros frac = 0;
    int frac_digits = 0;
    if (i < rest.size() && rest[i] == '.') {
        ++i;
        for (; i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i])); ++i) {
            if (frac_digits == 6) {
                throw validation_error("money literal exceeds 6 fraction digits: '" +
                                       std::string(text) + "'");
            }
            frac = frac * 10 + (rest[i] - '0');
            ++frac_digits;
            any_digit = true;
        }
    }
    if (!any_digit || i != rest.size()) {
        throw validation_error("malformed money literal: '" + std::string(text) + "'");
    }
    micros value = dollars * micros_per_dollar + frac * pow10[6 - frac_digits];
    return negative ? -value : value;
}

micros round_money(micros amount, int decimals) {
    if (decimals < 0 || decimals > 6) throw validation_error("decimals out of range");
    micros unit = pow10[6 - decimals];
    if (unit == 1) return amount;
    micros magnitude = amount < 0 ? -amount : amount;
    micros rounded = (magnitude + unit / 2) / unit * unit;
    return amount < 0 ? -rounded : rounded;
}

std::string format_money(micros amount, int decimals) {
    micros rounded = round_money(amount, decimals);
    bool negative = rounded < 0;
    micros magnitude = negative ? -rounded : rounded;
    micros dollars = magnitude / micros_per_dollar;
    micros frac = magnitude % micros_per_dollar;
    std::string out = negative ? "-$" : "$";
    out += std::to_string(dollars);
    if (decimals > 0) {
        std::string digits = std::to_string(frac / pow10[6 - decimals]);
        out += '.';
        out += std::string(static_cast<std::size_t>(decimals) - digits.size(), '0');
        out += digits;
    }
    return out;
}

std::string format_money_exact(micros amount) {
    micros magnitude = amount < 0 ? -amount : amount;
    int decimals = 6;
    for (int d = 0; d <= 6; ++d) {
        if (magnitude % pow10[6 - d] == 0) {
            decimals = d;
            break;
        }
    }
    return format_money(amount, decimals);
}

}  // namespace promptlint
