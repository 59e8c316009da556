#pragma once

// Engineering-notation numbers: "1k", "4.7p", "1meg", "2.5e-7", "10pF".

#include <array>
#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace mtm {

namespace detail {

inline int suffix_exponent(std::string_view rest, bool& ok) {
    ok = true;
    if (rest.empty()) return 0;
    if (rest.starts_with("meg")) return 6;
    for (char c : rest) {
        if (!std::isalpha(static_cast<unsigned char>(c))) {
            ok = false;
            return 0;
        }
    }
    switch (rest.front()) {
        case 'f': return -15;
        case 'p': return -12;
        case 'n': return -9;
        case 'u': return -6;
        case 'm': return -3;
        case 'k': return 3;
        case 'g': return 9;
        case 't': return 12;
        default: return 0; // bare unit letters ("v", "ohm", "s")
    }
}

} // namespace detail

/// Parses a SPICE-style number. The suffix is folded into the decimal exponent
/// before conversion, so "4.7p" yields exactly the double nearest to 4.7e-12.
inline std::optional<double> parse_number(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

    std::size_t pos = 0;
    if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
    const std::size_t digits_begin = pos;
    bool any_digit = false;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) { ++pos; any_digit = true; }
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) { ++pos; any_digit = true; }
    }
    if (!any_digit || pos == digits_begin) return std::nullopt;
    const std::size_t mantissa_end = pos;

    long exponent = 0;
    if (pos < s.size() && s[pos] == 'e') {
        std::size_t q = pos + 1;
        if (q < s.size() && (s[q] == '+' || s[q] == '-')) ++q;
        if (q < s.size() && std::isdigit(static_cast<unsigned char>(s[q]))) {
            const auto res = std::from_chars(s.data() + (s[pos + 1] == '+' ? pos + 2 : pos + 1),
                                             s.data() + s.size(), exponent);
            if (res.ec != std::errc{}) return std::nullopt;
            pos = static_cast<std::size_t>(res.ptr - s.data());
        }
    }

    bool ok = false;
    exponent += detail::suffix_exponent(std::string_view(s).substr(pos), ok);
    if (!ok) return std::nullopt;

    std::string canonical = s.substr(0, mantissa_end);
    if (canonical.front() == '+') canonical.erase(0, 1);
    canonical += 'e';
    canonical += std::to_string(exponent);

    double value = 0.0;
    const auto res = std::from_chars(canonical.data(), canonical.data() + canonical.size(), value);
    if (res.ec != std::errc{} || res.ptr != canonical.data() + canonical.size()) return std::nullopt;
    return value;
}

/// Shortest decimal rendering that round-trips to the same binary64.
inline std::string format_number(double value) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

} // namespace mtm
