#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>

namespace hkfr {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

// Lowercase, trim, and collapse internal whitespace runs to single spaces.
// This is the comparison key used for label matching and dedup.
inline std::string normalize_ws(std::string_view s) {
    std::string lowered = to_lower(trim(s));
    std::string out;
    out.reserve(lowered.size());
    bool in_ws = false;
    for (char c : lowered) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

// Price in minor units rendered as major units with two decimals, e.g. 2550 -> "25.50".
inline std::string format_price_major(long long minor) {
    std::string sign = minor < 0 ? "-" : "";
    unsigned long long abs_minor = minor < 0 ? static_cast<unsigned long long>(-minor)
                                             : static_cast<unsigned long long>(minor);
    std::string cents = std::to_string(abs_minor % 100);
    if (cents.size() < 2) cents.insert(cents.begin(), '0');
    return sign + std::to_string(abs_minor / 100) + "." + cents;
}

}  // namespace hkfr
