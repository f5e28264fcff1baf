#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace copytrace::timeutil {

inline constexpr std::int64_t kDay = 86400;

struct CivilDate {
    int year;
    unsigned month;  // 1..12
    unsigned day;    // 1..31
};

std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept;
CivilDate civil_from_days(std::int64_t days) noexcept;

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS]" with optional "Z" or "+HH:MM"/"-HHMM"
/// suffix, or "@<epoch seconds>". Throws Error(ConfigInvalid).
std::int64_t parse_iso8601(std::string_view text);
/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(std::int64_t epoch_seconds);
/// "YYYYQn" of the UTC calendar quarter containing t.
std::string quarter_label(std::int64_t epoch_seconds);

}  // namespace copytrace::timeutil
