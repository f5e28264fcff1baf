#include "copytrace/timeutil.hpp"

#include <charconv>
#include <cstdio>

#include "copytrace/error.hpp"

namespace copytrace::timeutil {

// Civil-calendar conversions after H. Hinnant's public-domain algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

namespace {

[[noreturn]] void bad(std::string_view text) {
    throw Error(Errc::ConfigInvalid, "unparseable timestamp '" + std::string(text) + "'");
}

int digits(std::string_view text, std::size_t pos, std::size_t n) {
    if (pos + n > text.size()) bad(text);
    int v = 0;
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + n, v);
    if (ec != std::errc{} || p != text.data() + pos + n) bad(text);
    return v;
}

}  // namespace

std::int64_t parse_iso8601(std::string_view text) {
    if (!text.empty() && text.front() == '@') {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), v);
        if (ec != std::errc{} || p != text.data() + text.size()) bad(text);
        return v;
    }
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') bad(text);
    int y = digits(text, 0, 4);
    int mo = digits(text, 5, 2);
    int d = digits(text, 8, 2);
    if (mo < 1 || mo > 12 || d < 1 || d > 31) bad(text);
    std::int64_t secs = days_from_civil(y, unsigned(mo), unsigned(d)) * kDay;
    std::size_t pos = 10;
    if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
        int hh = digits(text, pos + 1, 2);
        if (pos + 3 >= text.size() || text[pos + 3] != ':') bad(text);
        int mm = digits(text, pos + 4, 2);
        int ss = 0;
        pos += 6;
        if (pos < text.size() && text[pos] == ':') {
            ss = digits(text, pos + 1, 2);
            pos += 3;
        }
        if (hh > 23 || mm > 59 || ss > 60) bad(text);
        secs += hh * 3600 + mm * 60 + ss;
    }
    if (pos < text.size()) {
        char sign = text[pos];
        if (sign == 'Z' && pos + 1 == text.size()) return secs;
        if (sign != '+' && sign != '-') bad(text);
        int oh = digits(text, pos + 1, 2);
        std::size_t mpos = pos + 3;
        if (mpos < text.size() && text[mpos] == ':') ++mpos;
        int om = digits(text, mpos, 2);
        if (mpos + 2 != text.size()) bad(text);
        std::int64_t offset = oh * 3600 + om * 60;
        secs += sign == '+' ? -offset : offset;
    }
    return secs;
}

std::string format_iso8601(std::int64_t t) {
    std::int64_t days = t >= 0 ? t / kDay : -((-t + kDay - 1) / kDay);
    std::int64_t rem = t - days * kDay;
    CivilDate c = civil_from_days(days);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", c.year, c.month, c.day, int(rem / 3600),
                  int(rem / 60 % 60), int(rem % 60));
    return buf;
}

std::string quarter_label(std::int64_t t) {
    std::int64_t days = t >= 0 ? t / kDay : -((-t + kDay - 1) / kDay);
    CivilDate c = civil_from_days(days);
    return std::to_string(c.year) + "Q" + std::to_string((c.month - 1) / 3 + 1);
}

}  // namespace copytrace::timeutil
