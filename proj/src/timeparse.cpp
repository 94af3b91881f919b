#include "looplens/timeparse.hpp"

#include <charconv>
#include <cstdio>

namespace looplens::timeparse {

namespace {

// days since 1970-01-01 for a proleptic Gregorian civil date
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = unsigned(y - era * 400);
    unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + std::int64_t(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    unsigned doe = unsigned(z - era * 146097);
    unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    std::int64_t yr = std::int64_t(yoe) + era * 400;
    unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = yr + (m <= 2);
}

unsigned days_in_month(unsigned y, unsigned m) {
    static constexpr unsigned lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2) {
        bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return leap ? 29u : 28u;
    }
    return lengths[m - 1];
}

bool parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
    unsigned v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + unsigned(c - '0');
    }
    out = v;
    return true;
}

} // namespace

std::optional<unix_time> parse_timestamp(std::string_view s) {
    if (s.empty()) return std::nullopt;

    // ISO-8601: 2023-08-01T07:15:30Z, 20 chars exactly
    if (s.size() == 20 && s[4] == '-' && s[7] == '-' && s[10] == 'T' &&
        s[13] == ':' && s[16] == ':' && s[19] == 'Z') {
        unsigned yr, mo, da, hh, mm, ss;
        if (!parse_fixed_uint(s, 0, 4, yr) || !parse_fixed_uint(s, 5, 2, mo) ||
            !parse_fixed_uint(s, 8, 2, da) || !parse_fixed_uint(s, 11, 2, hh) ||
            !parse_fixed_uint(s, 14, 2, mm) || !parse_fixed_uint(s, 17, 2, ss))
            return std::nullopt;
        if (mo < 1 || mo > 12 || da < 1 || da > days_in_month(yr, mo) || hh > 23 ||
            mm > 59 || ss > 60)
            return std::nullopt;
        return days_from_civil(yr, mo, da) * 86400 + hh * 3600 + mm * 60 + ss;
    }

    // integer epoch seconds (optionally negative)
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string format_iso8601(unix_time t) {
    std::int64_t days = t / 86400;
    std::int64_t sod = t % 86400;
    if (sod < 0) {
        sod += 86400;
        days -= 1;
    }
    std::int64_t y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), m, d,
                  static_cast<long long>(sod / 3600),
                  static_cast<long long>((sod % 3600) / 60),
                  static_cast<long long>(sod % 60));
    return std::string(buf);
}

} // namespace looplens::timeparse
