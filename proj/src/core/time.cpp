/**
 * @file time.cpp
 * @brief ISO-8601 date/timestamp parsing and formatting
 */

#include "ivf/core/time.hpp"

#include "ivf/core/error.hpp"

#include <charconv>
#include <cstdio>

namespace ivf {

namespace {

bool read_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{};
}

std::optional<calendar_date> date_prefix(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!read_int(text, 0, 4, y) || !read_int(text, 5, 2, m) || !read_int(text, 8, 2, d)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y},
                                          std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return calendar_date{ymd};
}

}  // namespace

std::optional<calendar_date> try_parse_date(std::string_view text) noexcept {
    if (text.size() != 10) return std::nullopt;
    return date_prefix(text);
}

std::optional<timestamp> try_parse_timestamp(std::string_view text) noexcept {
    auto day = date_prefix(text);
    if (!day) return std::nullopt;
    if (text.size() == 10) return timestamp{*day};
    if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!read_int(text, 11, 2, hh) || text.size() < 16 || text[13] != ':' ||
        !read_int(text, 14, 2, mm)) {
        return std::nullopt;
    }
    std::size_t pos = 16;
    if (pos < text.size() && text[pos] == ':') {
        if (!read_int(text, pos + 1, 2, ss)) return std::nullopt;
        pos += 3;
    }
    if (pos < text.size() && text[pos] == 'Z') ++pos;
    if (pos != text.size()) return std::nullopt;
    if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    return timestamp{*day} + std::chrono::hours{hh} + std::chrono::minutes{mm} +
           std::chrono::seconds{ss};
}

calendar_date parse_date(std::string_view text) {
    if (auto d = try_parse_date(text)) return *d;
    throw ivf_error(errc::unparseable, "invalid date '" + std::string(text) + "'");
}

timestamp parse_timestamp(std::string_view text) {
    if (auto t = try_parse_timestamp(text)) return *t;
    throw ivf_error(errc::unparseable, "invalid timestamp '" + std::string(text) + "'");
}

std::string format_date(calendar_date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_timestamp(timestamp ts) {
    const auto day = date_of(ts);
    const auto secs = (ts - timestamp{day}).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lldZ", format_date(day).c_str(),
                  static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                  static_cast<long long>(secs % 60));
    return buf;
}

}  // namespace ivf
