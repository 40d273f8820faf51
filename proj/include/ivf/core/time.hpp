/**
 * @file time.hpp
 * @brief Calendar dates and timestamps (UTC, second resolution) with ISO-8601 text forms
 */

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace ivf {

using timestamp = std::chrono::sys_seconds;
using calendar_date = std::chrono::sys_days;

/// Parses "YYYY-MM-DD". Throws ivf_error(unparseable) on malformed or impossible dates.
[[nodiscard]] calendar_date parse_date(std::string_view text);

/// Parses "YYYY-MM-DDTHH:MM[:SS][Z]" (a space is accepted in place of 'T').
[[nodiscard]] timestamp parse_timestamp(std::string_view text);

[[nodiscard]] std::optional<calendar_date> try_parse_date(std::string_view text) noexcept;
[[nodiscard]] std::optional<timestamp> try_parse_timestamp(std::string_view text) noexcept;

[[nodiscard]] std::string format_date(calendar_date date);
[[nodiscard]] std::string format_timestamp(timestamp ts);

[[nodiscard]] inline calendar_date date_of(timestamp ts) {
    return std::chrono::floor<std::chrono::days>(ts);
}

[[nodiscard]] inline timestamp at_time(calendar_date date, int hour, int minute = 0) {
    return timestamp{date} + std::chrono::hours{hour} + std::chrono::minutes{minute};
}

/// Whole calendar days from `from` to `to` (negative when `to` is earlier).
[[nodiscard]] inline int days_between(calendar_date from, calendar_date to) {
    return static_cast<int>((to - from).count());
}

[[nodiscard]] inline double hours_between(timestamp from, timestamp to) {
    return std::chrono::duration<double, std::ratio<3600>>(to - from).count();
}

}  // namespace ivf
