#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace coorddelay {

using Date = std::chrono::sys_days;
using DateTime = std::chrono::sys_seconds;

/// Inclusive calendar-day window in UTC.
struct DateWindow {
  Date first;
  Date last;

  bool contains(Date d) const { return first <= d && d <= last; }
  bool contains(DateTime t) const { return contains(std::chrono::floor<std::chrono::days>(t)); }
};

// "YYYY-MM-DD", optionally followed by a time part ("T..." or " ...") that is
// ignored. Throws std::invalid_argument on malformed input.
Date parse_iso_date(std::string_view text);

// ISO-8601 date-time: "YYYY-MM-DDTHH:MM[:SS[.fff]][Z|+hh:mm]". Missing offset
// means UTC.
std::optional<DateTime> parse_iso_datetime(std::string_view text);

// RFC 2822 Date header, e.g. "Tue, 19 Feb 2008 17:14:10 +0100". Obsolete
// zone names (GMT, UT, EST, ...) are accepted. Result is normalised to UTC.
std::optional<DateTime> parse_rfc2822(std::string_view text);

std::string format_date(Date d);
std::string format_datetime(DateTime t);  // "YYYY-MM-DDTHH:MM:SSZ"

inline Date to_date(DateTime t) { return std::chrono::floor<std::chrono::days>(t); }

int year_of(Date d);
unsigned month_of(Date d);
// 0 = Sunday ... 6 = Saturday
unsigned weekday_of(Date d);

}  // namespace coorddelay
