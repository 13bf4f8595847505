#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace lakewatch {

/// UTC instant at one-second resolution; all timestamps in the system use it.
using TimePoint = std::chrono::sys_seconds;

/// Parses ISO-8601 UTC timestamps: `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM[:SS[.fff]]`
/// with an optional `Z` or `+00:00` suffix. Fractional seconds are truncated.
std::optional<TimePoint> parse_iso8601(std::string_view text);

/// Same as parse_iso8601 but throws DataError naming `what` on failure.
TimePoint parse_iso8601_or_throw(std::string_view text, std::string_view what);

/// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_iso8601(TimePoint t);

/// Calendar fractional year, e.g. 2015-01-01T00:00Z -> 2015.0.
double fractional_year(TimePoint t);

int calendar_year(TimePoint t);
unsigned calendar_month(TimePoint t);

}  // namespace lakewatch
