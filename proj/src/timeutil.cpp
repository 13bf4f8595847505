#include "lakewatch/timeutil.hpp"

#include <charconv>
#include <cstdio>

#include "lakewatch/error.hpp"

namespace lakewatch {

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  auto res = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return res.ec == std::errc{};
}

}  // namespace

std::optional<TimePoint> parse_iso8601(std::string_view s) {
  using namespace std::chrono;
  int y = 0, mo = 0, d = 0, hh = 0, mi = 0, ss = 0;
  if (!read_int(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || s[7] != '-' ||
      !read_int(s, 5, 2, mo) || !read_int(s, 8, 2, d)) {
    return std::nullopt;
  }
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    if (!read_int(s, pos + 1, 2, hh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !read_int(s, pos + 4, 2, mi)) {
      return std::nullopt;
    }
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      if (!read_int(s, pos + 1, 2, ss)) return std::nullopt;
      pos += 3;
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
          ++pos;
          ++digits;
        }
        if (digits == 0) return std::nullopt;
      }
    }
  }
  std::string_view tz = s.substr(pos);
  if (!(tz.empty() || tz == "Z" || tz == "+00:00" || tz == "+0000")) return std::nullopt;

  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mi > 59 || ss > 60) return std::nullopt;
  return sys_days{ymd} + hours{hh} + minutes{mi} + seconds{ss};
}

TimePoint parse_iso8601_or_throw(std::string_view text, std::string_view what) {
  auto t = parse_iso8601(text);
  if (!t) {
    throw DataError("invalid ISO-8601 " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return *t;
}

std::string format_iso8601(TimePoint t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{t - day_start};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

double fractional_year(TimePoint t) {
  using namespace std::chrono;
  const year y = year_month_day{floor<days>(t)}.year();
  const sys_seconds start{sys_days{y / January / 1}};
  const sys_seconds next{sys_days{(y + years{1}) / January / 1}};
  return static_cast<int>(y) +
         static_cast<double>((t - start).count()) / static_cast<double>((next - start).count());
}

int calendar_year(TimePoint t) {
  using namespace std::chrono;
  return static_cast<int>(year_month_day{floor<days>(t)}.year());
}

unsigned calendar_month(TimePoint t) {
  using namespace std::chrono;
  return static_cast<unsigned>(year_month_day{floor<days>(t)}.month());
}

}  // namespace lakewatch
