#include "stsc/time.hpp"

#include <charconv>
#include <cstdio>

#include "stsc/error.hpp"

namespace stsc {

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc() || ptr != first + len)
    throw Error(Errc::parse, "bad timestamp '" + std::string(whole) + "'");
  return value;
}

}  // namespace

Day parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw Error(Errc::parse, "bad date '" + std::string(text) + "', expected YYYY-MM-DD");
  const std::chrono::year_month_day ymd{std::chrono::year{read_int(text, 0, 4, text)},
                                        std::chrono::month{static_cast<unsigned>(read_int(text, 5, 2, text))},
                                        std::chrono::day{static_cast<unsigned>(read_int(text, 8, 2, text))}};
  if (!ymd.ok()) throw Error(Errc::parse, "invalid calendar date '" + std::string(text) + "'");
  return Day{ymd};
}

TimePoint parse_timestamp(std::string_view text) {
  if (text.size() != 16 || text[10] != ' ' || text[13] != ':')
    throw Error(Errc::parse, "bad timestamp '" + std::string(text) + "', expected YYYY-MM-DD HH:MM");
  const Day day = parse_date(text.substr(0, 10));
  const int hh = read_int(text, 11, 2, text);
  const int mm = read_int(text, 14, 2, text);
  if (hh > 23 || mm > 59) throw Error(Errc::parse, "bad time of day in '" + std::string(text) + "'");
  return TimePoint{day} + std::chrono::hours{hh} + Minutes{mm};
}

std::string format_date(Day d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(TimePoint t) {
  const auto tod = time_of_day(t).count();
  char buf[8];
  std::snprintf(buf, sizeof buf, " %02d:%02d", static_cast<int>(tod / 60), static_cast<int>(tod % 60));
  return format_date(day_of(t)) + buf;
}

unsigned weekday_index(Day d) { return std::chrono::weekday{d}.c_encoding(); }

}  // namespace stsc
