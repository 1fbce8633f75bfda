#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace stsc {

using Minutes = std::chrono::minutes;
/// Calendar time at minute resolution; timestamps are naive local time.
using TimePoint = std::chrono::sys_time<Minutes>;
using Day = std::chrono::sys_days;

inline constexpr Minutes kStep{5};

/// Parses "YYYY-MM-DD HH:MM"; throws Errc::parse.
TimePoint parse_timestamp(std::string_view text);
/// Formats as "YYYY-MM-DD HH:MM".
std::string format_timestamp(TimePoint t);
Day parse_date(std::string_view text);
std::string format_date(Day d);

inline Day day_of(TimePoint t) { return std::chrono::floor<std::chrono::days>(t); }
inline Minutes time_of_day(TimePoint t) { return t - day_of(t); }
/// 0 = Sunday ... 6 = Saturday.
unsigned weekday_index(Day d);
inline bool is_weekend(Day d) {
  const unsigned w = weekday_index(d);
  return w == 0 || w == 6;
}

/// Daily observation window at 5-minute resolution, both ends inclusive.
struct DayWindow {
  Minutes start{7 * 60};
  Minutes end{22 * 60};

  std::size_t slots() const { return static_cast<std::size_t>((end - start) / kStep) + 1; }
  bool contains(Minutes tod) const { return tod >= start && tod <= end; }
};

}  // namespace stsc
