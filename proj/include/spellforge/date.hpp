#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace spellforge {

// Calendar date stored as days since 1970-01-01. Cheap to copy and to do
// interval arithmetic on; conversion to y/m/d goes through std::chrono.
class Date {
 public:
  constexpr Date() : days_(0) {}
  constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  // Parses strict ISO-8601 "YYYY-MM-DD"; throws std::invalid_argument otherwise.
  static Date parse(const std::string& iso);

  std::string to_iso() const;
  constexpr std::int32_t days_since_epoch() const { return days_; }

  int year() const;

  constexpr Date operator+(std::int32_t d) const { return Date(days_ + d); }
  constexpr Date operator-(std::int32_t d) const { return Date(days_ - d); }
  constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_;
};

// Inclusive date interval.
struct ObservationWindow {
  Date first_day;
  Date last_day;

  ObservationWindow(Date first, Date last) : first_day(first), last_day(last) {
    if (first_day > last_day)
      throw std::invalid_argument("ObservationWindow: first_day > last_day");
  }

  std::int32_t day_count() const { return last_day - first_day + 1; }
  bool contains(Date d) const { return d >= first_day && d <= last_day; }
};

}  // namespace spellforge
