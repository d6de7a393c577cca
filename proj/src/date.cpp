#include "spellforge/date.hpp"

#include <charconv>

namespace spellforge {

namespace {
namespace chr = std::chrono;
}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
  return Date(static_cast<std::int32_t>(chr::sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(const std::string& iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
    throw std::invalid_argument("expected ISO date YYYY-MM-DD, got '" + iso + "'");
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](const char* b, const char* e, auto& out) {
    auto res = std::from_chars(b, e, out);
    if (res.ec != std::errc{} || res.ptr != e)
      throw std::invalid_argument("expected ISO date YYYY-MM-DD, got '" + iso + "'");
  };
  num(iso.data(), iso.data() + 4, y);
  num(iso.data() + 5, iso.data() + 7, m);
  num(iso.data() + 8, iso.data() + 10, d);
  return from_ymd(y, m, d);
}

std::string Date::to_iso() const {
  chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return std::string(buf);
}

int Date::year() const {
  chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  return static_cast<int>(ymd.year());
}

}  // namespace spellforge
