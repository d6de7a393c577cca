#include "spellforge/spells.hpp"

#include <algorithm>
#include <stdexcept>

namespace spellforge {

Date data_first_day() { return Date::from_ymd(2000, 1, 1); }
Date data_last_day() { return Date::from_ymd(2019, 10, 14); }

void SpellRecord::validate() const {
  if (start > end)
    throw std::invalid_argument("spell for '" + person_id + "' has start > end");
  if (start < data_first_day() || end > data_last_day())
    throw std::invalid_argument("spell for '" + person_id +
                                "' falls outside the data range 2000-01-01..2019-10-14");
  classify_payment(payment_code);  // unknown code -> throw
}

std::optional<std::string> PersonHistory::attribute(const std::string& name) const {
  auto it = demographics.find(name);
  if (it == demographics.end()) return std::nullopt;
  return it->second;
}

bool SpellFilter::passes(const SpellRecord& s) const {
  const PaymentCategory& cat = s.category();
  switch (kind) {
    case Kind::kAnyIncomeSupport:
      return cat.is_income_support;
    case Kind::kSubfamilies:
      return std::find(subfamilies.begin(), subfamilies.end(), cat.subfamily) !=
             subfamilies.end();
    case Kind::kAnyCentrelinkPayment:
      // Every government-administered payment, income support or not, but not
      // the employment earnings/hours streams.
      return !cat.is_employment_income && !cat.is_employment_hours;
    case Kind::kCodes:
      return std::find(codes.begin(), codes.end(), s.payment_code) != codes.end();
  }
  return false;
}

std::vector<char> coverage_mask(const PersonHistory& h, const ObservationWindow& w,
                                const SpellFilter& filter) {
  std::vector<char> mask(static_cast<std::size_t>(w.day_count()), 0);
  for (const SpellRecord& s : h.spells) {
    if (!filter.passes(s)) continue;
    Date lo = std::max(s.start, w.first_day);
    Date hi = std::min(s.end, w.last_day);
    if (lo > hi) continue;
    std::fill(mask.begin() + (lo - w.first_day), mask.begin() + (hi - w.first_day) + 1,
              char{1});
  }
  return mask;
}

int covered_days(const PersonHistory& h, const ObservationWindow& w,
                 const SpellFilter& filter) {
  auto mask = coverage_mask(h, w, filter);
  return static_cast<int>(std::count(mask.begin(), mask.end(), char{1}));
}

double outcome_proportion(const PersonHistory& h, const ObservationWindow& w,
                          const SpellFilter& filter) {
  return static_cast<double>(covered_days(h, w, filter)) /
         static_cast<double>(w.day_count());
}

ObservationWindow outcome_window() {
  return ObservationWindow(Date::from_ymd(2015, 1, 1), Date::from_ymd(2018, 12, 31));
}

ObservationWindow base_year_window() {
  return ObservationWindow(Date::from_ymd(2014, 1, 1), Date::from_ymd(2014, 12, 31));
}

}  // namespace spellforge
