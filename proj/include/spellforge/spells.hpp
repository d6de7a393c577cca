#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spellforge/date.hpp"
#include "spellforge/payments.hpp"

namespace spellforge {

// Earliest and latest dates the data may carry.
Date data_first_day();  // 2000-01-01
Date data_last_day();   // 2019-10-14

// One dated payment spell for one person. End date is inclusive; a single-day
// spell has start == end. Amount is currency per fortnight (or hours per
// fortnight for the employment-hours stream) and may be absent.
struct SpellRecord {
  std::string person_id;
  std::string payment_code;
  Date start;
  Date end;
  std::optional<double> amount;

  void validate() const;
  const PaymentCategory& category() const { return classify_payment(payment_code); }
};

struct PersonHistory {
  std::string person_id;
  std::vector<SpellRecord> spells;
  // Raw demographics, long-form: attribute -> value. Values may be absent
  // simply by key absence.
  std::map<std::string, std::string> demographics;

  std::optional<std::string> attribute(const std::string& name) const;
};

// Which spells count towards a coverage/aggregation query.
struct SpellFilter {
  enum class Kind { kAnyIncomeSupport, kSubfamilies, kAnyCentrelinkPayment, kCodes };
  Kind kind = Kind::kAnyIncomeSupport;
  std::vector<PaymentSubfamily> subfamilies;
  std::vector<std::string> codes;

  static SpellFilter any_income_support() { return {}; }
  static SpellFilter any_centrelink_payment() {
    return {Kind::kAnyCentrelinkPayment, {}, {}};
  }
  static SpellFilter subfamily(PaymentSubfamily f) {
    return {Kind::kSubfamilies, {f}, {}};
  }
  static SpellFilter subfamilies_of(std::vector<PaymentSubfamily> fs) {
    return {Kind::kSubfamilies, std::move(fs), {}};
  }
  static SpellFilter exact_codes(std::vector<std::string> cs) {
    return {Kind::kCodes, {}, std::move(cs)};
  }

  bool passes(const SpellRecord& s) const;
};

// Boolean per-day coverage of the window (index 0 = first_day). Overlapping
// spells cover each day once.
std::vector<char> coverage_mask(const PersonHistory& h, const ObservationWindow& w,
                                const SpellFilter& filter);

// Number of distinct covered days in the window.
int covered_days(const PersonHistory& h, const ObservationWindow& w,
                 const SpellFilter& filter);

// Fraction of window days covered by at least one qualifying spell.
double outcome_proportion(const PersonHistory& h, const ObservationWindow& w,
                          const SpellFilter& filter);

// Canonical windows.
ObservationWindow outcome_window();   // 2015-01-01 .. 2018-12-31
ObservationWindow base_year_window(); // 2014-01-01 .. 2014-12-31

}  // namespace spellforge
