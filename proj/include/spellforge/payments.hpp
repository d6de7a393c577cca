#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spellforge {

enum class PaymentSubfamily {
  kDisability,
  kCarer,
  kAgePension,
  kUnemployment,
  kParenting,
  kPartner,
  kCrisis,
  kOtherIncomeSupport,
  kNonIncomeSupport,
};

std::string_view subfamily_name(PaymentSubfamily f);
PaymentSubfamily subfamily_from_name(std::string_view name);

struct PaymentCategory {
  std::string code;
  bool is_income_support = false;
  PaymentSubfamily subfamily = PaymentSubfamily::kNonIncomeSupport;
  // Employment earnings/hours streams ride in the same spell file but are not
  // government payments; they are excluded from benefit-amount aggregates.
  bool is_employment_income = false;
  bool is_employment_hours = false;
};

// Deterministic mapping from payment code to category. Unknown codes throw
// UnknownPaymentCode; silently treating them as non-IS would corrupt the
// outcome variable.
struct UnknownPaymentCode : std::invalid_argument {
  explicit UnknownPaymentCode(const std::string& code)
      : std::invalid_argument("unknown payment code: '" + code + "'") {}
};

const PaymentCategory& classify_payment(const std::string& code);

// All codes in the taxonomy, in a fixed order.
const std::vector<PaymentCategory>& payment_taxonomy();

}  // namespace spellforge
