#include "spellforge/payments.hpp"

#include <unordered_map>

namespace spellforge {

namespace {

using PS = PaymentSubfamily;

std::vector<PaymentCategory> build_taxonomy() {
  std::vector<PaymentCategory> t;
  auto is = [&](std::string code, PS fam) {
    t.push_back({std::move(code), true, fam, false, false});
  };
  auto non_is = [&](std::string code) {
    t.push_back({std::move(code), false, PS::kNonIncomeSupport, false, false});
  };

  // Income support payments.
  is("Age Pension", PS::kAgePension);
  is("Austudy", PS::kOtherIncomeSupport);
  is("Bereavement Allowance", PS::kOtherIncomeSupport);
  is("Carer Payment", PS::kCarer);
  is("Disability Support Pension", PS::kDisability);
  is("Exceptional Circumstances Payment", PS::kCrisis);
  is("Farm Family Restart", PS::kOtherIncomeSupport);
  is("Mature Age Allowance", PS::kOtherIncomeSupport);
  is("Mature Age Partner Allowance", PS::kPartner);
  is("Newstart Mature Age Allowance", PS::kUnemployment);
  is("Newstart Allowance", PS::kUnemployment);
  is("Parenting Payment Partnered", PS::kParenting);
  is("Parenting Payment Single", PS::kParenting);
  is("Partner Allowance", PS::kPartner);
  is("Sickness Allowance", PS::kOtherIncomeSupport);
  is("Special Benefit", PS::kCrisis);
  is("Widow Allowance", PS::kOtherIncomeSupport);
  is("Wife Pension Age", PS::kPartner);
  is("Wife Pension DSP", PS::kPartner);
  is("Widow B Pension", PS::kOtherIncomeSupport);
  is("Youth Allowance (Apprentice)", PS::kOtherIncomeSupport);
  is("Youth Allowance (Other)", PS::kUnemployment);
  is("Youth Allowance (Student)", PS::kOtherIncomeSupport);
  is("Youth Training Allowance", PS::kUnemployment);

  // Supplementary / non income support payments.
  non_is("Family Tax Benefit A");
  non_is("Family Tax Benefit B");
  non_is("Rental Assistance Family");
  non_is("Rental Assistance Parenting");
  non_is("Rental Assistance Newstart");
  non_is("Rental Assistance Pension");
  non_is("Rental Assistance Abstudy");
  non_is("Remote Area Allowance");
  non_is("Crisis Payment");
  non_is("Advanced Payment");

  // Employment streams recorded alongside payment spells.
  t.push_back({"Employment Income", false, PS::kNonIncomeSupport, true, false});
  t.push_back({"Employment Hours", false, PS::kNonIncomeSupport, false, true});
  return t;
}

const std::unordered_map<std::string, const PaymentCategory*>& code_index() {
  static const auto* index = [] {
    auto* m = new std::unordered_map<std::string, const PaymentCategory*>;
    for (const auto& cat : payment_taxonomy()) (*m)[cat.code] = &cat;
    return m;
  }();
  return *index;
}

}  // namespace

std::string_view subfamily_name(PaymentSubfamily f) {
  switch (f) {
    case PS::kDisability: return "disability";
    case PS::kCarer: return "carer";
    case PS::kAgePension: return "age-pension";
    case PS::kUnemployment: return "unemployment";
    case PS::kParenting: return "parenting";
    case PS::kPartner: return "partner";
    case PS::kCrisis: return "crisis";
    case PS::kOtherIncomeSupport: return "other-IS";
    case PS::kNonIncomeSupport: return "non-IS";
  }
  return "?";
}

PaymentSubfamily subfamily_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(PS::kNonIncomeSupport); ++i) {
    auto f = static_cast<PS>(i);
    if (subfamily_name(f) == name) return f;
  }
  throw std::invalid_argument("unknown payment subfamily: '" + std::string(name) + "'");
}

const std::vector<PaymentCategory>& payment_taxonomy() {
  static const std::vector<PaymentCategory> taxonomy = build_taxonomy();
  return taxonomy;
}

const PaymentCategory& classify_payment(const std::string& code) {
  const auto& idx = code_index();
  auto it = idx.find(code);
  if (it == idx.end()) throw UnknownPaymentCode(code);
  return *it->second;
}

}  // namespace spellforge
