#include "spellforge/features.hpp"

#include <cstdio>

namespace spellforge {

// The shipped predictor catalog: every derivation family with a representative
// set of named variables. Users can export it to JSON and extend towards the
// full administrative list.
FeatureCatalog default_catalog() {
  FeatureCatalog c;
  auto& E = c.entries;

  using FF = FeatureFamily;
  using FS = FeatureSource;
  using PSF = PaymentSubfamily;
  using BQ = BiweeklyQuantity;

  auto add = [&](FeatureCatalogEntry e) { E.push_back(std::move(e)); };

  auto attr_flag = [&](std::string name, std::string attribute, bool mp = false) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kEverIndicator;
    e.source = FS::kAttribute;
    e.attribute = std::move(attribute);
    e.missing_propagates = mp;
    add(std::move(e));
  };
  auto attr_num = [&](std::string name, std::string attribute, FF fam, bool mp) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = fam;
    e.source = FS::kAttribute;
    e.attribute = std::move(attribute);
    e.missing_propagates = mp;
    add(std::move(e));
  };
  auto one_hot = [&](std::string name, std::string attribute, std::string value) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kCategoryOneHot;
    e.source = FS::kAttribute;
    e.attribute = std::move(attribute);
    e.equals_value = std::move(value);
    e.missing_propagates = false;
    add(std::move(e));
  };
  auto edu_le = [&](std::string name, double level) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kCategoryOneHot;
    e.source = FS::kAttribute;
    e.attribute = "education";
    e.use_numeric_le = true;
    e.numeric_le = level;
    e.missing_propagates = false;
    add(std::move(e));
  };
  auto age_band = [&](std::string name, int lo, int hi) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kAgeBand;
    e.age_min = lo;
    e.age_max = hi;
    e.missing_propagates = false;
    add(std::move(e));
  };
  auto ever = [&](std::string name, SpellFilter f) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kEverIndicator;
    e.filter = std::move(f);
    add(std::move(e));
  };
  auto duration = [&](std::string name, SpellFilter f, bool normalize = false) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kDuration;
    e.filter = std::move(f);
    e.normalize_by_window = normalize;
    add(std::move(e));
  };
  auto missing_flag = [&](std::string name, std::string attribute) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kMissingFlag;
    e.attribute = std::move(attribute);
    add(std::move(e));
  };
  auto hours_band = [&](std::string name, int dir, double lo, double hi) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kEverIndicator;
    e.hours_change_band = true;
    e.band_dir = dir;
    e.band_lo = lo;
    e.band_hi = hi;
    add(std::move(e));
  };

  const auto any_is = SpellFilter::any_income_support();
  const auto any_clk = SpellFilter::any_centrelink_payment();

  // --- Demographics ---------------------------------------------------------
  one_hot("p_female", "sex", "female");
  attr_flag("p_immi", "immigrant", true);
  attr_flag("p_indig", "indigenous", true);
  one_hot("p_auborn", "country_of_birth", "Australia");
  missing_flag("p_cobmiss", "country_of_birth");
  const char* regions[] = {"Asia",
                           "Middle East and North Africa",
                           "Europe",
                           "North America",
                           "Central America and the Caribbean",
                           "South America",
                           "Sub-Saharan Africa",
                           "Oceania and Pacific Islands",
                           "Unclassified or Unknown"};
  for (int i = 0; i < 9; ++i)
    one_hot("p_Regiond" + std::to_string(i + 1), "birth_region", regions[i]);
  struct {
    const char* name;
    const char* country;
  } countries[] = {{"p_saborn", "South Africa"}, {"p_usborn", "United States of America"},
                   {"p_ukborn", "United Kingdom"}, {"p_cnborn", "China"},
                   {"p_inborn", "India"},          {"p_hkborn", "Hong Kong"},
                   {"p_twborn", "Taiwan"},         {"p_phborn", "Philippines"},
                   {"p_indoborn", "Indonesia"},    {"p_fiborn", "Fiji"},
                   {"p_vtborn", "Vietnam"}};
  for (const auto& cc : countries) one_hot(cc.name, "country_of_birth", cc.country);
  attr_flag("p_esc", "english_speaking_country");

  missing_flag("p_agemiss", "birth_date");
  for (int a = 15; a <= 66; ++a)
    age_band("p_aged" + std::to_string(a - 14), a, a);
  age_band("p_agecatd1", 0, 24);
  for (int b = 0; b < 8; ++b)
    age_band("p_agecatd" + std::to_string(b + 2), 25 + 5 * b, 29 + 5 * b);
  age_band("p_age65ab", 65, -1);

  // --- Income support and benefit receipt history ---------------------------
  ever("p_evis14", any_is);
  ever("p_evdsp14", SpellFilter::subfamily(PSF::kDisability));
  ever("p_evcar14", SpellFilter::subfamily(PSF::kCarer));
  ever("p_evage14", SpellFilter::subfamily(PSF::kAgePension));
  ever("p_evune14", SpellFilter::subfamily(PSF::kUnemployment));
  ever("p_evpar14", SpellFilter::subfamily(PSF::kParenting));
  ever("p_evpart14", SpellFilter::subfamily(PSF::kPartner));
  ever("p_evcri2014", SpellFilter::subfamily(PSF::kCrisis));
  ever("p_evstud14",
       SpellFilter::exact_codes({"Austudy", "Youth Allowance (Student)"}));
  ever("p_evraa2014", SpellFilter::exact_codes({"Remote Area Allowance"}));
  ever("p_cripay2014", SpellFilter::exact_codes({"Crisis Payment"}));
  ever("p_evadv2014", SpellFilter::exact_codes({"Advanced Payment"}));

  duration("p_isprop14", any_is, /*normalize=*/true);
  {
    FeatureCatalogEntry e;
    e.name = "p_ischurn";
    e.family = FF::kCount;
    e.count_churn = true;
    e.filter = any_is;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_istransfer";
    e.family = FF::kEverIndicator;
    e.count_is_transfers = true;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_numistran";
    e.family = FF::kCount;
    e.count_is_transfers = true;
    add(std::move(e));
  }

  const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                          "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  for (int m = 1; m <= 12; ++m) {
    FeatureCatalogEntry e;
    e.name = std::string("p_") + months[m - 1] + "2014";
    e.family = FF::kSeasonality;
    e.month = m;
    e.filter = any_clk;
    add(std::move(e));
  }
  for (int q = 1; q <= 4; ++q) {
    FeatureCatalogEntry e;
    e.name = "p_qr" + std::to_string(q) + "2014";
    e.family = FF::kSeasonality;
    e.quarter = q;
    e.filter = any_clk;
    add(std::move(e));
  }

  duration("p_bendur2014", any_clk);
  duration("p_isdur14", any_is);
  duration("p_ftbdur2014",
           SpellFilter::exact_codes({"Family Tax Benefit A", "Family Tax Benefit B"}));
  duration("p_dspdur2014", SpellFilter::subfamily(PSF::kDisability));
  duration("p_cardur2014", SpellFilter::subfamily(PSF::kCarer));
  duration("p_agedur2014", SpellFilter::subfamily(PSF::kAgePension));
  duration("p_ubdur2014", SpellFilter::subfamily(PSF::kUnemployment));
  duration("p_pardur2014", SpellFilter::subfamily(PSF::kParenting));
  duration("p_partdur2014", SpellFilter::subfamily(PSF::kPartner));
  duration("p_cridur2014", SpellFilter::subfamily(PSF::kCrisis));
  duration("p_othdur2014", SpellFilter::subfamily(PSF::kOtherIncomeSupport));

  {
    FeatureCatalogEntry e;
    e.name = "p_totpy2014";
    e.family = FF::kAmountTotal;
    e.quantity = BQ::kBenefitAmount;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_sdpy";
    e.family = FF::kFluctuation;
    e.quantity = BQ::kBenefitAmount;
    add(std::move(e));
  }
  attr_num("p_maxisnei2014", "max_is_neighbourhood_2014", FF::kCount, false);

  // --- Sanctions ------------------------------------------------------------
  attr_flag("p_evsus2014", "ever_suspended_2014");
  attr_num("p_numsus2014", "num_suspensions_2014", FF::kCount, false);
  attr_flag("p_evsannb2014", "benefit_terminated_breach_2014");

  // --- Personal relationships ----------------------------------------------
  attr_flag("p_evsing2014", "ever_single_2014");
  attr_flag("p_evmar2014", "ever_married_2014");
  attr_flag("p_evdef2014", "ever_defacto_2014");
  attr_flag("p_evsep2014", "ever_separated_2014");
  attr_flag("p_evdiv2014", "ever_divorced_2014");
  attr_flag("p_evwid2014", "ever_widowed_2014");
  attr_flag("p_evchms2014", "changed_rel_status_2014");
  attr_num("p_numchms2014", "num_rel_changes_2014", FF::kCount, false);
  attr_num("p_reldur2014", "relationship_days_2014", FF::kDuration, false);
  attr_flag("p_evlp2014", "single_parent_2014");

  // --- Children -------------------------------------------------------------
  attr_flag("p_parent2014", "with_child_2014");
  attr_flag("p_kidb16in2014", "child_below16_2014");
  attr_flag("p_kidb10in2014", "child_below10_2014");
  attr_flag("p_kidb5in2014", "child_below5_2014");
  attr_num("p_chageyng2014", "youngest_child_age_2014", FF::kCount, true);
  attr_num("p_chageeld2014", "eldest_child_age_2014", FF::kCount, true);
  attr_num("p_chagemean2014", "mean_child_age_2014", FF::kCount, true);
  attr_num("p_numch2014", "num_children_2014", FF::kCount, false);
  const char* kid_bands[] = {"b1", "1t3", "3t5", "5t8", "8t10", "10t15", "15ab"};
  for (const char* b : kid_bands)
    attr_num(std::string("p_numch") + b, std::string("num_children_") + b, FF::kCount,
             false);
  for (const char* b : kid_bands)
    attr_flag(std::string("p_havekid") + b, std::string("have_kid_") + b);

  // --- Employment -----------------------------------------------------------
  {
    FeatureCatalogEntry e;
    e.name = "p_totinc2014";
    e.family = FF::kAmountTotal;
    e.quantity = BQ::kEmploymentIncome;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_inctc";
    e.family = FF::kTopCodeFlag;
    e.base = "p_totinc2014";
    e.topcode_rule = "p99";
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_tothr2014";
    e.family = FF::kAmountTotal;
    e.quantity = BQ::kEmploymentHours;
    e.cap_value = 5200;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_thrtc";
    e.family = FF::kTopCodeFlag;
    e.base = "p_tothr2014";
    e.topcode_rule = "cap";
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_wage2014";
    e.family = FF::kDerivedRatio;
    e.numerator = {"p_totinc2014"};
    e.denominator = {"p_tothr2014"};
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_avhr2014";
    e.family = FF::kAmountTotal;
    e.quantity = BQ::kEmploymentHours;
    e.mean_daily_rate = true;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_mininc2014";
    e.family = FF::kAmountTotal;
    e.quantity = BQ::kEmploymentIncome;
    e.min_daily_rate = true;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_dinctc";
    e.family = FF::kTopCodeFlag;
    e.base = "p_mininc2014";
    e.topcode_rule = "p99";
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_minhr2014";
    e.family = FF::kAmountTotal;
    e.quantity = BQ::kEmploymentHours;
    e.min_daily_rate = true;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_sdinc";
    e.family = FF::kFluctuation;
    e.quantity = BQ::kEmploymentIncome;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_sdhr2014";
    e.family = FF::kFluctuation;
    e.quantity = BQ::kEmploymentHours;
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_numhrch";
    e.family = FF::kCount;
    e.count_hours_changes = true;
    add(std::move(e));
  }
  hours_band("p_evhrd50m", -1, 0.51, 1e30);
  hours_band("p_evhrd31t50", -1, 0.31, 0.50);
  hours_band("p_evhrd11t30", -1, 0.11, 0.30);
  hours_band("p_evsamehr", 0, 0.0, 0.10);
  hours_band("p_evhri11t30", +1, 0.11, 0.30);
  hours_band("p_evhri31t50", +1, 0.31, 0.50);
  hours_band("p_evhri50m", +1, 0.51, 1e30);

  attr_flag("p_evzh", "zero_hour_contract_2014", true);
  attr_num("p_numjob2014", "num_jobs_2014", FF::kCount, true);
  attr_num("p_maxsimjob2014", "max_simultaneous_jobs_2014", FF::kCount, true);
  attr_num("p_lemnum2014", "num_employment_spells_2014", FF::kCount, true);
  attr_flag("p_minwage2014", "min_wage_worker_2014", true);
  attr_flag("p_evacqvar2014", "acquired_variable_income_2014", true);
  attr_flag("p_morewithinwi2014", "within_employer_instability_2014", true);
  attr_flag("p_evchwday2014", "changed_work_days_2014", true);
  attr_num("p_avjobten2014", "avg_job_tenure_2014", FF::kDuration, true);
  attr_num("p_maxjobten2014", "max_job_tenure_2014", FF::kDuration, true);

  // --- Housing --------------------------------------------------------------
  attr_flag("p_hl2014", "homeless_2014");
  attr_flag("p_homeowner2014", "homeowner_2014");
  attr_flag("p_pubrent2014", "public_rent_2014");
  attr_flag("p_prirent2014", "private_rent_2014");
  attr_flag("p_othrent2014", "other_rent_2014");
  attr_flag("p_shraccom2014", "shared_accom_2014");
  attr_flag("p_nshraccom2014", "nonshared_accom_2014");
  attr_flag("p_parenthome2014", "parent_home_2014");
  attr_flag("p_exemacom2014", "exempt_accom_2014");
  attr_flag("p_unkacom2014", "unknown_accom_2014");
  attr_num("p_accomdur2014", "accom_days_2014", FF::kDuration, false);
  attr_num("p_totrent2014", "total_rent_2014", FF::kAmountTotal, false);
  ever("p_evra2014",
       SpellFilter::exact_codes({"Rental Assistance Family", "Rental Assistance Parenting",
                                 "Rental Assistance Newstart", "Rental Assistance Pension",
                                 "Rental Assistance Abstudy"}));
  {
    FeatureCatalogEntry e;
    e.name = "p_rentstr2014";
    e.family = FF::kDerivedRatio;
    e.numerator = {"p_totrent2014"};
    e.denominator = {"p_totpy2014", "p_totinc2014"};
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_rstc";
    e.family = FF::kTopCodeFlag;
    e.base = "p_rentstr2014";
    e.topcode_rule = "above-1";
    add(std::move(e));
  }

  // --- Location and residential movement ------------------------------------
  attr_flag("p_evmove", "moved_2014");
  attr_num("p_totmoves", "num_moves_2014", FF::kCount, false);
  struct {
    const char* name;
    const char* state;
  } states[] = {{"p_evnsw", "NSW"}, {"p_evvic", "VIC"}, {"p_evqld", "QLD"},
                {"p_evwa", "WA"},   {"p_evsa", "SA"},   {"p_evact", "ACT"},
                {"p_evnt", "NT"},   {"p_evtas", "TAS"}};
  for (const auto& s : states) one_hot(s.name, "state", s.state);
  attr_num("p_resdur2014", "residence_days_2014", FF::kDuration, false);
  attr_flag("p_upseifa2014", "seifa_up_2014");
  attr_flag("p_downseifa2014", "seifa_down_2014");
  attr_flag("p_sameseifa2014", "seifa_same_2014");
  attr_flag("p_evtempres2014", "temp_housing_2014");
  for (int i = 1; i <= 20; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "SA3_%02d", i);
    one_hot("p_evlsa3_" + std::string(id + 4), "sa3", id);
  }

  // --- Education ------------------------------------------------------------
  attr_flag("p_evsd2014", "ever_studied_2014");
  edu_le("p_eduy10", 0);
  edu_le("p_eduy12", 1);
  edu_le("p_educert", 2);
  edu_le("p_educert1", 3);
  edu_le("p_educert2", 4);
  edu_le("p_educert3", 5);
  edu_le("p_educert4", 6);
  edu_le("p_edudip", 7);
  edu_le("p_edubach", 8);
  missing_flag("p_edumiss", "education");

  // --- Caring responsibilities ----------------------------------------------
  attr_flag("p_adcare2014", "adult_carer_2014");
  attr_flag("p_chcare2014", "child_carer_2014");

  // --- High-cost group indicators (carer<=24, student, parent<=18) ----------
  age_band("p_aged18u", 0, 18);
  {
    FeatureCatalogEntry e;
    e.name = "p_ttlcarer";
    e.family = FF::kInteraction;
    e.base = "p_evcar14";
    e.base2 = "p_agecatd1";
    add(std::move(e));
  }
  {
    FeatureCatalogEntry e;
    e.name = "p_ttlparent";
    e.family = FF::kInteraction;
    e.base = "p_evpar14";
    e.base2 = "p_aged18u";
    add(std::move(e));
  }

  // --- Parental income support history (via parent_links) -------------------
  auto parent_ever = [&](std::string name, std::string role, SpellFilter f) {
    FeatureCatalogEntry e;
    e.name = std::move(name);
    e.family = FF::kEverIndicator;
    e.source = FS::kParent;
    e.parent_role = std::move(role);
    e.filter = std::move(f);
    add(std::move(e));
  };
  parent_ever("p_paris14", "any", any_is);
  parent_ever("p_dais14", "father", any_is);
  parent_ever("p_mais14", "mother", any_is);
  parent_ever("p_pardsp14", "any", SpellFilter::subfamily(PSF::kDisability));
  parent_ever("p_parub14", "any", SpellFilter::subfamily(PSF::kUnemployment));
  parent_ever("p_parpar14", "any", SpellFilter::subfamily(PSF::kParenting));

  c.validate();
  return c;
}

}  // namespace spellforge
