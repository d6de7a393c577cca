#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "spellforge/csv.hpp"
#include "spellforge/date.hpp"
#include "spellforge/payments.hpp"
#include "spellforge/spells.hpp"
#include "spellforge/util.hpp"

using namespace spellforge;

TEST_CASE("date parsing and arithmetic") {
  Date d = Date::parse("2014-01-01");
  CHECK(d.year() == 2014);
  CHECK(d.to_iso() == "2014-01-01");
  CHECK(Date::parse("2014-12-31") - d == 364);
  CHECK((d + 31).to_iso() == "2014-02-01");
  CHECK_THROWS(Date::parse("2014-13-01"));
  CHECK_THROWS(Date::parse("2014-02-30"));
  CHECK_THROWS(Date::parse("20140101"));
  CHECK(Date::parse("2016-02-29").to_iso() == "2016-02-29");  // leap day
  CHECK_THROWS(Date::parse("2015-02-29"));
}

TEST_CASE("observation windows") {
  CHECK(outcome_window().day_count() == 1461);
  CHECK(base_year_window().day_count() == 365);
  ObservationWindow w(Date::parse("2015-03-01"), Date::parse("2015-03-03"));
  CHECK(w.day_count() == 3);
  CHECK(w.contains(Date::parse("2015-03-02")));
  CHECK(!w.contains(Date::parse("2015-03-04")));
  CHECK_THROWS(ObservationWindow(Date::parse("2015-03-03"), Date::parse("2015-03-01")));
}

TEST_CASE("payment taxonomy") {
  CHECK(payment_taxonomy().size() == 36);
  int n_is = 0;
  for (const auto& c : payment_taxonomy())
    if (c.is_income_support) ++n_is;
  CHECK(n_is == 24);
  CHECK(classify_payment("Newstart Allowance").subfamily ==
        PaymentSubfamily::kUnemployment);
  CHECK(classify_payment("Youth Allowance (Other)").subfamily ==
        PaymentSubfamily::kUnemployment);
  CHECK(classify_payment("Youth Allowance (Student)").subfamily ==
        PaymentSubfamily::kOtherIncomeSupport);
  CHECK(!classify_payment("Family Tax Benefit A").is_income_support);
  CHECK(classify_payment("Employment Income").is_employment_income);
  CHECK_THROWS_AS((void)classify_payment("Jetpack Allowance"), UnknownPaymentCode);
}

TEST_CASE("outcome proportion from spells") {
  PersonHistory h;
  h.person_id = "p1";
  const auto any_is = SpellFilter::any_income_support();

  SUBCASE("full coverage gives exactly one") {
    h.spells.push_back({"p1", "Newstart Allowance", Date::parse("2015-01-01"),
                        Date::parse("2018-12-31"), 600.0});
    CHECK(outcome_proportion(h, outcome_window(), any_is) == 1.0);
  }
  SUBCASE("single 2015 calendar year") {
    h.spells.push_back({"p1", "Newstart Allowance", Date::parse("2015-01-01"),
                        Date::parse("2015-12-31"), 600.0});
    CHECK(outcome_proportion(h, outcome_window(), any_is) == 365.0 / 1461.0);
  }
  SUBCASE("overlapping spells count each day once") {
    h.spells.push_back({"p1", "Newstart Allowance", Date::parse("2015-01-01"),
                        Date::parse("2015-12-31"), 600.0});
    h.spells.push_back({"p1", "Parenting Payment Single", Date::parse("2015-06-01"),
                        Date::parse("2015-12-31"), 650.0});
    CHECK(outcome_proportion(h, outcome_window(), any_is) == 365.0 / 1461.0);
  }
  SUBCASE("same-day transfer between payments counts the day once") {
    h.spells.push_back({"p1", "Newstart Allowance", Date::parse("2015-01-01"),
                        Date::parse("2015-01-10"), 600.0});
    h.spells.push_back({"p1", "Disability Support Pension", Date::parse("2015-01-10"),
                        Date::parse("2015-01-20"), 800.0});
    CHECK(covered_days(h, outcome_window(), any_is) == 20);
  }
  SUBCASE("non income support payments are excluded") {
    h.spells.push_back({"p1", "Family Tax Benefit A", Date::parse("2015-01-01"),
                        Date::parse("2018-12-31"), 160.0});
    CHECK(outcome_proportion(h, outcome_window(), any_is) == 0.0);
  }
  SUBCASE("subfamily filter") {
    h.spells.push_back({"p1", "Disability Support Pension", Date::parse("2015-01-01"),
                        Date::parse("2015-12-31"), 800.0});
    auto unemp = SpellFilter::subfamily(PaymentSubfamily::kUnemployment);
    CHECK(outcome_proportion(h, outcome_window(), unemp) == 0.0);
    auto dsp = SpellFilter::subfamily(PaymentSubfamily::kDisability);
    CHECK(outcome_proportion(h, outcome_window(), dsp) == 365.0 / 1461.0);
  }
}

TEST_CASE("spell validation") {
  SpellRecord s{"p1", "Newstart Allowance", Date::parse("2015-02-01"),
                Date::parse("2015-01-01"), 100.0};
  CHECK_THROWS(s.validate());  // end before start
  SpellRecord ok{"p1", "Newstart Allowance", Date::parse("2015-01-01"),
                 Date::parse("2015-01-01"), 100.0};
  CHECK_NOTHROW(ok.validate());  // single-day spell
  SpellRecord early{"p1", "Newstart Allowance", Date::parse("1999-12-31"),
                    Date::parse("2015-01-01"), 100.0};
  CHECK_THROWS(early.validate());  // before the data range
}

TEST_CASE("csv round trip") {
  const std::string dir = "test_core_tmp";
  std::remove((dir + "_spells.csv").c_str());
  std::vector<SpellRecord> spells = {
      {"p1", "Newstart Allowance", Date::parse("2015-01-01"), Date::parse("2015-06-30"),
       601.25},
      {"p2", "Employment Income", Date::parse("2014-03-01"), Date::parse("2014-09-30"),
       2400.0},
      {"p2", "Age Pension", Date::parse("2016-01-01"), Date::parse("2016-12-31"),
       std::nullopt},
  };
  write_spells_csv(dir + "_spells.csv", spells);
  auto back = read_spells_csv(dir + "_spells.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[0].person_id == "p1");
  CHECK(back[0].amount == 601.25);
  CHECK(!back[2].amount.has_value());
  CHECK(back[1].start.to_iso() == "2014-03-01");

  std::vector<PersonAttributeRow> attrs = {{"p1", "sex", "female"},
                                           {"p1", "birth_date", "1980-05-01"},
                                           {"p3", "sex", "male"}};
  write_persons_csv(dir + "_persons.csv", attrs);
  auto attrs2 = read_persons_csv(dir + "_persons.csv");
  REQUIRE(attrs2.size() == 3);

  auto persons = assemble_histories(back, attrs2);
  REQUIRE(persons.size() == 3);  // p1, p2 from spells; p3 attribute-only
  CHECK(persons[0].person_id == "p1");
  CHECK(persons[0].attribute("sex") == "female");
  CHECK(!persons[1].attribute("sex").has_value());
  CHECK(persons[2].person_id == "p3");
}

TEST_CASE("csv rejects malformed input") {
  const std::string path = "test_core_bad.csv";
  {
    std::ofstream out(path);
    out << "person_id,payment_code,start_date,end_date,amount\n";
    out << "p1,Newstart Allowance,2015-01-01,2015-13-01,100\n";
  }
  CHECK_THROWS((void)read_spells_csv(path));
  {
    std::ofstream out(path);
    out << "wrong,header\n";
  }
  CHECK_THROWS((void)read_spells_csv(path));
  {
    std::ofstream out(path);
    out << "person_id,payment_code,start_date,end_date,amount\n";
    out << "p1,Some Unknown Payment,2015-01-01,2015-02-01,100\n";
  }
  CHECK_THROWS((void)read_spells_csv(path));
}

TEST_CASE("portable rng and shuffling are stable across runs") {
  Rng a(derive_seed(42, 1, 2));
  Rng b(derive_seed(42, 1, 2));
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  CHECK(derive_seed(42, 1, 2) != derive_seed(42, 2, 1));

  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng r1(7), r2(7);
  shuffle_portable(v1, r1);
  shuffle_portable(v2, r2);
  CHECK(v1 == v2);
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(
      parallel_for(10, 4,
                   [&](std::size_t i) {
                     if (i == 7) throw std::runtime_error("boom");
                   }),
      std::runtime_error);
}
