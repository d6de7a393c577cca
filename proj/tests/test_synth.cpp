#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "spellforge/csv.hpp"
#include "spellforge/synth.hpp"

using namespace spellforge;

TEST_CASE("generation is deterministic and thread-count invariant") {
  DgpConfig cfg;
  cfg.n_persons = 200;
  cfg.seed = 42;
  SynthCohort a = generate(cfg, 1);
  SynthCohort b = generate(cfg, 4);
  REQUIRE(a.persons.size() == 200);
  REQUIRE(b.persons.size() == 200);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(a.persons[i].outcome == b.persons[i].outcome);
    CHECK(a.persons[i].truth == b.persons[i].truth);
    CHECK(a.persons[i].history.spells.size() == b.persons[i].history.spells.size());
    CHECK(a.persons[i].history.demographics == b.persons[i].history.demographics);
  }
  DgpConfig other = cfg;
  other.seed = 43;
  SynthCohort c = generate(other, 1);
  int diffs = 0;
  for (std::size_t i = 0; i < 200; ++i)
    if (a.persons[i].outcome != c.persons[i].outcome) ++diffs;
  CHECK(diffs > 0);
}

TEST_CASE("emitted spells reproduce the stored outcome") {
  DgpConfig cfg;
  cfg.n_persons = 300;
  cfg.seed = 7;
  SynthCohort cohort = generate(cfg, 2);
  const auto any_is = SpellFilter::any_income_support();
  for (const auto& p : cohort.persons) {
    double measured = outcome_proportion(p.history, outcome_window(), any_is);
    CHECK(std::abs(measured - p.outcome) < 0.5 / 1461.0);
    CHECK(p.outcome >= 0.0);
    CHECK(p.outcome <= 1.0);
    // outcomes land on whole days of the window
    double days = p.outcome * 1461.0;
    CHECK(std::abs(days - std::round(days)) < 1e-6);
  }
}

TEST_CASE("without noise the conditional mean is the outcome") {
  DgpConfig cfg;
  cfg.n_persons = 250;
  cfg.seed = 11;
  cfg.noise_scale = 0.0;
  SynthCohort cohort = generate(cfg, 2);
  for (const auto& p : cohort.persons) CHECK(p.truth == p.outcome);
  CHECK(oracle_r2(cfg, 20000, 2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("point masses and archetype shares match their targets") {
  DgpConfig cfg;
  cfg.n_persons = 50000;
  cfg.seed = 5;
  SynthCohort cohort = generate(cfg, 4);
  double at0 = 0, at1 = 0;
  std::array<int, 4> arch{0, 0, 0, 0};
  for (const auto& p : cohort.persons) {
    if (p.outcome == 0.0) at0 += 1;
    if (p.outcome == 1.0) at1 += 1;
    arch[static_cast<std::size_t>(p.archetype)] += 1;
  }
  at0 /= cfg.n_persons;
  at1 /= cfg.n_persons;
  CHECK(std::abs(at0 - cfg.p0) < 0.02);
  CHECK(std::abs(at1 - cfg.p1) < 0.02);
  for (int a = 0; a < 4; ++a) {
    double share = static_cast<double>(arch[static_cast<std::size_t>(a)]) /
                   cfg.n_persons;
    CHECK(std::abs(share - cfg.archetype_mix[static_cast<std::size_t>(a)]) < 0.02);
  }
}

TEST_CASE("interior outcomes can exceed the planted masses only via noise") {
  DgpConfig cfg;
  cfg.n_persons = 5000;
  cfg.seed = 3;
  cfg.noise_scale = 0.0;
  cfg.interior_lo = 0.05;
  cfg.interior_hi = 0.95;
  SynthCohort cohort = generate(cfg, 4);
  for (const auto& p : cohort.persons) {
    if (p.outcome == 0.0 || p.outcome == 1.0) continue;
    CHECK(p.outcome >= cfg.interior_lo - 1.0 / 1461.0);
    CHECK(p.outcome <= cfg.interior_hi + 1.0 / 1461.0);
  }
}

TEST_CASE("spells stay inside the observable data range and validate") {
  DgpConfig cfg;
  cfg.n_persons = 400;
  cfg.seed = 19;
  SynthCohort cohort = generate(cfg, 2);
  for (const auto& p : cohort.persons)
    for (const auto& s : p.history.spells) CHECK_NOTHROW(s.validate());
}

TEST_CASE("oracle ceiling shrinks as noise grows") {
  DgpConfig cfg;
  cfg.n_persons = 100;
  cfg.seed = 23;
  cfg.noise_scale = 0.05;
  double low_noise = oracle_r2(cfg, 30000, 4);
  cfg.noise_scale = 0.4;
  double high_noise = oracle_r2(cfg, 30000, 4);
  CHECK(low_noise > high_noise);
  CHECK(low_noise <= 1.0 + 1e-9);
  CHECK(high_noise > 0.0);
}

TEST_CASE("config validation rejects impossible settings") {
  DgpConfig c;
  c.p0 = 0.7;
  c.p1 = 0.4;
  CHECK_THROWS(c.validate());
  c = DgpConfig{};
  c.archetype_mix = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS(c.validate());
  c = DgpConfig{};
  c.noise_scale = -0.1;
  CHECK_THROWS(c.validate());
  c = DgpConfig{};
  c.interior_lo = 0.9;
  c.interior_hi = 0.1;
  CHECK_THROWS(c.validate());
  c = DgpConfig{};
  c.n_persons = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("config json round trip") {
  DgpConfig c;
  c.n_persons = 123;
  c.seed = 99;
  c.p0 = 0.25;
  c.p1 = 0.3;
  c.archetype_mix = {0.1, 0.2, 0.3, 0.4};
  c.b_isprop = 0.5;
  c.oracle_r2_ref = 0.66;
  save_dgp_json("test_synth_cfg.json", c);
  DgpConfig back = load_dgp_json("test_synth_cfg.json");
  CHECK(back.n_persons == 123);
  CHECK(back.seed == 99);
  CHECK(back.p0 == 0.25);
  CHECK(back.archetype_mix == c.archetype_mix);
  CHECK(back.b_isprop == 0.5);
  CHECK(back.oracle_r2_ref == 0.66);
}

TEST_CASE("cohort files round trip through the csv layer") {
  namespace fs = std::filesystem;
  DgpConfig cfg;
  cfg.n_persons = 50;
  cfg.seed = 31;
  SynthCohort cohort = generate(cfg, 1);
  fs::create_directories("test_synth_out");
  write_cohort("test_synth_out", cohort);
  auto spells = read_spells_csv("test_synth_out/spells.csv");
  auto attrs = read_persons_csv("test_synth_out/persons.csv");
  auto persons = assemble_histories(spells, attrs);
  CHECK(persons.size() == 50);
  std::size_t total_spells = 0;
  for (const auto& p : cohort.persons) total_spells += p.history.spells.size();
  CHECK(spells.size() == total_spells);
}
