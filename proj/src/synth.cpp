#include "spellforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "spellforge/csv.hpp"
#include "spellforge/features.hpp"
#include "spellforge/learners.hpp"
#include "spellforge/util.hpp"

namespace spellforge {

using json = nlohmann::json;

void DgpConfig::validate() const {
  if (n_persons < 1) throw std::invalid_argument("dgp: n_persons must be >= 1");
  if (p0 < 0 || p1 < 0 || p0 + p1 > 1.0)
    throw std::invalid_argument("dgp: point masses must satisfy p0 + p1 <= 1");
  if (noise_scale < 0) throw std::invalid_argument("dgp: negative noise scale");
  double mix = 0.0;
  for (double m : archetype_mix) {
    if (m < 0) throw std::invalid_argument("dgp: negative archetype share");
    mix += m;
  }
  if (std::abs(mix - 1.0) > 1e-9)
    throw std::invalid_argument("dgp: archetype mix must sum to 1");
  if (interior_lo < 0 || interior_hi > 1 || interior_lo >= interior_hi)
    throw std::invalid_argument("dgp: bad interior clamp range");
}

DgpConfig load_dgp_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j = json::parse(in);
  DgpConfig c;
  c.n_persons = j.value("n_persons", c.n_persons);
  c.seed = j.value("seed", c.seed);
  c.p0 = j.value("p0", c.p0);
  c.p1 = j.value("p1", c.p1);
  c.noise_scale = j.value("noise_scale", c.noise_scale);
  if (j.contains("archetype_mix")) {
    auto v = j["archetype_mix"].get<std::vector<double>>();
    if (v.size() != 4) throw std::invalid_argument("dgp: archetype_mix needs 4 shares");
    std::copy(v.begin(), v.end(), c.archetype_mix.begin());
  }
  c.b0 = j.value("b0", c.b0);
  c.b_isprop = j.value("b_isprop", c.b_isprop);
  c.b_isprop_sq = j.value("b_isprop_sq", c.b_isprop_sq);
  c.b_totinc = j.value("b_totinc", c.b_totinc);
  c.b_sdpy = j.value("b_sdpy", c.b_sdpy);
  c.b_parent_x = j.value("b_parent_x", c.b_parent_x);
  c.interior_lo = j.value("interior_lo", c.interior_lo);
  c.interior_hi = j.value("interior_hi", c.interior_hi);
  c.oracle_r2_ref = j.value("oracle_r2_ref", c.oracle_r2_ref);
  c.validate();
  return c;
}

void save_dgp_json(const std::string& path, const DgpConfig& c) {
  json j;
  j["n_persons"] = c.n_persons;
  j["seed"] = c.seed;
  j["p0"] = c.p0;
  j["p1"] = c.p1;
  j["noise_scale"] = c.noise_scale;
  j["archetype_mix"] = std::vector<double>(c.archetype_mix.begin(), c.archetype_mix.end());
  j["b0"] = c.b0;
  j["b_isprop"] = c.b_isprop;
  j["b_isprop_sq"] = c.b_isprop_sq;
  j["b_totinc"] = c.b_totinc;
  j["b_sdpy"] = c.b_sdpy;
  j["b_parent_x"] = c.b_parent_x;
  j["interior_lo"] = c.interior_lo;
  j["interior_hi"] = c.interior_hi;
  if (c.oracle_r2_ref >= 0) j["oracle_r2_ref"] = c.oracle_r2_ref;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

namespace {

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

double normal01(Rng& rng) {
  // Box-Muller; avoids distribution-object implementation differences
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Mean of clamp(N(mu, sigma^2), lo, hi).
double censored_mean(double mu, double sigma, double lo, double hi) {
  if (sigma <= 0) return std::clamp(mu, lo, hi);
  double a = (lo - mu) / sigma;
  double b = (hi - mu) / sigma;
  double mid = mu * (normal_cdf(b) - normal_cdf(a)) -
               sigma * (normal_pdf(b) - normal_pdf(a));
  return mid + lo * normal_cdf(a) + hi * (1.0 - normal_cdf(b));
}

const char* kStates[] = {"NSW", "VIC", "QLD", "WA", "SA", "ACT", "NT", "TAS"};

struct ArchetypeProfile {
  const char* is_code;
  int age_lo, age_hi;
  bool migrant;
  bool parent;
};

const ArchetypeProfile kProfiles[4] = {
    {"Disability Support Pension", 35, 60, false, false},
    {"Newstart Allowance", 25, 55, true, false},
    {"Youth Allowance (Other)", 18, 24, false, false},
    {"Parenting Payment Single", 22, 45, false, true},
};

}  // namespace

SynthCohort generate(const DgpConfig& cfg, int threads) {
  cfg.validate();
  const ObservationWindow ow = outcome_window();
  const int window_days = ow.day_count();  // 1461
  SynthCohort cohort;
  cohort.persons.resize(static_cast<std::size_t>(cfg.n_persons));

  parallel_for(static_cast<std::size_t>(cfg.n_persons), threads, [&](std::size_t pi) {
    Rng rng(derive_seed(cfg.seed, pi, 0));
    SynthPerson& sp = cohort.persons[pi];
    PersonHistory& h = sp.history;
    char idbuf[24];
    std::snprintf(idbuf, sizeof(idbuf), "P%07zu", pi);
    h.person_id = idbuf;

    // archetype
    double u = uniform01(rng);
    int arch = 3;
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
      acc += cfg.archetype_mix[static_cast<std::size_t>(a)];
      if (u < acc) {
        arch = a;
        break;
      }
    }
    sp.archetype = static_cast<Archetype>(arch);
    const ArchetypeProfile& prof = kProfiles[arch];

    // outcome class
    double uc = uniform01(rng);
    enum { kNever, kAlways, kInterior } cls =
        uc < cfg.p0 ? kNever : (uc < cfg.p0 + cfg.p1 ? kAlways : kInterior);

    // demographics
    int age = prof.age_lo +
              static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(
                                                      prof.age_hi - prof.age_lo + 1)));
    int birth_year = 2014 - age;
    int birth_month = 1 + static_cast<int>(uniform_below(rng, 12));
    int birth_day = 1 + static_cast<int>(uniform_below(rng, 28));
    char bd[16];
    std::snprintf(bd, sizeof(bd), "%04d-%02d-%02d", birth_year, birth_month, birth_day);
    h.demographics["birth_date"] = bd;
    h.demographics["sex"] = uniform01(rng) < 0.5 ? "female" : "male";
    h.demographics["state"] = kStates[uniform_below(rng, 8)];
    char sa3[12];
    std::snprintf(sa3, sizeof(sa3), "SA3_%02d", 1 + static_cast<int>(uniform_below(rng, 20)));
    h.demographics["sa3"] = sa3;
    bool migrant = prof.migrant || uniform01(rng) < 0.1;
    h.demographics["immigrant"] = migrant ? "1" : "0";
    if (migrant) {
      const char* countries[] = {"China", "India", "Vietnam", "Philippines",
                                 "United Kingdom"};
      const char* regions[] = {"Asia", "Asia", "Asia", "Asia", "Europe"};
      std::size_t c = uniform_below(rng, 5);
      h.demographics["country_of_birth"] = countries[c];
      h.demographics["birth_region"] = regions[c];
      h.demographics["english_speaking_country"] = c == 4 ? "1" : "0";
    } else if (uniform01(rng) < 0.95) {
      h.demographics["country_of_birth"] = "Australia";
      h.demographics["birth_region"] = "Oceania and Pacific Islands";
      h.demographics["english_speaking_country"] = "1";
    }  // else country of birth unrecorded
    h.demographics["indigenous"] = uniform01(rng) < 0.05 ? "1" : "0";
    if (uniform01(rng) < 0.9)
      h.demographics["education"] =
          std::to_string(uniform_below(rng, 9));  // 0..8 attainment ladder
    bool parent = prof.parent || uniform01(rng) < 0.15;
    h.demographics["with_child_2014"] = parent ? "1" : "0";
    if (parent) {
      int kids = 1 + static_cast<int>(uniform_below(rng, 3));
      h.demographics["num_children_2014"] = std::to_string(kids);
      h.demographics["child_below16_2014"] = "1";
      h.demographics["single_parent_2014"] = arch == 3 ? "1" : "0";
      h.demographics["youngest_child_age_2014"] =
          std::to_string(uniform_below(rng, 10));
    }
    h.demographics["homeowner_2014"] = cls == kNever && uniform01(rng) < 0.5 ? "1" : "0";
    h.demographics["private_rent_2014"] = uniform01(rng) < 0.4 ? "1" : "0";
    h.demographics["ever_single_2014"] = uniform01(rng) < 0.5 ? "1" : "0";
    h.demographics["ever_married_2014"] = uniform01(rng) < 0.4 ? "1" : "0";

    // 2014 income-support coverage share
    double c_share;
    switch (cls) {
      case kNever: c_share = 0.0; break;
      case kAlways: c_share = 1.0; break;
      default: c_share = 0.05 + 0.90 * uniform01(rng); break;
    }
    const Date y2014 = Date::from_ymd(2014, 1, 1);
    int c_days = static_cast<int>(std::lround(c_share * 365.0));
    if (cls == kInterior) c_days = std::clamp(c_days, 18, 347);
    double fortnightly = 650.0 + 120.0 * normal01(rng);
    fortnightly = std::max(200.0, fortnightly);
    if (c_days > 0) {
      int slack = 365 - c_days;
      int off = slack > 0 ? static_cast<int>(uniform_below(
                                rng, static_cast<std::uint64_t>(slack + 1)))
                          : 0;
      Date s = y2014 + off;
      h.spells.push_back(
          {h.person_id, prof.is_code, s, s + (c_days - 1), fortnightly});
      // benefit top-ups that shape the fluctuation measure
      if (parent) {
        h.spells.push_back({h.person_id, "Family Tax Benefit A", s,
                            s + (c_days - 1), 160.0 + 30.0 * uniform01(rng)});
      }
      if (uniform01(rng) < 0.3) {
        h.spells.push_back({h.person_id, "Rental Assistance Newstart", s,
                            s + (c_days - 1), 120.0});
      }
    }

    // employment in the uncovered remainder of 2014
    double totinc = 0.0;
    int e_days = cls == kAlways ? 0 : 365 - c_days;
    if (e_days >= 14) {
      double wage = 2400.0 + 700.0 * normal01(rng);
      wage = std::max(600.0, wage);
      Date es = c_days > 0 ? y2014 : y2014;
      // place employment after the benefit spell when both exist
      if (c_days > 0) {
        // employment fills the start up to the spell or the tail after it
        const SpellRecord& is = h.spells.front();
        if (is.start - y2014 >= e_days)
          es = y2014;
        else
          es = is.end + 1;
      }
      Date ee = es + (e_days - 1);
      if (ee > Date::from_ymd(2014, 12, 31)) ee = Date::from_ymd(2014, 12, 31);
      if (ee >= es) {
        int days = ee - es + 1;
        h.spells.push_back({h.person_id, "Employment Income", es, ee, wage});
        h.spells.push_back({h.person_id, "Employment Hours", es, ee,
                            50.0 + 12.0 * uniform01(rng)});
        totinc = wage / 14.0 * days;
        h.demographics["num_jobs_2014"] =
            std::to_string(1 + uniform_below(rng, 2));
        h.demographics["avg_job_tenure_2014"] = std::to_string(days);
      }
    }

    // benefit-amount fluctuation as the feature engine will see it
    double sdpy;
    {
      bool short_series = false;
      auto series = biweekly_series(h, base_year_window(),
                                    BiweeklyQuantity::kBenefitAmount);
      sdpy = fluctuation(series, &short_series);
    }

    // latent interior outcome and realized spell coverage of 2015-2018
    double y;
    if (cls == kNever) {
      y = 0.0;
      sp.truth = 0.0;
    } else if (cls == kAlways) {
      y = 1.0;
      sp.truth = 1.0;
    } else {
      double m = cfg.b0 + cfg.b_isprop * c_share + cfg.b_isprop_sq * c_share * c_share +
                 cfg.b_totinc * totinc + cfg.b_sdpy * sdpy +
                 cfg.b_parent_x * c_share * (parent ? 1.0 : 0.0);
      m = std::clamp(m, cfg.interior_lo, cfg.interior_hi);
      // noise stays clamped inside the interior band so the planted point
      // masses at 0 and 1 are exactly the class shares
      double raw = std::clamp(m + cfg.noise_scale * normal01(rng),
                              cfg.interior_lo, cfg.interior_hi);
      int y_days = static_cast<int>(std::lround(raw * window_days));
      y = static_cast<double>(y_days) / window_days;
      if (cfg.noise_scale > 0) {
        sp.truth = censored_mean(m, cfg.noise_scale, cfg.interior_lo,
                                 cfg.interior_hi);
      } else {
        sp.truth = y;  // quantization is part of the noiseless outcome
      }
    }
    sp.outcome = y;

    int y_days = static_cast<int>(std::lround(y * window_days));
    if (y_days > 0) {
      int slack = window_days - y_days;
      int off = slack > 0 ? static_cast<int>(uniform_below(
                                rng, static_cast<std::uint64_t>(slack + 1)))
                          : 0;
      Date s = ow.first_day + off;
      h.spells.push_back(
          {h.person_id, prof.is_code, s, s + (y_days - 1), fortnightly});
    }
  });
  return cohort;
}

double oracle_r2(const DgpConfig& cfg, int n_draws, int threads) {
  DgpConfig mc = cfg;
  mc.n_persons = n_draws;
  mc.seed = derive_seed(cfg.seed, 0xBEEF, 0);
  SynthCohort cohort = generate(mc, threads);
  double my = 0.0, mt = 0.0;
  for (const auto& p : cohort.persons) {
    my += p.outcome;
    mt += p.truth;
  }
  my /= cohort.persons.size();
  mt /= cohort.persons.size();
  double vy = 0.0, vt = 0.0;
  for (const auto& p : cohort.persons) {
    vy += (p.outcome - my) * (p.outcome - my);
    vt += (p.truth - mt) * (p.truth - mt);
  }
  if (vy <= 0) return 0.0;
  return vt / vy;
}

void write_cohort(const std::string& dir, const SynthCohort& cohort) {
  std::vector<SpellRecord> spells;
  std::vector<PersonAttributeRow> attrs;
  for (const auto& p : cohort.persons) {
    for (const auto& s : p.history.spells) spells.push_back(s);
    for (const auto& [k, v] : p.history.demographics)
      attrs.push_back({p.history.person_id, k, v});
  }
  write_spells_csv(dir + "/spells.csv", spells);
  write_persons_csv(dir + "/persons.csv", attrs);

  std::ofstream truth(dir + "/truth.csv");
  if (!truth) throw std::runtime_error("cannot write '" + dir + "/truth.csv'");
  truth << "person_id,outcome,truth,archetype\n";
  char buf[96];
  for (const auto& p : cohort.persons) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%d", p.history.person_id.c_str(),
                  p.outcome, p.truth, static_cast<int>(p.archetype));
    truth << buf << '\n';
  }
}

}  // namespace spellforge
