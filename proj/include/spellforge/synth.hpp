#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spellforge/spells.hpp"

namespace spellforge {

// Archetypes drive demographics and payment mix for generated persons.
enum class Archetype { kDisability = 0, kMigrant = 1, kYoungUnemployed = 2, kParent = 3 };

struct DgpConfig {
  int n_persons = 1000;
  std::uint64_t seed = 1;
  // Point masses of the outcome distribution at 0 and 1.
  double p0 = 0.323;
  double p1 = 0.367;
  double noise_scale = 0.1;
  std::array<double, 4> archetype_mix{0.04, 0.56, 0.21, 0.19};
  // Latent interior outcome: b0 + b_isprop*c + b_isprop_sq*c^2
  // + b_totinc*income + b_sdpy*benefit_sd + b_parent_x*(c*parent), then
  // clamped to [interior_lo, interior_hi], plus Gaussian noise, clamped to
  // [0,1] and quantized to whole days of the four-year window.
  double b0 = 0.08;
  double b_isprop = 0.62;
  double b_isprop_sq = 0.40;
  double b_totinc = -4.0e-6;
  double b_sdpy = -4.0e-4;
  double b_parent_x = 0.18;
  double interior_lo = 0.03;
  double interior_hi = 0.97;
  // Reference oracle ceiling stored with shipped configs; < 0 means unset.
  double oracle_r2_ref = -1.0;

  void validate() const;
};

DgpConfig load_dgp_json(const std::string& path);
void save_dgp_json(const std::string& path, const DgpConfig& cfg);

struct SynthPerson {
  PersonHistory history;
  double outcome = 0.0;  // realized quantized outcome over 2015-2018
  double truth = 0.0;    // conditional mean outcome given the features
  Archetype archetype = Archetype::kMigrant;
};

struct SynthCohort {
  std::vector<SynthPerson> persons;
};

SynthCohort generate(const DgpConfig& cfg, int threads = 1);

// Monte-Carlo estimate of var(truth)/var(outcome), the R^2 ceiling.
double oracle_r2(const DgpConfig& cfg, int n_draws = 200000, int threads = 1);

// Writes spells.csv, persons.csv and truth.csv into the directory.
void write_cohort(const std::string& dir, const SynthCohort& cohort);

}  // namespace spellforge
