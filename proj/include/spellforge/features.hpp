#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spellforge/spells.hpp"

namespace spellforge {

// ---------------------------------------------------------------------------
// Design matrix
// ---------------------------------------------------------------------------

struct FeatureMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // n rows x k columns, no missing cells

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  // Index of a named column; throws if absent.
  Eigen::Index column(const std::string& name) const;
  std::optional<Eigen::Index> find_column(const std::string& name) const;
};

using OutcomeVector = Eigen::VectorXd;

void write_features_csv(const std::string& path, const FeatureMatrix& m);
FeatureMatrix read_features_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Catalog
// ---------------------------------------------------------------------------

enum class FeatureFamily {
  kEverIndicator,
  kDuration,
  kCount,
  kAmountTotal,
  kFluctuation,
  kSeasonality,
  kAgeBand,
  kCategoryOneHot,
  kDerivedRatio,
  kTopCodeFlag,
  kMissingFlag,
  kInteraction,
};

std::string family_name(FeatureFamily f);
FeatureFamily family_from_name(const std::string& s);

enum class FeatureSource { kSpells, kAttribute, kParent };

// Per-fortnight quantity aggregated from spells.
enum class BiweeklyQuantity { kBenefitAmount, kEmploymentIncome, kEmploymentHours };

struct FeatureCatalogEntry {
  std::string name;
  FeatureFamily family = FeatureFamily::kEverIndicator;
  FeatureSource source = FeatureSource::kSpells;

  // Spell-sourced derivations.
  SpellFilter filter = SpellFilter::any_income_support();
  BiweeklyQuantity quantity = BiweeklyQuantity::kBenefitAmount;
  bool normalize_by_window = false;  // duration reported as fraction of window
  int month = 0;                     // seasonality: 1..12, or
  int quarter = 0;                   //              1..4
  bool count_is_transfers = false;   // count: transfers between distinct IS payments
  bool count_churn = false;          // ever left and re-entered (gap in coverage)
  bool count_hours_changes = false;  // count of >20% bi-weekly hours changes
  // Ever-indicator over bi-weekly hours changes falling in a relative band;
  // dir -1 decrease, +1 increase, 0 either.
  bool hours_change_band = false;
  double band_lo = 0.0, band_hi = 0.0;
  int band_dir = 0;
  // Employment spell statistics (per-day rates).
  bool min_daily_rate = false;   // min over employment spells of amount/14
  bool mean_daily_rate = false;  // total quantity / covered days

  // Attribute-sourced derivations.
  std::string attribute;
  std::string equals_value;        // one-hot: attribute == value
  bool use_numeric_le = false;     // one-hot: numeric attribute <= numeric_le
  double numeric_le = 0.0;
  bool missing_propagates = true;  // false: absent attribute reads as 0, not missing

  // Age bands, computed from birth_date at 2014-01-01, inclusive bounds.
  int age_min = -1, age_max = -1;

  // Derived ratio: sum(numerator entries) / sum(denominator entries).
  std::vector<std::string> numerator, denominator;

  // Top-code / missing flags and interactions reference earlier entries.
  std::string base, base2;
  std::string topcode_rule;  // "cap" | "p99" | "above-1"
  double cap_value = 0.0;    // cap applied to duration/amount entries

  // Parent-linked entries.
  std::string parent_role;  // "mother" | "father" | "any"
};

struct FeatureCatalog {
  std::vector<FeatureCatalogEntry> entries;

  void validate() const;  // unique names, resolvable references
  const FeatureCatalogEntry* find(const std::string& name) const;
};

FeatureCatalog default_catalog();
FeatureCatalog load_catalog_json(const std::string& path);
void save_catalog_json(const std::string& path, const FeatureCatalog& catalog);

// ---------------------------------------------------------------------------
// Derivation
// ---------------------------------------------------------------------------

struct FeatureValue {
  double value = 0.0;
  bool missing = false;
  bool topcoded = false;  // cap applied (for paired cap flags)
};

struct ParentLink {
  std::string child_id;
  std::string parent_id;
  std::string role;  // "mother" | "father"
};

std::vector<ParentLink> read_parent_links_csv(const std::string& path);

struct DeriveContext {
  const std::unordered_map<std::string, const PersonHistory*>* persons_by_id = nullptr;
  const std::vector<ParentLink>* parent_links = nullptr;
};

// Window partitioned into consecutive 14-day bins anchored at first_day; the
// final short bin is kept. Spell amounts are apportioned pro-rata by days.
std::vector<double> biweekly_series(const PersonHistory& h, const ObservationWindow& w,
                                    BiweeklyQuantity q);

// Sample standard deviation (divisor n-1); series shorter than 2 reads as 0
// and sets *short_series when provided.
double fluctuation(std::span<const double> series, bool* short_series = nullptr);

// Base (non-referencing) families only; ratio/flag/interaction entries are
// resolved by build_matrix.
FeatureValue derive_feature(const FeatureCatalogEntry& entry, const PersonHistory& h,
                            const DeriveContext& ctx = {});

// Missing-value policy: missing -> 0 plus a paired `<name>miss` indicator.
struct RawColumn {
  std::string name;
  std::vector<double> values;
  std::vector<char> missing;
};
struct PolicyColumns {
  std::string name;
  std::vector<double> values;                     // imputed
  std::optional<std::vector<double>> indicator;   // present iff any missing
};
PolicyColumns apply_missing_policy(const RawColumn& raw);

// Top-coding primitives.
std::pair<double, bool> top_code_cap(double value, double cap);
bool flag_at_or_above_percentile(double value, std::vector<double> sample,
                                 double pct = 0.99);
bool flag_ratio_above_one(double value);

// Deterministic assembly: catalog order, each missing-prone base column
// immediately followed by its `<name>miss` indicator. Throws on duplicate
// names.
FeatureMatrix build_matrix(std::span<const PersonHistory> persons,
                           const FeatureCatalog& catalog,
                           const DeriveContext& ctx = {}, int threads = 1);

// Appends all pairwise products of the listed columns, named "a,b".
FeatureMatrix expand_interactions(const FeatureMatrix& m,
                                  const std::vector<std::string>& base_columns);

}  // namespace spellforge
